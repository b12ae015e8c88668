"""Federated unlearning simulator: random-relabel client unlearning, server
blend with selective pruning, and a drone uplink timing model."""

from .channel import (
    ChannelParams,
    ComputeModel,
    LinkBudget,
    comm_time,
    compute_time,
    geometry,
    link_budget,
    p_los,
    path_loss,
    round_time,
)
from .config import ConfigError, ExperimentConfig, derive_seed, paper_config
from .data import (
    ClientSplit,
    Dataset,
    PartitionSpec,
    combine,
    generate_blobs,
    load_csv,
    load_idx,
    partition,
    relabel_random,
    select_unlearn,
)
from .federation import (
    ClientState,
    RoundRecord,
    aggregate,
    build_environment,
    client_learn,
    client_unlearn,
    eval_accuracy,
    run_fedau_like,
    run_retrain,
    run_training,
    server_unlearn,
)
from .harness import MetricsRow, report, run_sweep
from .nn import (
    Batch,
    ModelSpec,
    ParamVector,
    SgdConfig,
    cross_entropy,
    forward,
    gradient,
    init_params,
    local_train,
    sgd_step,
)
from .pruning import (
    PruneMask,
    SparsePayload,
    from_sparse,
    l1_magnitudes,
    l1_prune,
    selective_prune,
    to_sparse,
    top_fraction_mask,
)

__version__ = "0.1.0"

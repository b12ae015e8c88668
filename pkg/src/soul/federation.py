"""Federated training with client-side unlearning models and server-side
blend-and-prune unlearning, plus the Retrain and blend-only baselines.

One global round:

1. every drone copies the global model and trains it on its full data;
2. unlearning drones additionally train their persistent unlearning model
   on their remaining data mixed with a freshly relabeled forget set;
3. uploads are L1-pruned (SoUL arm only) and densified at the server;
4. the server averages the learning models, blends the result with the
   averaged unlearning models and applies selective pruning;
5. the averaged learning model (or the unlearned one, if configured) is
   sent back to the drones.

Clients are processed in ascending id order so every run is reproducible
bit-for-bit from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .channel import (
    Stopwatch,
    base_station,
    comm_time,
    compute_time,
    drone_positions,
    link_budget,
    round_time,
    training_flops_per_sample,
)
from .config import ExperimentConfig, derive_seed
from .data import (
    ClientSplit,
    Dataset,
    combine,
    concat,
    generate_blobs,
    partition,
    relabel_random,
    select_unlearn,
    train_test_split,
)
from .nn import ParamVector, SgdConfig
from .pruning import PruneMask, dense_payload_bytes, l1_prune, selective_prune, to_sparse


@dataclass
class ClientState:
    id: int
    data: Dataset
    seed: int
    position: tuple[float, float, float]
    split: ClientSplit | None = None
    theta: ParamVector | None = None
    theta_u: ParamVector | None = None

    @property
    def is_unlearning(self) -> bool:
        return self.split is not None


@dataclass
class ServerState:
    theta: ParamVector
    alpha: float
    beta: float
    unlearn_weighting: str = "by_unlearn_count"
    round: int = 0


@dataclass
class RoundRecord:
    round: int
    acc_remain: float
    acc_test: float
    acc_unlearn: float
    payload_bytes: list[int]
    comp_times: list[float]
    comm_times: list[float]
    total_time: float
    pruned_count: int = 0

    @property
    def critical_client(self) -> int:
        sums = [c + w for c, w in zip(self.comp_times, self.comm_times)]
        return int(np.argmax(sums))

    def recomputed_total(self) -> float:
        return round_time(list(zip(self.comp_times, self.comm_times)))


@dataclass
class Environment:
    """Everything shared between the arms of one seeded experiment."""

    cfg: ExperimentConfig
    seed: int
    clients: list[ClientState]
    test: Dataset
    init: ParamVector
    bs_pos: tuple[float, float, float]
    rates: list[float] = field(default_factory=list)

    @property
    def unlearning_ids(self) -> list[int]:
        return [c.id for c in self.clients if c.is_unlearning]

    def remain_set(self) -> Dataset:
        return concat([c.split.remain if c.split else c.data for c in self.clients])

    def unlearn_set(self) -> Dataset | None:
        parts = [c.split.unlearn for c in self.clients if c.split]
        return concat(parts) if parts else None


def build_environment(cfg: ExperimentConfig, seed: int | None = None) -> Environment:
    cfg.validate()
    seed = cfg.master_seed if seed is None else seed
    dc = cfg.data
    full = generate_blobs(
        dc.n_samples + dc.n_test, cfg.model.input_dim, cfg.model.num_classes, dc.spread,
        derive_seed(seed, "data"),
    )
    train, test = train_test_split(full, dc.n_test / (dc.n_samples + dc.n_test), derive_seed(seed, "split"))
    spec = cfg.partition.__class__(
        cfg.partition.num_clients, cfg.partition.scheme, cfg.partition.dirichlet_alpha,
        derive_seed(seed, "partition", cfg.partition.seed),
    )
    parts = partition(train, spec)
    k = len(parts)
    positions = drone_positions(k, cfg.field_size, cfg.drone_height, derive_seed(seed, "positions"))
    # nested choice: the first m of a fixed permutation, so sweeps over m share clients
    order = np.random.default_rng(derive_seed(seed, "unlearn-clients")).permutation(k)
    unlearning = set(order[: cfg.unlearn_clients].tolist())
    clients = []
    for cid, ds in enumerate(parts):
        client_seed = derive_seed(seed, "client", cid)
        split = None
        if cid in unlearning:
            split = select_unlearn(ds, cfg.unlearn_ratio, derive_seed(client_seed, "select"), mode=dc.unlearn_mode)
        clients.append(ClientState(cid, ds, client_seed, tuple(positions[cid]), split))
    init_spec = nn.ModelSpec(
        cfg.model.input_dim, cfg.model.hidden_dims, cfg.model.num_classes, cfg.model.activation,
        derive_seed(seed, "init", cfg.model.init_seed),
    )
    bs = base_station(cfg.field_size)
    rates = [link_budget(c.position, bs, cfg.channel, cfg.tx_power).rate_bps for c in clients]
    return Environment(cfg, seed, clients, test, nn.init_params(init_spec), bs, rates)


def unlearn_init(env: Environment, client: ClientState) -> ParamVector:
    """Initial unlearning model: a copy of the initial global model, or a
    fresh per-client draw with ``unlearn_init="per_client"``.

    Averaging unlearning models that start from unrelated random draws
    blends networks whose hidden units do not correspond, so the shared
    start is the default.
    """
    if env.cfg.unlearn_init == "global":
        return env.init.copy()
    m = env.cfg.model
    spec = nn.ModelSpec(m.input_dim, m.hidden_dims, m.num_classes, m.activation, derive_seed(client.seed, "unlearn-init"))
    return nn.init_params(spec)


def client_learn(client: ClientState, theta_global: ParamVector, cfg: SgdConfig, seed: int) -> ParamVector:
    """Train a copy of the global model on the client's full dataset."""
    client.theta = nn.local_train(theta_global.copy(), client.data, cfg, seed)
    return client.theta


def unlearning_dataset(client: ClientState, round_seed: int, exclude_original: bool = False) -> Dataset:
    relabeled = relabel_random(client.split.unlearn, derive_seed(client.seed, round_seed, "relabel"), exclude_original)
    return combine(relabeled, client.split.remain)


def client_unlearn(
    client: ClientState,
    cfg: SgdConfig,
    round_seed: int,
    exclude_original: bool = False,
) -> ParamVector:
    """Continue training the client's persistent unlearning model on its
    remaining data plus the forget set under fresh random labels."""
    if not client.is_unlearning:
        raise ValueError(f"client {client.id} has no unlearning request")
    if client.theta_u is None:
        raise ValueError(f"client {client.id} unlearning model was never initialised")
    combined = unlearning_dataset(client, round_seed, exclude_original)
    client.theta_u = nn.local_train(client.theta_u, combined, cfg, derive_seed(client.seed, round_seed, "unlearn"))
    return client.theta_u


def aggregate(params_list: list[ParamVector], weights=None) -> ParamVector:
    """Elementwise mean (or weighted mean) of aligned parameter vectors."""
    if not params_list:
        raise ValueError("nothing to aggregate")
    first = params_list[0]
    for p in params_list[1:]:
        first.check_aligned(p)
    stacked = np.stack([p.flat for p in params_list])
    if np.all(stacked == stacked[0]):
        # the float mean of identical rows can drift by an ulp; the exact answer is the row
        return first.copy()
    if weights is None:
        return first.with_flat(stacked.mean(axis=0))
    w = np.asarray(weights, dtype=np.float64)
    return first.with_flat((w / w.sum()) @ stacked)


def unlearn_weights(bases, scheme: str = "by_unlearn_count") -> np.ndarray:
    bases = np.asarray(bases, dtype=np.float64)
    if scheme == "uniform":
        return np.full(bases.size, 1.0 / bases.size)
    if np.any(bases < 0) or bases.sum() <= 0:
        raise ValueError("unlearning weight bases must be non-negative with a positive sum")
    return bases / bases.sum()


def server_unlearn(
    theta: ParamVector,
    unlearn_params: list[tuple[ParamVector, float]],
    alpha: float,
    beta: float | None,
    *,
    weighting: str = "by_unlearn_count",
    scope: str = "layer",
    granularity: str = "weight",
) -> tuple[ParamVector, PruneMask | None]:
    """Blend ``alpha * theta + (1 - alpha) * mean_unlearn`` then selectively
    prune it against the averaged unlearning model.

    ``beta=None`` skips pruning and returns the plain blend.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must be in [0, 1]")
    if not unlearn_params:
        raise ValueError("server unlearning requested without unlearning models")
    weights = unlearn_weights([b for _, b in unlearn_params], weighting)
    theta_u = aggregate([p for p, _ in unlearn_params], weights)
    theta.check_aligned(theta_u)
    blended = theta.with_flat(alpha * theta.flat + (1.0 - alpha) * theta_u.flat)
    if beta is None:
        return blended, None
    return selective_prune(blended, theta_u, beta, scope, granularity)


def eval_accuracy(theta: ParamVector, ds: Dataset) -> float:
    """Top-1 accuracy; argmax ties go to the lowest class index."""
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(nn.predict(theta, ds.inputs) == ds.labels))


def _upload(theta: ParamVector, fraction: float, prune: bool, cfg: ExperimentConfig) -> tuple[ParamVector, int]:
    if not prune:
        return theta, dense_payload_bytes(theta.total_len)
    pruned = l1_prune(theta, fraction, cfg.prune_scope, cfg.prune_granularity)
    return pruned, to_sparse(pruned).payload_bytes


def _run(env: Environment, arm: str, rounds: int | None = None) -> tuple[ParamVector, list[RoundRecord]]:
    cfg = env.cfg
    rounds = cfg.rounds if rounds is None else rounds
    sgd = cfg.sgd
    retrain = arm == "retrain"
    prune_uploads = arm == "soul"
    flops = cfg.compute.flops_per_sample
    flops = training_flops_per_sample(cfg.model.num_params) if flops is None else flops
    charged = max(1, len(env.unlearning_ids)) if retrain and cfg.retrain_charge == "per_request" else 1

    clients = [ClientState(c.id, c.data, c.seed, c.position, c.split) for c in env.clients]
    for c in clients:
        if retrain and c.is_unlearning:
            c.data = c.split.remain
            c.split = None
        elif c.is_unlearning:
            c.theta_u = unlearn_init(env, c)
    remain = env.remain_set()
    forget = env.unlearn_set()

    server = ServerState(env.init.copy(), cfg.alpha, cfg.beta, cfg.unlearn_weighting)
    theta_hat = server.theta
    history: list[RoundRecord] = []
    for r in range(rounds):
        uploads, unlearn_uploads, sizes = [], [], []
        comp, comm, payloads = [], [], []
        for c in clients:
            round_seed = derive_seed(env.seed, r, c.id)
            watch = Stopwatch()
            with watch:
                theta_k = client_learn(c, server.theta, sgd, derive_seed(round_seed, "learn"))
            workload = len(c.data)
            theta_k, nbytes = _upload(theta_k, cfg.l1_fraction, prune_uploads, cfg)
            uploads.append(theta_k)
            sizes.append(len(c.data))
            if c.is_unlearning:
                with watch:
                    client_unlearn(c, sgd, round_seed, cfg.data.relabel_exclude_original)
                workload += c.split.full_size
                theta_u, ubytes = _upload(c.theta_u, cfg.l1_fraction, prune_uploads, cfg)
                # the drone keeps the pruned unlearning model it uploaded
                c.theta_u = theta_u
                nbytes += ubytes
                unlearn_uploads.append((theta_u, len(c.split.unlearn)))
            nbytes *= charged
            tc = compute_time(
                workload * charged, cfg.compute, local_episodes=sgd.local_episodes,
                flops_per_sample=flops, drone=c.id, measured_seconds=watch.elapsed * charged,
            )
            payloads.append(int(nbytes))
            comp.append(tc)
            comm.append(comm_time(nbytes, env.rates[c.id]))

        weights = sizes if cfg.aggregation == "weighted" else None
        server.theta = aggregate(uploads, weights)
        pruned_count = 0
        if unlearn_uploads and not retrain:
            theta_hat, mask = server_unlearn(
                server.theta, unlearn_uploads, cfg.alpha, cfg.beta if arm == "soul" else None,
                weighting=cfg.unlearn_weighting, scope=cfg.prune_scope, granularity=cfg.prune_granularity,
            )
            pruned_count = mask.kept_count if mask is not None else 0
        else:
            theta_hat = server.theta
        if cfg.distribute_unlearned:
            server.theta = theta_hat
        server.round = r + 1

        history.append(RoundRecord(
            round=r,
            acc_remain=eval_accuracy(theta_hat, remain),
            acc_test=eval_accuracy(theta_hat, env.test),
            acc_unlearn=eval_accuracy(theta_hat, forget) if forget is not None else float("nan"),
            payload_bytes=payloads,
            comp_times=comp,
            comm_times=comm,
            total_time=round_time(list(zip(comp, comm))),
            pruned_count=pruned_count,
        ))
    return theta_hat, history


def _env(cfg_or_env, seed: int | None) -> Environment:
    if isinstance(cfg_or_env, Environment):
        return cfg_or_env
    return build_environment(cfg_or_env, seed)


def run_training(cfg_or_env, seed: int | None = None, rounds: int | None = None):
    """SoUL: pruned uploads, blend and selective pruning at the server.

    Returns ``(theta_hat, history)``.
    """
    return _run(_env(cfg_or_env, seed), "soul", rounds)


def run_fedau_like(cfg_or_env, seed: int | None = None, rounds: int | None = None):
    """Same loop as :func:`run_training` with dense uploads and blend-only unlearning."""
    return _run(_env(cfg_or_env, seed), "fedau_like", rounds)


def run_retrain(cfg_or_env, seed: int | None = None, rounds: int | None = None):
    """Federated averaging from scratch where unlearning drones hold only
    their remaining data.

    With ``retrain_charge="per_request"`` the reported time and bytes are
    multiplied by the number of unlearning requests, one from-scratch run
    per request.
    """
    return _run(_env(cfg_or_env, seed), "retrain", rounds)


RUNNERS = {"soul": run_training, "retrain": run_retrain, "fedau_like": run_fedau_like}

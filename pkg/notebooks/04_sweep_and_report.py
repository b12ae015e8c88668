# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Sweeps and figure tables
#
# Vary the number of unlearning drones, write `results.csv`, then
# aggregate it into the figure tables. The same can be done from the shell
# with `python -m soul run ...` followed by `python -m soul report ...`.

# %%
import csv
import tempfile
from pathlib import Path

from soul.config import ExperimentConfig
from soul.harness import report, run_sweep, summarize

out = Path(tempfile.mkdtemp())
cfg = ExperimentConfig(rounds=20, seeds=2)
rows = run_sweep(cfg, "unlearn_clients", [2, 4, 6, 8], out_dir=out)
print(summarize(rows, "unlearn_clients"))

# %%
text, paths = report(out / "results.csv")
with open(paths["fig4_total.csv"]) as fh:
    for record in csv.reader(fh):
        print(record)

# %% [markdown]
# Retrain's round time grows with the number of requests because each
# request is charged as its own from-scratch run. SoUL and the blend-only
# arm do the same computation, and SoUL uploads a quarter of the bytes.

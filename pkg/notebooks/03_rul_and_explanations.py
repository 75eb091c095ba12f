# %% [markdown]
# # RUL regression and what the features mean
#
# This walk-through runs the whole command-line pipeline on the bundled
# acceptance scenario, then reads its CSV artifacts back.

# %%
import csv
import tempfile
from pathlib import Path

import numpy as np

from explainrul import cli
from explainrul.explain import connection_weight_importance
from explainrul.models import load_model
from explainrul.prognosis import read_rul_csv

here = Path(__file__).resolve().parent if "__file__" in globals() else Path.cwd()
config = here.parent / "configs" / "acceptance.ini"
out = Path(tempfile.mkdtemp(prefix="explainrul-"))
print("exit code:", cli.main(["--config", str(config), "--out", str(out)]))

# %%
print((out / "metrics.csv").read_text())
print((out / "baseline_metrics.csv").read_text())

# %% [markdown]
# Estimated against true RUL for the first test run, every tenth record.

# %%
series = read_rul_csv(out / "estimates" / "rul_test_00.csv")
for t, true, est in list(zip(series.times_s, series.true_rul_s, series.est_rul_s))[::10]:
    print(f"t={t:6.0f} s  true {true:6.0f} s  estimated {est:7.1f} s")

# %% [markdown]
# Connection-weight importance of the four features for the regressor.

# %%
ffnn = load_model(out / "models" / "ffnn.model", "ffnn")
print(np.round(connection_weight_importance(ffnn.net), 3))

# %% [markdown]
# Direct feature injection: sweep feature 1 through the decoder and look at
# the bands that hold the fault tone and a resonance.

# %%
with open(out / "explain" / "injection_1.csv", newline="") as fh:
    rows = list(csv.reader(fh))
sweep = rows[0][1:]


def contains(label, hz):
    ch, _, rng = label.partition(":")
    lo, _, hi = rng.partition("-")
    return ch == "H" and float(lo) < hz <= float(hi)


for row in rows[1:]:
    if contains(row[0], 168.0) or contains(row[0], 3800.0):
        print(row[0], [f"{float(v):+.2f}" for v in row[1:]])
print("sweep values:", sweep)

# %%
print((out / "explain" / "annotations.csv").read_text())

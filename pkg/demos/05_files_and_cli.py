"""End-to-end file formats and the command-line interface.

Everything the CLI does is driven through the same library calls used here;
this demo shells through the in-process entry point so it runs without an
installed console script.
"""

import json
import tempfile
from pathlib import Path

from tempheno.cli import main
from tempheno.io import load_model, load_report

root = Path(tempfile.mkdtemp(prefix="tempheno-demo-"))
data = root / "data"
run = root / "run"

# 1. Plant a dataset. Files: events.csv (+ durations sidecar), plus the true
#    phenotypes/pathways in model format for later scoring.
main(["generate", "--individuals", "60", "--features", "10", "--rank", "3",
      "--window", "2", "--duration", "8", "--seed", "5", "--out-dir", str(data)])

# 2. Train. Writes model.json, train_pathways.json and report.json.
main(["train", "--data", str(data / "events.csv"), "--rank", "3", "--window", "2",
      "--epochs", "60", "--batch", "20", "--seed", "5", "--out-dir", str(run)])
report = load_report(run / "report.json")
print("train results:", json.dumps(report["results"], indent=1))

# 3. Score against the planted truth (FIT_P/FIT_W need the truth files).
main(["evaluate", "--model", str(run / "model.json"),
      "--data", str(data / "events.csv"),
      "--truth-model", str(data / "truth_model.json"),
      "--json"])

# 4. Project the model onto data with phenotypes frozen; report FIT there.
main(["project", "--model", str(run / "model.json"),
      "--data", str(data / "events.csv"), "--epochs", "60",
      "--out-dir", str(run / "projection")])

# 5. Compare a model with itself (similarity 1), and render heatmaps.
main(["compare", str(run / "model.json"), str(run / "model.json")])
main(["inspect", "--model", str(run / "model.json"), "--out-dir", str(run / "svg")])

model = load_model(run / "model.json")
print("model file round-trips", model.phenotypes.rank, "phenotypes;",
      "provenance:", model.provenance["dataset_digest"][:18], "...")
print("SVG heatmaps:", sorted(p.name for p in (run / "svg").glob("*.svg")))
print("demo artifacts under", root)

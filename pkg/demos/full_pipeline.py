"""
The whole pipeline from one JSON file
=====================================

``trace_config.json`` treats the Trace labels as clusters, trains boosted
trees, KNN and the FCN on two input layouts and explains the first two.
Running this script is the same as

    python -m clusterlens run --config demos/trace_config.json --out <dir>
"""

import json
import sys
from pathlib import Path

from clusterlens.pipeline import RunConfig, run

here = Path(__file__).parent
out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_run")
cfg = RunConfig.from_json(here / "trace_config.json")
manifest = run(cfg, out)

for stage, rec in manifest.stages.items():
    print(f"{stage:<11} {rec['status']:<8} {rec['seconds']:6.1f}s")

report = json.loads((out / "report" / "report.json").read_text())
print("\nmacro F1 per model and input layout")
for row in report["classification"]:
    f1 = row["macro_f1"]
    print(f"  {row['model']:<4} {row['config']:<10} {f1['mean']:.3f} ± {f1['std']:.3f}")

print("\nhow far the explainers agree (Spearman over positions)")
for a in report["agreement"]:
    print(f"  {a['config']:<10} {a['a']:<18} {a['b']:<18} {a['spearman']:+.2f}")

print("\nplots:", sorted(p.name for p in (out / "report").glob("*.svg")))

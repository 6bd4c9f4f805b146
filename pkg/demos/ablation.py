"""The four-way ablation: baseline, TCI alone, VCI alone, both.

Takes a few minutes on one core; pass a seed count to change it."""
import sys

from dualcausal import build_world, strong_bias
from dualcausal.harness import TrainConfig, run_ablation, run_sweep, spurious_matching

nseeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
w = build_world(strong_bias())
res = run_ablation(w, TrainConfig(epochs=20), seeds=range(nseeds))

print(f"{'variant':10s} {'acc@1':>7s} {'mAP':>7s} {'spurious':>9s}")
for v, reports in res.reports.items():
    sm = sum(spurious_matching(r, w.spec.confounder_actions) for r in reports) / len(reports)
    print(f"{v:10s} {res.mean(v, 'acc1'):7.3f} {res.mean(v, 'map'):7.3f} {sm:9.3f}")

# how depth of the temporal encoder changes the full model
for layers, row in run_sweep(strong_bias(), TrainConfig(epochs=10), "layers", [0, 1, 2]):
    print("layers", layers, row)

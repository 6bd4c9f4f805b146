"""A look at the synthetic desk world: what an episode holds and where the
planted bias lives."""
import numpy as np

from dualcausal import synthworld as sw

spec = sw.strong_bias()
w = sw.build_world(spec)
print(f"{spec.num_classes} classes, {spec.num_atomic} atomic actions, "
      f"{spec.frames_per_episode} frames, dim {spec.feature_dim}")

e = sw.sample_dataset(w, 1, seed=0)[0]
print("class:", sw.CLASS_NAMES[e.y])
print("frames:", [sw.ATOMIC_NAMES[a] for a in e.frame_atomic])
a, spur = spec.confounder_actions[0]
print("(v_p - v) along the bias direction, per frame; large only on confounder-action frames:")
print(np.round((e.v_p - e.v) @ w.bias_directions[spur], 1))

# observational data ties the confounder action to its spurious class, test data does not
for regime in sw.REGIMES:
    eps = sw.sample_dataset(w, 1000, 1, regime)
    hit = [e.y == spur for e in eps if e.atomic_labels[a]]
    print(f"{regime:14s} P(y={sw.CLASS_NAMES[spur]!r} | {sw.ATOMIC_NAMES[a]!r} present) = {np.mean(hit):.2f}")

co = sw.cooccurrence_matrix(sw.sample_dataset(w, 500, 2), spec.num_atomic)
print("co-occurrence of atomic actions:")
print(np.round(co, 2))

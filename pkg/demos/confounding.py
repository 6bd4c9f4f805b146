"""Why conditioning is not intervening: a small discrete model where the
bias node B pushes both the text branch T and the label Y."""
import numpy as np

from dualcausal import scm

m = scm.bundled_fixtures()["confounding_demo"]
print("variables:", m.order)
print("parents:", {v: m.parents[v] for v in m.order})

obs = scm.conditional(m, "Y", {"T": 1})[1]
do = scm.interventional(m, "Y", {"T": 1})[1]  # graph surgery, then enumeration
adj = scm.backdoor_adjust(m, "T", 1, "Y", ("B",))[1]  # sum_b P(Y|T,b) P(b)
print(f"P(Y=1 | T=1)     = {obs:.4f}")
print(f"P(Y=1 | do(T=1)) = {do:.4f}   back-door formula gives {adj:.4f}")

# the same two numbers by sampling
rng = np.random.default_rng(0)
p, se = scm.monte_carlo(m, "Y", 1, 100_000, rng, evidence={"T": 1})
print(f"sampled, conditioned: {p:.4f} +- {se:.4f}")
p, se = scm.monte_carlo(m, "Y", 1, 100_000, rng, do={"T": 1})
print(f"sampled, intervened:  {p:.4f} +- {se:.4f}")

# every identity the package knows about, on a random model
rand = scm.random_scm(np.random.default_rng(5), "dual", max_card=4)
for name, ok, gap in scm.verify_identities(rand):
    print(f"{'ok ' if ok else 'BAD'} {name:32s} {gap:.1e}")

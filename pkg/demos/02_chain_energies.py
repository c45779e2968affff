"""
Chain graphs and smoothness energies over per-instance scores
=============================================================

Bags are ordered sequences, so adjacent instances are expected to behave
alike. A chain graph encodes that neighborhood; its Laplacian turns a
score vector into a scalar roughness energy the training loss can punish.
"""

import numpy as np

from smoothmil import Tape, Tensor, chain_graph, energy_s1, energy_s2, energy_sum_form

# The chain over n nodes connects i to i+1. L = D - A, every row sums to 0.
g = chain_graph(5)
print("adjacency:\n", g.adjacency.astype(int))
print("laplacian row sums:", g.laplacian.sum(axis=1))

# First-order energy fᵀLf sums squared steps between neighbors; the
# second-order energy ||Lf||² also punishes curvature. A lone spike is
# expensive, a gentle ramp is cheap.
spike = Tensor([0.0, 0.0, 3.0, 0.0, 0.0])
ramp = Tensor([0.0, 0.75, 1.5, 2.25, 3.0])
for name, f in (("spike", spike), ("ramp", ramp)):
    print(f"{name}: s1 = {energy_s1(f, g).item():.3f}, "
          f"s2 = {energy_s2(f, g).item():.3f}")

# The matrix forms agree with the literal pairwise sums (the second-order
# sum form carries a 1/4 prefactor, hence the factor of 4).
f = np.array([0.0, 1.0, 0.0, 2.0, 1.0])
print("s1 vs sum form:", energy_s1(Tensor(f), g).item(),
      energy_sum_form(f, g, order=1))
print("s2 vs 4x sum form:", energy_s2(Tensor(f), g).item(),
      4.0 * energy_sum_form(f, g, order=2))

# Both energies ignore a constant shift: only differences between
# neighbors matter, never the overall level of the scores.
shifted = Tensor(f + 10.0)
print("shift invariance:", energy_s1(Tensor(f), g).item(),
      "==", energy_s1(shifted, g).item())

# The energies are differentiable, so they can sit inside the training
# loss. For the first-order energy the gradient is exactly 2 L f.
ft = Tensor(f)
with Tape() as tape:
    e = energy_s1(ft, g)
print("gradient of s1:", tape.backward(e).wrt(ft))
print("2Lf           :", 2.0 * g.laplacian @ f)

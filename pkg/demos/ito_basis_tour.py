"""Build the Itô orthogonal basis, check it exactly, then watch Hermite polynomials appear."""

import math

import numpy as np

from pathortho.cli import format_poly
from pathortho.expected import inner_ito
from pathortho.expansion import orthogonal_features
from pathortho.ortho import ito_basis, ito_orthogonal_basis
from pathortho.paths import PathSpec, ito_features, sample_paths
from pathortho.words import word_str

basis = ito_orthogonal_basis(4)
print("binary patterns up to weighted degree 4:")
for e in basis:
    print(f"  p̂_{word_str(e.key) or '∅':<5} = {format_poly(e.poly):<28} ‖·‖² = {e.sq_norm}")

worst = max(abs(inner_ito(a.poly, b.poly)) for a in basis for b in basis if a.key != b.key)
print(f"largest off-diagonal exact inner product: {worst}")

# on a single Brownian letter, n!·p̂_{1…1} is the Hermite polynomial of B_T
batch = sample_paths(PathSpec(d=1, steps=100, paths=5, seed=0))
b1 = ito_basis(1, 3)
vals = orthogonal_features(ito_features(batch, 3), b1)
B = batch.terminal()[:, 0]
print("\n  B_T      3!·p̂_111    B³ − 3B")
for x, v in zip(B, vals[:, b1.keys().index((1, 1, 1))]):
    print(f"  {x:+.4f}  {math.factorial(3) * v:+.6f}  {x**3 - 3 * x:+.6f}")
assert np.allclose(6 * vals[:, b1.keys().index((1, 1, 1))], B**3 - 3 * B)

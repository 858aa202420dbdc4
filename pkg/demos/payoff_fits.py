"""Series expansion against least squares for Black-Scholes payoffs, degree by degree."""

from pathortho.expansion import bs_compare

rows = bs_compare(degrees=(1, 2, 3, 4), paths=5000, steps=100, seed=3)
table: dict[tuple[str, int], float] = {(r.method, r.N): r.value for r in rows if r.metric == "R2"}
methods = sorted({m for m, _ in table})
print("out-of-sample R²")
print("N  " + "  ".join(f"{m:>13}" for m in methods))
for N in (1, 2, 3, 4):
    print(f"{N}  " + "  ".join(f"{table[m, N]:>13.4f}" for m in methods))

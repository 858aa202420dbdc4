"""Solve the pairing ansatz at low degree and print the obstruction once it stops existing."""

from pathortho.naturality import build_system, equation_str, pairing_label, rank_certify

for n in range(2, 7):
    system = build_system(n)
    cert = rank_certify(system)
    print(f"degree {n}: {cert.n_vars} unknowns, {cert.n_rows} equations, rank {cert.rank_A}/{cert.rank_aug}")
    if cert.consistent:
        nonzero = {pairing_label(p): str(v) for p, v in cert.solution.items() if v}
        print(f"  unique={cert.unique}, nonzero coefficients: {nonzero}")
    else:
        print(f"  inconsistent; a minimal certificate uses {len(cert.support)} equations:")
        for r in cert.support:
            print(f"    y={cert.certificate[r]}:  {equation_str(system, r)}")

"""Boson-fermion correspondence at q = 0.

Counts states per charge sector and level on both sides, then compares the
spectrum of the free Hamiltonian H_2 computed on the bosonic Fock space with
the one computed from fermion occupations.

    python demos/bosonization.py
"""
import math

from cftlab import fermion
from cftlab.params import ModelParams

dims = fermion.fermion_sector_dims(8, 6, 2)
print("fermion states per (charge, level); each row is the partition count p(L)")
for mu in range(-2, 3):
    print(f"  mu={mu:+d}: " + " ".join(f"{dims[(mu, L)]:3d}" for L in range(7)))
print("boson side identical:", dims == fermion.boson_sector_dims(6, 2))

for r0, s0 in [(1, 1), (2, 1)]:
    p = ModelParams(delta=math.inf, r0=r0, s0=s0)
    cmp_ = fermion.compare_h2_spectra(p, level_max=6, mu_max=1)
    print(f"\nnu0 = {p.nu0:.4f}: {len(cmp_.sectors)} sectors, dimensions match: {cmp_.dims_match}, "
          f"largest eigenvalue difference {cmp_.max_abs_diff:.2e}")

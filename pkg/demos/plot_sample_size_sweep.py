"""
How many live samples?
======================

More live samples make it likelier that the search ends on the global
peak, and cost more evaluations.  This sweep runs each sample size on the
same 40 random landscapes and tests both trends.
"""

from nestedentropy import GaussianFamily, GridSpace, benchmark_sweep

family = GaussianFamily(num_components=7, grid=GridSpace.square(61))
summary = benchmark_sweep(family, [5, 10, 20, 50, 100], replicates=40)

print(f"{'N':>5} {'success':>8} {'mean CE':>8}")
for r in summary.records:
    print(f"{r.N:5d} {r.success_probability:8.2f} {r.mean_CE:8.2f}")

t = summary.trends()
print(f"success rises with N:  rho={t['success_rho']:.2f} p={t['success_p']:.3f}")
print(f"efficiency falls with N: rho={t['ce_rho']:.2f} p={t['ce_p']:.3f}")

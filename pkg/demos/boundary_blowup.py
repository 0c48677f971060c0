"""Unit Diracs marching to the boundary.

With mu_n = delta(z_n)^{-gamma} delta_{z_n} and z_n -> z on the sphere,
the solutions converge to the solution of u + G[u^p] = M(., z), and near z
the absorption becomes negligible: u / M -> 1.
"""
from nlgreen.experiments import ExperimentPlan, boundary_singularity_run, martin_source_decay

plan = ExperimentPlan(kernel={"kernel": "rfl", "N": 1, "s": 0.25}, mesh={"resolution": 512, "grading": 2.0},
                      p=1.3, z=(1.0,))
run = boundary_singularity_run(plan)
for n, d, err, it in run.tables["boundary_convergence"][1]:
    print(f"n = {n}  delta(z_n) = {d:.4f}  ||u_n - u|| = {err:.4f}  ({it} iterations)")
for d, _, u, M, r in run.tables["boundary_ratio"][1]:
    print(f"distance {d:5.3f}:  u / M = {r:.3f}")

# the source term G[M^p] / M dies out much faster than u / M approaches 1
decay = martin_source_decay(plan, compare_p=1.6)
print("G[M^p] / M along the ray:", " ".join(f"{r:.3g}" for r in decay.metrics["ratios"]))
print("closer to p* decays slower:", decay.gates["closer_to_critical_decays_slower"])

# the disk (s = 1/2) is much closer to the limit at the same distances; run
#   nlgreen boundary --preset rfl-disk-s05

# General data: M0 = Q J Q^-1. When Re l1 < Re l2 <= Re l3 the solution blows up
# with profile Q diag(-2, 1, 1) Q^-1 / (T - t).
import numpy as np

from linflow.classifier import classify_general
from linflow.dynamics import SolverConfig, integrate_complex_params, integrate_defective_params, integrate_matrix
from linflow.spectral import jordan_decompose

rng = np.random.default_rng(1)
q = rng.normal(size=(3, 3))
blocks = {
    "real": np.diag([-1.0, 0.3, 0.7]),
    "complex": np.array([[-2.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, -2.0, 1.0]]),
    "defective": np.array([[-2.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]),
}
for name, j in blocks.items():
    m0 = q @ j @ np.linalg.inv(q)
    dec = jordan_decompose(m0)
    pred = classify_general(m0)
    traj = integrate_matrix(m0, SolverConfig(t_end=10.0))
    t_est = traj.termination.t_max_estimate
    m_last = traj.matrices()[-1]
    prof = pred.profile
    dev = np.linalg.norm((t_est - traj.t_final) * m_last - prof) / np.linalg.norm(prof)
    print(f"{name:9s} class={dec.spectral_class.value:20s} case={pred.case_tag.value}  T={t_est:.6f}  profile dev={dev:.1e}")

# the canonical blocks on their own
cx = integrate_complex_params(1.0, 1.0, SolverConfig(t_end=2.0))
print("complex block lambda0=1, a0=1: T =", cx.termination.t_max_estimate, " a(final) =", cx.states[-1, 1])
df = integrate_defective_params(1.0, 1.0, SolverConfig(t_end=2.0))
print("defective block lambda0=1: T =", df.termination.t_max_estimate)

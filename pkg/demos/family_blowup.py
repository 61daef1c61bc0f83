# The exact blowup family: r and k are frozen, lambda = lambda0 / (1 - r lambda0 t).
# Integrate the full matrix equation from family data and compare.
import numpy as np

from linflow.closed_forms import FamilySolution
from linflow.dynamics import SolverConfig, integrate_matrix

fam = FamilySolution(lambda0=1.0, r=0.5)
print("k on the family:", fam.k, " exact T:", fam.t_max)

times = (0.5, 1.0, 1.5, 1.8, 1.95)
traj = integrate_matrix(fam.matrix(0.0), SolverConfig(t_end=3.0, sample_times=times))

for t, m in zip(traj.times, traj.matrices()):
    if t in times:
        # lambda is the (3,3) entry of the aligned matrix
        print(f"t={t:5.2f}  lambda numeric={m[2, 2]:.12g}  exact={fam.lam(t):.12g}")

term = traj.termination
print("termination:", term.status.value)
lo, hi = term.confidence_interval
print(f"extrapolated T: {term.t_max_estimate:.15g}  interval: ({lo:.15g}, {hi:.15g})")

# (T - t) lambda = 1/r exactly on the family, so (T - t) r lambda tends to 1
lam = traj.matrices()[:, 2, 2]
tail = lam > 1e6
print("(T - t) r lambda on the last samples:", np.round((term.t_max_estimate - traj.times[tail]) * fam.r * lam[tail], 8)[-5:])

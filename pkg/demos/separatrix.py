# On the separatrix k^2 = (r + 2)^2 / 4 with r > 0 there is no finite-time blowup:
# r decays like t^-3 and lambda grows without bound.
from linflow.closed_forms import AlignedParams, boundary_invariant, boundary_r_bounds
from linflow.dynamics import SolverConfig, integrate_params

r0 = 1.0
p0 = AlignedParams(1.0, r0, (r0 + 2.0) / 2.0)
times = (1.0, 10.0, 100.0, 1000.0)
# reduced=True slaves k to m0 (r + 2), which keeps the data on the separatrix
traj = integrate_params(p0, SolverConfig(t_end=1000.0, sample_times=times), reduced=True)
print("termination:", traj.termination.status.value)

c0 = boundary_invariant(p0.lam, p0.r)
print("invariant lambda r^(2/3) (r+2)^(1/3) at t=0:", c0)
for t, (lam, r, k) in zip(traj.times, traj.states):
    if t in times:
        lo, hi = boundary_r_bounds(r0, 1.0, t)
        c = boundary_invariant(lam, r)
        print(f"t={t:7.1f}  lambda={lam:.6e}  r={r:.6e}  bracket=({lo:.3e}, {hi:.3e})  c/c0-1={c / c0 - 1:+.1e}")

# Particle paths of the r = 1/2 family. The v1 axis is crushed to the origin, the
# plane span{v2, v3} is blown up, and a circle in the yz-plane turns into an
# ellipse lying in span{v2, v3}.
import numpy as np

from linflow.lagrangian import (
    FlowMapSpec,
    circle_image_yz,
    flow_map,
    seregin_sverak_probe,
    yz_circle_constants,
    yz_image_plane_angle,
)

spec = FlowMapSpec.from_params(1.0, 0.5)
v1, v2, v3 = spec.basis
print("T =", spec.t_max, " v1 =", v1, " v3 =", v3)

for frac in (0.0, 0.5, 0.9, 0.99, 0.999):
    t = frac * spec.t_max
    axis = np.linalg.norm(flow_map(spec, v1, t))
    plane = np.linalg.norm(flow_map(spec, v2 + v3, t))
    p, b = seregin_sverak_probe(spec, t, 1.0)
    print(
        f"t/T={frac:5.3f}  |Y(v1)|={axis:.3e}  |Y(v2+v3)|={plane:.3e}  det={spec.jacobian_det(t):.15f}"
        f"  yz-plane angle={yz_image_plane_angle(spec, t):.2e}  p={p:.3e}  p+|u|^2/2={b:.3e}"
    )

# eigenbasis coordinates of the yz-circle image, scaled by (1 - s): the v2 and
# v3 extents tend to 1 and c3, the v1 extent to 0
c1, c3 = yz_circle_constants(0.5, spec.family.k)
t = 0.999 * spec.t_max
s = spec.shrink(t)
pts = np.array([circle_image_yz(1.0, spec, t, th) for th in np.linspace(0, 2 * np.pi, 400)])
print("c1 =", c1, " c3 =", c3)
coef = pts @ spec.q_inv.T
print("scaled extents along v1, v2, v3:", s * np.abs(coef).max(axis=0))

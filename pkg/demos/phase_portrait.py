# Classify a grid of eigenframe-aligned data (lambda0 = 1) and print a text map.
# Rows run over k (top = large k), columns over r.
import numpy as np

from linflow.classifier import classify_aligned
from linflow.closed_forms import AlignedParams, limit_constants

symbol = {
    "family_blowup": "F",
    "family_stationary": "S",
    "family_decay": "D",
    "case1": "1",
    "case2": "2",
    "case3_boundary": "3",
    "case4": "4",
    "case5": "5",
    "case6": "6",
}

rs = np.linspace(-1.0, 1.5, 51)
ks = np.linspace(0.0, 2.5, 26)
for k in ks[::-1]:
    row = "".join(symbol[classify_aligned(AlignedParams(1.0, r, k)).case_tag.value] for r in rs)
    print(f"k={k:4.2f} {row}")
print("       r from", rs[0], "to", rs[-1])

# where cases 1 and 2 end up: the attracting root of g along k = m0 (r + 2)
for m0 in (0.0, 0.1, 0.2, 0.3, 0.4, 0.49):
    lc = limit_constants(m0)
    print(f"m0={m0:4.2f}  r_inf={lc.r_inf:.6f}  k_inf={lc.k_inf:.6f}  r_star={lc.r_star:.6f}")

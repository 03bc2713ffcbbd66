"""Split of the bound constant and the convergence dichotomy.

Inside the admissible range the truncated integral settles as the window
[delta, M] opens up; on the boundary the lower or upper piece grows like
log, and beyond it like a power.

    python3 demos/bound_constant.py
"""

import math

from mixsio import LemmaParams, young_bound_constant

print(f"{'p':>4} {'alpha':>7} {'verdict':>9} {'piece':>5} {'model':>6} {'B / rate':>12}")
for p, alpha in [(2.0, 0.5), (1.5, 0.5), (3.0, 0.5), (2.0, -1.0), (2.0, -1.25), (2.0, 1.25)]:
    rep = young_bound_constant(LemmaParams(2, p, alpha), 1e-6, 1e6)
    value = rep.B_extrapolated if rep.verdict == "converged" else rep.fitted_rate
    print(f"{p:4.1f} {alpha:7.2f} {rep.verdict:>9} {rep.divergent_piece or '-':>5} {rep.model or '-':>6} {value:12.6f}")

print(f"\npi^2 = {math.pi**2:.6f}; log rates approach 2 pi = {2 * math.pi:.6f}")

"""Blow-up of the truncated ratio for the necessity bump.

The bump vanishes near the origin while its Riesz transform does not, so
the weighted norm of the transform over [delta, rho_max] picks up
int_delta rho^{alpha p + n - 1} drho.  Below -n/p that grows like a power
of 1/delta, and at -n/p like log(1/delta).

    python3 demos/sharpness.py
"""

import numpy as np

from mixsio import GridSpec, NormParams, riesz
from mixsio.sweep import blowup_probe

K = riesz(np.array([1.0, 0.0]))
deltas = np.logspace(-2, -4, 9)
for alpha in (-1.25, -1.0, -0.5, 1.25):
    fit = blowup_probe(NormParams(2, 2, alpha), K, deltas, GridSpec())
    ratios = " ".join(f"{r:.4f}" for r in fit.ratios[::2])
    detail = f"exponent {fit.exponent:.4f} (expected {fit.expected_exponent:.4f})" if fit.model == "power" else ""
    print(f"alpha={alpha:+.2f} side={fit.side:5} {fit.verdict:9} model={fit.model or "-"}  {detail}")
    print(f"    ratios at delta=1e-2..1e-4: {ratios}")

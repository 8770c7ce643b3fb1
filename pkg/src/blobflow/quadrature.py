from __future__ import annotations

import warnings
from typing import Callable

from scipy import integrate

from .errors import QuadratureError


def quad(f: Callable[[float], float], a: float, b: float, epsabs: float = 1e-12, epsrel: float = 1e-12,
         limit: int = 200, points=None) -> float:
    """Adaptive Gauss-Kronrod quadrature that raises instead of warning."""
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit,
                                        points=points, full_output=True)[:3]
    # ier = 2 (roundoff) with a tiny error estimate is still a usable answer
    tol = max(10 * epsabs, 10 * epsrel * abs(val), 1e-10)
    if not (abs(err) <= tol):
        raise QuadratureError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge (error estimate {err:.3g})")
    return val

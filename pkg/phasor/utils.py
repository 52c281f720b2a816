import math
from logging import getLogger
from typing import Callable, Optional, Tuple

from ilro.exceptions import ConvergenceError, NumericalError

logger = getLogger(__name__)

TWO_PI: float = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Map an angle onto (-pi, pi]."""
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise NumericalError(f"{name} must be finite, got {value!r}")


def safeguarded_newton(
        func: Callable[[float], float],
        dfunc: Callable[[float], float],
        lo: float,
        hi: float,
        x0: Optional[float] = None,
        tol: float = 1e-12,
        max_iter: int = 200,
) -> float:
    """
    Newton-Raphson kept inside the bracket [lo, hi]; any step that leaves the
    bracket or fails to halve the bracket is replaced by bisection. The
    bracket must contain a sign change. Returns once |func(x)| <= tol or the
    bracket has collapsed to machine precision.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise ConvergenceError(f"root not bracketed in [{lo!r}, {hi!r}]")
    if f_lo > 0.0:
        lo, hi = hi, lo

    x = 0.5 * (lo + hi) if x0 is None or not min(lo, hi) < x0 < max(lo, hi) else x0
    dx_old = abs(hi - lo)
    dx = dx_old
    fx = func(x)
    for iteration in range(max_iter):
        if abs(fx) <= tol:
            logger.debug("newton converged in %d iterations (residual %.3e)", iteration, fx)
            return x
        dfx = dfunc(x)
        newton_leaves = dfx == 0.0 or ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0
        if newton_leaves or abs(2.0 * fx) > abs(dx_old * dfx):
            dx_old = dx
            dx = 0.5 * (hi - lo)
            x = lo + dx
        else:
            dx_old = dx
            dx = fx / dfx
            previous = x
            x -= dx
            if x == previous:
                return x
        if abs(hi - lo) <= 4.0 * math.ulp(max(abs(lo), abs(hi), 1e-300)):
            return x
        fx = func(x)
        if fx < 0.0:
            lo = x
        else:
            hi = x
    if abs(fx) <= 10.0 * tol:
        return x
    raise ConvergenceError(f"no convergence after {max_iter} iterations (residual {fx:.3e})")


def bisect_boundary(
        predicate: Callable[[float], bool],
        inside: float,
        outside: float,
        rtol: float = 1e-9,
        max_iter: int = 200,
) -> Tuple[float, float]:
    """
    Shrink [inside, outside] around the point where predicate flips from True
    to False. Returns the final (inside, outside) pair.
    """
    for _ in range(max_iter):
        if abs(outside - inside) <= rtol * max(abs(inside), abs(outside)):
            break
        middle = 0.5 * (inside + outside)
        if predicate(middle):
            inside = middle
        else:
            outside = middle
    return inside, outside


__all__ = (
    'TWO_PI',
    'wrap_angle',
    'require_finite',
    'safeguarded_newton',
    'bisect_boundary',
)

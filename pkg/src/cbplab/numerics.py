"""Special functions, 1-D quadrature, root finding and even Taylor coefficients.

Everything here is pure and reentrant. The heavier modules only ever reach
scipy through these wrappers, so tolerances and error reporting stay uniform.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from cbplab.errors import BracketError, DomainError, PrecisionError, ValidationError

POLE_GUARD = 1e-9


@dataclass(frozen=True)
class QuadratureConfig:
    """Numeric knobs threaded through every top-level operation."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 200
    mc_samples: int = 20000
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValidationError("max_subdivisions must be >= 1")
        if self.mc_samples < 100:
            raise ValidationError("mc_samples must be >= 100")
        if not (0 <= self.rng_seed < 2**64):
            raise ValidationError("rng_seed must be a 64-bit unsigned integer")

    @classmethod
    def from_env(cls, **overrides) -> "QuadratureConfig":
        """Defaults, then ``CBPLAB_REL_TOL`` / ``CBPLAB_SEED``, then explicit overrides."""
        base = cls()
        env = {}
        if "CBPLAB_REL_TOL" in os.environ:
            env["rel_tol"] = float(os.environ["CBPLAB_REL_TOL"])
        if "CBPLAB_SEED" in os.environ:
            env["rng_seed"] = int(os.environ["CBPLAB_SEED"])
        env.update({k: v for k, v in overrides.items() if v is not None})
        return replace(base, **env)

    def refined(self, factor: float = 0.5) -> "QuadratureConfig":
        return replace(
            self,
            rel_tol=self.rel_tol * factor,
            abs_tol=self.abs_tol * factor,
            max_subdivisions=2 * self.max_subdivisions,
            mc_samples=int(self.mc_samples / factor),
        )


# ---------------------------------------------------------------- special functions


def _nearest_pole(x: float) -> int | None:
    if x > 0.5:
        return None
    k = round(x)
    return k if k <= 0 else None


def gamma_fn(x: float) -> float:
    """Euler's Gamma function; raises near the poles 0, -1, -2, ..."""
    x = float(x)
    k = _nearest_pole(x)
    if k is not None and abs(x - k) < POLE_GUARD:
        raise DomainError(f"gamma_fn: {x!r} is within {POLE_GUARD} of the pole at {k}")
    return float(special.gamma(x))


def rgamma(x: float) -> float:
    """1/Gamma(x), entire; exactly 0 at the poles."""
    return float(special.rgamma(x))


def sphere_surface(m: int) -> float:
    """Total measure of the unit sphere S^{m-1} in R^m."""
    if int(m) != m or m < 1:
        raise DomainError("sphere_surface needs an integer m >= 1")
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


# ---------------------------------------------------------------- quadrature


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadratureConfig | None = None,
    singularity: tuple[float | None, float | None] = (None, None),
    points: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``.

    ``singularity`` gives the power-law exponent of ``f`` at each endpoint
    (``f ~ (x-a)^beta``). Exponents in (-1, 0) are removed by the substitution
    ``x = a + (b-a) u^k`` with ``k = 1/(1+beta)`` before integrating, so the
    integrator never sees the blow-up. ``b`` may be ``inf`` (no hint allowed there).

    Returns ``(value, err)``; raises :class:`PrecisionError` when the estimated
    error exceeds the tolerance after ``max_subdivisions``.
    """
    cfg = cfg or QuadratureConfig()
    beta_a, beta_b = singularity
    for beta in (beta_a, beta_b):
        if beta is not None and beta <= -1:
            raise DomainError(f"endpoint exponent {beta} is not integrable")
    if a == b:
        return 0.0, 0.0

    g = f
    lo, hi = a, b
    pts = list(points) if points else None
    if math.isfinite(b) and beta_a is not None and beta_a < 0 and beta_b is not None and beta_b < 0:
        mid = 0.5 * (a + b)
        v1, e1 = integrate_adaptive(f, a, mid, cfg, (beta_a, None))
        v2, e2 = integrate_adaptive(f, mid, b, cfg, (None, beta_b))
        return v1 + v2, e1 + e2
    if beta_a is not None and beta_a < 0:
        k = 1.0 / (1.0 + beta_a)
        width = b - a

        def g(u, _f=f, _k=k):
            return _f(a + width * u**_k) * width * _k * u ** (_k - 1.0)

        lo, hi = 0.0, 1.0
        pts = [((pt - a) / width) ** (1.0 / k) for pt in pts] if pts else None
    elif beta_b is not None and beta_b < 0:
        k = 1.0 / (1.0 + beta_b)
        width = b - a

        def g(u, _f=f, _k=k):
            x = b - width * u**_k
            if x >= b:  # offset lost to rounding
                x = math.nextafter(b, a)
            return _f(x) * width * _k * u ** (_k - 1.0)

        lo, hi = 0.0, 1.0
        pts = [((b - pt) / width) ** (1.0 / k) for pt in pts] if pts else None

    kwargs = dict(epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions, full_output=1)
    if pts and math.isfinite(hi):
        kwargs["points"] = sorted(p for p in pts if lo < p < hi)
    out = integrate.quad(g, lo, hi, **kwargs)
    value, err = float(out[0]), float(out[1])
    if len(out) > 3 and out[2].get("neval", 0) and err > max(10 * cfg.abs_tol, 10 * cfg.rel_tol * abs(value)):
        raise PrecisionError(
            f"integrate_adaptive did not converge on [{a}, {b}] (err={err:.3g})", partial=value
        )
    return value, err


@lru_cache(maxsize=64)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(a: float, b: float, order: int):
    x, w = _leggauss(int(order))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def graded_gauss_legendre(a: float, b: float, levels: int = 30, order: int = 16, ratio: float = 0.5):
    """Composite Gauss-Legendre rule on [a, b], panels shrinking geometrically toward ``a``."""
    edges = [a + (b - a) * ratio**k for k in range(levels, -1, -1)]
    edges = [a] + edges
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------- roots


def find_root(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-14) -> float:
    """Root of ``g`` in a sign-changing bracket (Brent's method)."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return float(lo)
    if ghi == 0:
        return float(hi)
    if not (np.sign(glo) * np.sign(ghi) < 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: g(lo)={glo:.3g}, g(hi)={ghi:.3g}")
    return float(optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def bisect_bracket(F: Callable[[np.ndarray], np.ndarray], lo, hi, iters: int = 60):
    """Shrink brackets ``[lo, hi]`` of an increasing function by bisection; returns both ends."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = F(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return lo, hi


def bisect_increasing(F: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, iters: int = 60):
    """Vectorized root of an increasing function with F(lo) <= 0 <= F(hi)."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = F(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- Taylor coefficients


def taylor_even_coeffs(
    A: Callable[[float], float],
    order: int,
    h0: float,
    depth: int = 3,
    a0: float | None = None,
    return_error: bool = False,
    sigma: float | None = None,
):
    """Coefficients ``a_j`` of ``A(t) = sum a_j t^(2j) + o(t^(2d))`` for j = 0..order.

    Works in ``s = t^2`` so evenness is exact: at each level a polynomial in
    ``s`` is interpolated through equispaced nodes on ``[0, h]``, and the
    estimates at ``h, h/2, h/4, ...`` are Richardson-extrapolated. ``a_0`` is
    ``A(0)`` exactly. ``h0`` is a step in ``s``.

    If ``sigma`` (the statistical noise of ``A``) is given, a coefficient whose
    noise-induced uncertainty exceeds 10% of its magnitude raises
    :class:`PrecisionError`.
    """
    if not (0 <= order <= 3):
        raise DomainError("taylor_even_coeffs supports order 0..3")
    if h0 <= 0:
        raise DomainError("h0 must be positive")
    base = float(A(0.0)) if a0 is None else float(a0)
    if order == 0:
        return ([base], [0.0]) if return_error else [base]
    m = order + 2
    levels = []
    for k in range(depth + 1):
        h = h0 / 2**k
        s = h * np.arange(1, m + 1) / m
        vals = np.array([float(A(math.sqrt(si))) for si in s])
        y = (vals - base) / s
        # y(s) = a_1 + a_2 s + ... ; fit degree m-1 in the scaled variable s/h
        V = np.vander(s / h, m, increasing=True)
        c = np.linalg.solve(V, y)
        levels.append(np.array([c[j - 1] / h ** (j - 1) for j in range(1, order + 1)]))
    coeffs, errs = [base], [0.0]
    for j in range(1, order + 1):
        col = [lv[j - 1] for lv in levels]
        w = m + 1 - j
        table = col
        for _ in range(depth):
            r = 2.0**w
            table = [(r * table[i + 1] - table[i]) / (r - 1.0) for i in range(len(table) - 1)]
            w += 1
            if len(table) == 1:
                break
        est = table[-1]
        prev = col[-1]
        err = abs(est - prev)
        if sigma is not None:
            noise = sigma * (2**depth * m / h0) ** j * 4.0
            err = max(err, noise)
            if noise > 0.1 * abs(est):
                raise PrecisionError(
                    f"Taylor coefficient a_{j} is noise dominated (noise {noise:.2g}); "
                    "increase mc_samples",
                    partial=est,
                )
        coeffs.append(float(est))
        errs.append(float(err))
    return (coeffs, errs) if return_error else coeffs


# ---------------------------------------------------------------- analytic continuation


def regularized_moment(q: float, T: float, coeffs: Sequence[float], J: int, residual_integral: float = 0.0) -> float:
    """Analytic continuation in q of ``(1/Gamma(-q/2)) * int_0^T t^(-q-1) F(t) dt``.

    ``coeffs[j]`` are the even Taylor coefficients of ``F``; the caller passes
    ``residual_integral = int_0^T t^(-q-1) (F - sum_{j<=J} c_j t^(2j)) dt``.
    The subtracted monomials are integrated in closed form,
    ``int_0^T t^(2j-q-1) dt = T^(2j-q)/(2j-q)``, continued across every
    ``q != 2j``. At an even integer ``q = 2d`` the pole of the ``j = d`` term
    cancels the zero of ``1/Gamma`` and the value is ``(-1)^d d! c_d / 2``.
    """
    d_even = round(q / 2)
    if abs(q - 2 * d_even) < 1e-14 and d_even >= 0:
        if d_even > J:
            raise DomainError(f"q={q} needs Taylor coefficient {d_even}, only {J} available")
        return (-1) ** d_even * math.factorial(d_even) * coeffs[d_even] / 2.0
    total = residual_integral
    for j in range(J + 1):
        total += coeffs[j] * T ** (2 * j - q) / (2 * j - q)
    return rgamma(-q / 2) * total

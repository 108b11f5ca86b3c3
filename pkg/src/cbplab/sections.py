"""Complex hyperplane frames, parallel section functions and section volumes.

The weighted parallel section function of a body ``D`` along ``H = H_xi`` is
``A(u) = int_{D cap (H + u1 e1 + u2 e2)} |x|^{-p} dx`` with ``e1 = xi`` and
``e2 = R_{pi/2} xi``. For R_theta-invariant bodies it is radial in ``u``, so
it is stored as a function of ``t = |u|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import special
from scipy.stats import qmc

from cbplab.bodies import Body, ComplexLp, Dilate, Estimate, ProfileBody, _rng, r_theta_rotate
from cbplab.errors import DomainError, PrecisionError, ValidationError
from cbplab.numerics import (
    QuadratureConfig,
    gauss_legendre,
    integrate_adaptive,
    sphere_surface,
    taylor_even_coeffs,
)


# ---------------------------------------------------------------- frames


@dataclass(frozen=True)
class HyperplaneFrame:
    xi: np.ndarray
    xi_perp: np.ndarray
    basis: np.ndarray  # (2n-2, 2n), rows orthonormal and orthogonal to xi, xi_perp

    @property
    def n(self) -> int:
        return len(self.xi) // 2


def hyperplane_frame(xi) -> HyperplaneFrame:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or len(xi) % 2:
        raise ValidationError("xi must be a vector of even length 2n")
    nrm = np.linalg.norm(xi)
    if nrm < 1e-12:
        raise ValidationError("xi is (numerically) zero")
    if abs(nrm - 1.0) > 1e-12:
        raise ValidationError(f"xi must be a unit vector (|xi| = {nrm!r})")
    perp = r_theta_rotate(xi, math.pi / 2)
    perp[np.abs(perp) < 1e-300] = 0.0
    # the complex hyperplane is spanned by J-pairs; build it from the complex
    # Gram-Schmidt of the coordinate vectors so the basis comes in (w, Jw) pairs
    vecs = [xi, perp]
    dim = len(xi)
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        for v in vecs:
            e -= np.dot(e, v) * v
        nv = np.linalg.norm(e)
        if nv > 1e-8:
            e /= nv
            vecs.append(e)
            je = r_theta_rotate(e, math.pi / 2)
            for v in vecs:
                je -= np.dot(je, v) * v
            vecs.append(je / np.linalg.norm(je))
        if len(vecs) == dim:
            break
    basis = np.array(vecs[2:])
    # one re-orthonormalization pass for roundoff
    q, _ = np.linalg.qr(np.vstack([xi, perp, basis]).T)
    signs = np.sign(np.einsum("ij,ij->j", q, np.vstack([xi, perp, basis]).T))
    q = q * signs
    return HyperplaneFrame(xi.copy(), q[:, 1].copy(), q[:, 2:].T.copy())


def canonical_direction(n: int, psi: float) -> np.ndarray:
    """Unit vector ``(cos psi) e_y + (sin psi) e_z``; ``psi = pi/2`` is the pole."""
    xi = np.zeros(2 * n)
    xi[0] = math.cos(psi)
    xi[2 * n - 2] = math.sin(psi)
    return xi


def pole_direction(n: int) -> np.ndarray:
    return canonical_direction(n, math.pi / 2)


def biaxial_angle(body: Body, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    return math.atan2(np.linalg.norm(xi[body.dim - 2 :]), np.linalg.norm(xi[: body.dim - 2]))


def _is_pole(body: Body, xi) -> bool:
    return isinstance(body, ProfileBody) and (body.radial or abs(biaxial_angle(body, xi) - math.pi / 2) < 1e-14)


def _check_p(n: int, p: float):
    if not p < 2 * n - 2:
        raise DomainError(f"weight exponent p={p} >= 2n-2={2*n-2}: slice weight is not integrable")


# ---------------------------------------------------------------- series helpers


def _binom_tail(a: float, x: np.ndarray, start: int) -> np.ndarray:
    """sum_{k>=start} binom(a, k) x^k for |x| < 1/2."""
    out = np.zeros_like(x)
    coef = 1.0
    for k in range(1, start + 1):
        coef *= (a - k + 1) / k
    term = coef * x**start
    k = start
    while True:
        out += term
        k += 1
        term = term * x * (a - k + 1) / k
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(out), 1e-300)) or k > 200:
            break
    return out


def _pow_minus_taylor(a: float, x, order: int):
    """(1+x)^a - sum_{k<order} binom(a,k) x^k, accurate for small x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    small = np.abs(x) < 0.5
    out = np.empty_like(x)
    if np.any(small):
        out[small] = _binom_tail(a, x[small], order)
    big = ~small
    if np.any(big):
        xb = x[big]
        val = np.expm1(a * np.log1p(xb))
        if order >= 2:
            val = val - a * xb
        out[big] = val
    return out


# ---------------------------------------------------------------- section profiles


def _slice_radial(R, t, p, n):
    """int_0^R (r^2+t^2)^(-p/2) r^(2n-3) dr in closed form."""
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast(R, t).shape)
    R, t = np.broadcast_to(R, out.shape), np.broadcast_to(t, out.shape)
    pos = R > 0
    at0 = pos & (t == 0)
    out[at0] = R[at0] ** (2 * n - 2 - p) / (2 * n - 2 - p)
    gen = pos & (t > 0)
    Rg, tg = R[gen], t[gen]
    rr = Rg * Rg + tg * tg
    w = Rg * Rg / rr
    out[gen] = Rg ** (2 * n - 2) / (2 * n - 2) * rr ** (-p / 2) * special.hyp2f1(p / 2, 1.0, n, w)
    return out


class RadialSectionProfile:
    """``t -> A(t)`` for one body, direction and weight exponent ``p``."""

    backend = "abstract"
    t_max: float
    n: int
    p: float

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        raise NotImplementedError

    def sigma(self, t):
        return 0.0

    def nonanalytic_exponent(self) -> float:
        """Smallest non-even power of t appearing in the expansion of A at 0."""
        return math.inf

    def coeffs(self, order: int, source: str = "closed_form") -> list[float]:
        h0 = 1e-3 * self.t_max**2
        return taylor_even_coeffs(self.value, order, h0)

    def residual(self, t, J: int, coeffs=None):
        c = coeffs if coeffs is not None else self.coeffs(J)
        t = np.asarray(t, dtype=float)
        return self.value(t) - sum(c[j] * t ** (2 * j) for j in range(J + 1))

    def has_accurate_residual(self, J: int) -> bool:
        return False

    def dump(self, path, header: dict, points: int = 201):
        t = np.linspace(0.0, self.t_max, points)
        vals = self.value(t)
        with open(path, "w") as fh:
            for k, v in header.items():
                fh.write(f"# {k}: {v}\n")
            fh.write("# t A(t)\n")
            for ti, ai in zip(t, vals):
                fh.write(f"{ti:.17g} {float(ai):.17g}\n")


class PoleProfile(RadialSectionProfile):
    """Closed-form profile of a biaxial body at its pole direction.

    ``A(t) = |S^{2n-3}| int_0^{f(t)} (r^2+t^2)^{-p/2} r^{2n-3} dr``. Also
    provides the exact origin coefficients ``a_0, a_1`` and a cancellation
    free evaluation of ``A(t) - a_0 - a_1 t^2``.
    """

    backend = "closed_form_biaxial"

    def __init__(self, body: ProfileBody, p: float, cfg: QuadratureConfig | None = None):
        _check_p(body.n, p)
        self.body = body
        self.n = body.n
        self.p = float(p)
        self.cfg = cfg or QuadratureConfig()
        self.lam = body.scale
        self.t_max = body.support * body.scale
        self._S = sphere_surface(2 * self.n - 2)
        self._kappa = 2 * self.n - 2 - self.p
        self._h0 = 1e-3 * body.support**2

    # unit body helpers (t in units of the unscaled body)
    def _unit_value(self, t):
        t = np.asarray(t, dtype=float)
        return self._S * _slice_radial(self.body.profile(t), t, self.p, self.n)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = self.lam**self._kappa * self._unit_value(t / self.lam)
        return out if out.ndim else float(out)

    def nonanalytic_exponent(self) -> float:
        k = self._kappa
        if abs(k - round(k)) < 1e-12 and round(k) % 2 == 0 and self.p <= 0:
            return math.inf
        return k

    def _unit_closed(self) -> list[float]:
        n, p = self.n, self.p
        c = self.body.poly
        e = self.body.exponent
        out = [self._S / (2 * n - 2 - p)]
        if 2 * n - 4 - p > 0:
            out.append(self._S * (c[1] / e - p / (2 * (2 * n - 4 - p))))
        return out

    def coeffs(self, order: int, source: str = "closed_form") -> list[float]:
        if 2 * order >= self.nonanalytic_exponent():
            raise PrecisionError(
                f"A(t) is not C^{2*order} at 0 (non-even term t^{self._kappa:g}); "
                f"order {order} unavailable"
            )
        closed = self._unit_closed()
        if source == "taylor":
            unit = taylor_even_coeffs(self._unit_value, order, self._h0, a0=closed[0])
        elif source == "closed_form":
            unit = list(closed[: order + 1])
            if order >= 2:
                hi = taylor_even_coeffs(lambda t: self._unit_residual(np.array([t]), 1)[0][0], order, self._h0, a0=0.0)
                unit += hi[2 : order + 1]
        else:
            raise ValidationError(f"unknown coefficient source {source!r}")
        return [a * self.lam ** (self._kappa - 2 * j) for j, a in enumerate(unit)]

    def has_accurate_residual(self, J: int) -> bool:
        return J in (0, 1) and (J == 0 or 2 * self.n - 4 - self.p > 0)

    def _chi(self, J):
        a = -self.p / 2
        if J == 0:
            return lambda x: float(np.expm1(a * np.log1p(x)))
        return lambda x: float(_pow_minus_taylor(a, np.array([x]), 2)[0])

    def _T_const(self, J: int, upper: float):
        """int_0^upper v^{m-p} chi_J(1/v^2) dv (the scaled inner piece)."""
        key = (J, upper)
        cache = self.__dict__.setdefault("_tconst", {})
        if key not in cache:
            m, p = 2 * self.n - 3, self.p
            chi = self._chi(J)
            near = min(m, m - p, m - p - 2 * J)
            cache[key] = integrate_adaptive(
                lambda v: v ** (m - p) * chi(1.0 / (v * v)), 0.0, upper, self.cfg.refined(0.01),
                singularity=(near if near < 0 else None, None),
            )
        return cache[key]

    def _T_integral(self, t: float, J: int):
        """int_0^1 r^{m-p} chi_J(t^2/r^2) dr with chi_0 = (1+x)^{-p/2} - 1, chi_1 = chi_0 + p x / 2.

        Below ``r = t sqrt 2`` the substitution ``r = t v`` leaves a constant;
        above it ``x <= 1/2`` and the binomial series is integrated termwise.
        """
        n, p = self.n, self.p
        m = 2 * n - 3
        if p == 0:
            return 0.0, 0.0
        c = t * math.sqrt(2.0)
        if c >= 1.0:
            chi = self._chi(J)
            near = min(m, m - p, m - p - 2 * J)
            return integrate_adaptive(lambda r: r ** (m - p) * chi(t * t / (r * r)), 0.0, 1.0, self.cfg,
                                      singularity=(near if near < 0 else None, None))
        K, Kerr = self._T_const(J, math.sqrt(2.0))
        scale = t ** (m - p + 1)
        a = -p / 2
        k0 = J + 1
        ks = np.arange(k0, k0 + 64)
        coef = np.ones(len(ks))
        b = 1.0
        for j in range(1, k0):
            b *= (a - j + 1) / j
        for i, k in enumerate(ks):
            b *= (a - k + 1) / k
            coef[i] = b
        ek = m - p - 2 * ks + 1
        logc, logt = math.log(c), math.log(t)
        lower = np.exp(2 * ks * logt + ek * logc)  # t^{2k} c^{e_k}, no overflow
        upper = np.exp(2 * ks * logt)
        log_case = np.abs(ek) < 1e-12
        safe = np.where(log_case, 1.0, ek)
        Fk = np.where(log_case, -upper * logc, (upper - lower) / safe)
        series = float(np.sum(coef * Fk))
        return scale * K + series, scale * Kerr

    def _L_integral(self, t: float, one_minus_f: float):
        n, p = self.n, self.p
        m = 2 * n - 3
        out = []
        for order in (64, 48):
            x, w = gauss_legendre(0.0, 1.0, order)
            r = 1.0 - one_minus_f * x
            with np.errstate(divide="ignore"):
                logr = np.log1p(-one_minus_f * x)
                vals = np.expm1(m * logr - (p / 2) * np.log(r * r + t * t))
            out.append(float(one_minus_f * np.dot(w, vals)))
        return out[0], abs(out[0] - out[1])

    def _unit_residual(self, t, J: int):
        """(A - sum_{j<=J} a_j t^{2j}) / 1 on the unit body, plus error estimate."""
        c = self.body.poly
        e = self.body.exponent
        out = np.empty(len(t))
        err = np.zeros(len(t))
        closed = self._unit_closed()
        for i, ti in enumerate(t):
            ti = float(ti)
            s = ti * ti
            if ti >= self.body.support:
                out[i] = -sum(closed[j] * s**j for j in range(J + 1))
                continue
            if ti == 0.0:
                out[i] = 0.0
                continue
            wv = -sum(ck * s**k for k, ck in enumerate(c) if k >= 1)  # 1 - P(s)
            one_minus_f = float(-np.expm1(np.log1p(-wv) / e))
            T, terr = self._T_integral(ti, J)
            L, lerr = self._L_integral(ti, one_minus_f)
            if J == 0:
                val = T - one_minus_f - L
            else:
                psi_e = float(_pow_minus_taylor(1.0 / e, np.array([-wv]), 2)[0])
                # 1-f - (-c1/e) s = -(sum_{k>=2} c_k s^k)/e - psi_e(w)
                delta = -sum(ck * s**k for k, ck in enumerate(c) if k >= 2) / e - psi_e
                val = T - delta - L
            out[i] = self._S * val
            err[i] = self._S * (terr + lerr)
        return out, err

    def residual(self, t, J: int, coeffs=None):
        """A(t) - sum_{j<=J} a_j t^{2j}; cancellation free for J in {0, 1} with exact a_j."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.has_accurate_residual(J):
            vals, _ = self._unit_residual(t / self.lam, J)
            vals = self.lam**self._kappa * vals
            if coeffs is not None:
                exact = self.coeffs(J)
                vals = vals + sum((exact[j] - coeffs[j]) * t ** (2 * j) for j in range(J + 1))
        else:
            c = coeffs if coeffs is not None else self.coeffs(J)
            vals = self.value(t) - sum(c[j] * t ** (2 * j) for j in range(J + 1))
        return float(vals[0]) if scalar else vals


class RadialBallProfile(PoleProfile):
    """Ball profiles are the same in every direction."""


class MonteCarloProfile(RadialSectionProfile):
    """Profile from :func:`a_function_mc` on a fixed t-grid with cubic interpolation."""

    backend = "monte_carlo"

    def __init__(self, body: Body, frame: HyperplaneFrame, p: float, cfg: QuadratureConfig, t_grid):
        from scipy.interpolate import CubicSpline

        self.body, self.frame, self.p, self.cfg = body, frame, float(p), cfg
        self.n = body.n
        self.t_grid = np.asarray(t_grid, dtype=float)
        est = [a_function_mc(body, frame, p, ti, cfg, index=i) for i, ti in enumerate(self.t_grid)]
        self.values = np.array([e.value for e in est])
        self.sigmas = np.array([e.err for e in est])
        nz = np.nonzero(self.values > 0)[0]
        self.t_max = float(self.t_grid[nz[-1] + 1]) if len(nz) and nz[-1] + 1 < len(self.t_grid) else float(self.t_grid[-1])
        self._spline = CubicSpline(self.t_grid, self.values)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t > self.t_max, 0.0, self._spline(np.minimum(t, self.t_grid[-1])))
        return out if out.ndim else float(out)

    def sigma(self, t):
        return float(np.interp(t, self.t_grid, self.sigmas))


class LpAxisProfile(RadialSectionProfile):
    """Profile of a complex l_r ball along a coordinate complex line.

    The slice at distance ``t`` is ``(1 - t^r)^(1/r)`` times the l_r ball of
    the remaining coordinates, so ``A(t) = int_S G(R(w) g(t), t) dw`` with
    ``R(w) = 1/||w||`` and ``G(R, t) = int_0^R (r^2+t^2)^(-p/2) r^(2n-3) dr``.
    The sphere integral uses fixed randomized Sobol blocks; the same nodes are
    used for every ``t``.
    """

    backend = "lp_axis_qmc"

    def __init__(self, body: Body, xi, p: float, cfg: QuadratureConfig | None = None):
        cfg = cfg or QuadratureConfig()
        inner, lam = (body.inner, body.lam) if isinstance(body, Dilate) else (body, 1.0)
        if not isinstance(inner, ComplexLp):
            raise DomainError("LpAxisProfile needs a complex_lp body")
        _check_p(inner.n, p)
        xi = np.asarray(xi, dtype=float)
        pairs = np.hypot(xi[0::2], xi[1::2])
        k = int(np.argmax(pairs))
        if abs(pairs[k] - 1.0) > 1e-12:
            raise DomainError("direction is not along a coordinate complex line")
        self.body, self.n, self.p, self.lam = body, inner.n, float(p), lam
        self.r = inner.r
        self.t_max = lam
        self._kappa = 2 * self.n - 2 - self.p
        rule = HyperplaneRule(inner, xi, cfg)
        self._rule = rule
        self._R = 1.0 / rule.tilted_norms(0.0)[0]

    def _unit_blocks(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = np.where(t < 1, np.maximum(1 - np.minimum(t, 1) ** self.r, 0.0) ** (1 / self.r), 0.0)
        G = _slice_radial(self._R[None, :] * g[:, None], t[:, None], self.p, self.n)
        return self._rule.block_sums(G)

    def value(self, t):
        scalar = np.ndim(t) == 0
        t = np.asarray(t, dtype=float)
        out = self.lam**self._kappa * self._unit_blocks(np.atleast_1d(t) / self.lam).mean(axis=-1)
        return float(out[0]) if scalar else out

    def sigma(self, t):
        b = self.lam**self._kappa * self._unit_blocks(np.atleast_1d(t) / self.lam)
        return float(b.std(axis=-1, ddof=1)[0] / math.sqrt(b.shape[-1]))

    def nonanalytic_exponent(self) -> float:
        k = self._kappa
        terms = []
        if not (self.p <= 0 and abs(k - round(k)) < 1e-12 and round(k) % 2 == 0):
            terms.append(k)
        if not (abs(self.r - round(self.r)) < 1e-12 and round(self.r) % 2 == 0):
            terms.append(self.r)
        return min(terms, default=math.inf)

    def coeffs(self, order: int, source: str = "closed_form") -> list[float]:
        if 2 * order >= self.nonanalytic_exponent():
            raise PrecisionError(f"A(t) is not C^{2*order} at 0; order {order} unavailable")
        if source == "taylor" or order > 1:
            return super().coeffs(order)
        n, p, k = self.n, self.p, self._kappa
        w = self._rule.weights
        out = [float(np.dot(w, self._R**k)) / k]
        if order == 1:
            a1 = -(p / 2) * float(np.dot(w, self._R ** (k - 2))) / (k - 2) if p != 0 else 0.0
            if self.r == 2:
                a1 -= 0.5 * float(np.dot(w, self._R**k))
            out.append(a1)
        return [a * self.lam ** (k - 2 * j) for j, a in enumerate(out)]


def section_profile(body: Body, xi, p: float, cfg: QuadratureConfig | None = None) -> RadialSectionProfile:
    """Closed-form profile when the direction allows it."""
    cfg = cfg or QuadratureConfig()
    if _is_pole(body, xi):
        return PoleProfile(body, p, cfg)
    inner = body.inner if isinstance(body, Dilate) else body
    if isinstance(inner, ComplexLp):
        return LpAxisProfile(body, xi, p, cfg)
    raise DomainError("deterministic section profiles exist only at the pole of biaxial bodies "
                      "and along coordinate lines of complex_lp bodies")


def a_function_pole(body: ProfileBody, p: float, t: float, cfg: QuadratureConfig | None = None) -> float:
    """A(t) at the pole direction of a biaxial body (0 beyond the support)."""
    if not isinstance(body, ProfileBody):
        raise DomainError("a_function_pole needs a biaxial (profile) body")
    if t < 0:
        raise DomainError("t must be nonnegative")
    return float(PoleProfile(body, p, cfg).value(t))


def a_function_pole_quad(body: ProfileBody, p: float, t: float, cfg: QuadratureConfig | None = None) -> float:
    """Same as :func:`a_function_pole` by direct 1-D quadrature (independent check)."""
    _check_p(body.n, p)
    cfg = cfg or QuadratureConfig()
    lam = body.scale
    f = lam * float(body.profile(t / lam))
    if f <= 0:
        return 0.0
    m = 2 * body.n - 3
    beta = m - p if t == 0 else None
    val, _ = integrate_adaptive(lambda r: (r * r + t * t) ** (-p / 2) * r**m, 0.0, f, cfg, singularity=(beta, None))
    return sphere_surface(2 * body.n - 2) * val


def a_function_mc(
    body: Body,
    frame: HyperplaneFrame,
    p: float,
    t: float,
    cfg: QuadratureConfig | None = None,
    index: int = 0,
    angle: float = 0.0,
) -> Estimate:
    """Monte Carlo slice integral at ``u = t (cos angle, sin angle)``.

    Directions are uniform on the unit sphere of ``H``; radii are drawn with
    density proportional to ``r^(2n-3-max(p,0))`` on ``[0, r_max]`` and
    rejected outside the body. The stream is seeded from
    ``(cfg.rng_seed, index)`` only.
    """
    cfg = cfg or QuadratureConfig()
    _check_p(body.n, p)
    n = body.n
    k = 2 * n - 2 - max(p, 0.0)
    Rb = body.r_max
    rng = _rng(cfg.rng_seed, 10, index)
    M = cfg.mc_samples
    g = rng.standard_normal((M, 2 * n - 2))
    omega = g / np.linalg.norm(g, axis=1, keepdims=True)
    r = Rb * rng.random(M) ** (1.0 / k)
    center = t * (math.cos(angle) * frame.xi + math.sin(angle) * frame.xi_perp)
    x = center + (r[:, None] * omega) @ frame.basis
    inside = body.norm(x) <= 1.0
    vals = np.where(inside, (t * t + r * r) ** (-p / 2) * r ** max(p, 0.0), 0.0)
    const = sphere_surface(2 * n - 2) * Rb**k / k
    mean = float(vals.mean())
    sigma = float(vals.std(ddof=1) / math.sqrt(M))
    warns = ()
    if sigma > cfg.rel_tol * max(abs(mean), 1e-300):
        warns = (f"MC relative standard error {sigma/max(mean,1e-300):.2e} above tolerance",)
    return Estimate(const * mean, const * sigma, "slice_mc", warns)


# ---------------------------------------------------------------- sphere of the hyperplane


class HyperplaneRule:
    """Cubature for integrals over the unit sphere of ``H_xi``.

    ``tilted_norms(s)`` returns ``||sqrt(1-s^2) w + s xi||`` at the nodes
    ``w``; ``weights`` integrate against the surface measure of ``S^{2n-3}``.
    Biaxial bodies use an exact symmetry reduction to a disk (Gauss-Legendre
    in the radius, trapezoid in the angle); other bodies use randomized
    Sobol points, one block per replication.
    """

    def __init__(self, body: Body, xi, cfg: QuadratureConfig | None = None, resolution: int = 1):
        cfg = cfg or QuadratureConfig()
        self.body = body
        self.xi = np.asarray(xi, dtype=float)
        self.n = body.n
        inner, self.lam = body, 1.0
        if isinstance(body, Dilate):
            inner, self.lam = body.inner, body.lam
        self.inner = inner
        S = sphere_surface(2 * self.n - 2)
        if isinstance(inner, ProfileBody) and self.n >= 3:
            self.kind = "disk"
            self.psi = biaxial_angle(inner, xi)
            n_sigma, n_chi = int(round(96 * resolution)), int(round(128 * resolution))
            sig, ws = gauss_legendre(0.0, 1.0, n_sigma)
            chi = 2 * math.pi * np.arange(n_chi) / n_chi
            dens = sig * (1 - sig * sig) ** (self.n - 3)
            norm_c = S * (self.n - 2) / math.pi
            self._sig = np.repeat(sig, n_chi)
            self._chi = np.tile(chi, n_sigma)
            self.weights = np.repeat(norm_c * ws * dens, n_chi) * (2 * math.pi / n_chi)
            self.blocks = 1
        else:
            self.kind = "qmc"
            frame = hyperplane_frame(self.xi)
            self._basis = frame.basis
            self.blocks = 8
            m = 11 + resolution
            pts = []
            for b in range(self.blocks):
                sob = qmc.Sobol(d=2 * self.n - 2, scramble=True, seed=_rng(cfg.rng_seed, 20, b))
                u = sob.random_base2(m)
                u = np.clip(u, 1e-12, 1 - 1e-12)
                gz = special.ndtri(u)
                pts.append(gz / np.linalg.norm(gz, axis=1, keepdims=True))
            self._w = np.concatenate(pts) @ self._basis
            M = 2**m
            self.weights = np.full(self.blocks * M, S / M)

    @property
    def size(self) -> int:
        return len(self.weights)

    def tilted_norms(self, s) -> np.ndarray:
        """Array ``(len(s), size)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
        c = np.sqrt(1.0 - s * s)
        if self.kind == "disk":
            cp, sp = math.cos(self.psi), math.sin(self.psi)
            sc, ss = self._sig * np.cos(self._chi), self._sig * np.sin(self._chi)
            ry2 = c * c * (1 - self._sig**2) + (s * cp - c * sp * sc) ** 2 + (c * sp * ss) ** 2
            rz = np.hypot(s * sp + c * cp * sc, c * cp * ss)
            out = self.inner.norm_yz(np.sqrt(np.maximum(ry2, 0.0)), rz)
        else:
            x = c[:, :, None] * self._w[None, :, :] + s[:, :, None] * self.xi[None, None, :]
            out = self.inner.norm(x)
        return out / self.lam

    def block_sums(self, values: np.ndarray) -> np.ndarray:
        """Per-replication integrals of ``values`` (shape ``(..., size)``)."""
        w = values * self.weights
        return w.reshape(*w.shape[:-1], self.blocks, -1).sum(axis=-1)


def hyperplane_average(body: Body, xi, fn: Callable[[np.ndarray], np.ndarray], cfg=None) -> Estimate:
    rule = HyperplaneRule(body, xi, cfg)
    vals = fn(rule.tilted_norms(0.0)[0])
    blocks = rule.block_sums(vals)
    if rule.blocks > 1:
        return Estimate(float(blocks.mean()), float(blocks.std(ddof=1) / math.sqrt(rule.blocks)), "qmc")
    coarse = HyperplaneRule(body, xi, cfg, resolution=2)
    fine = float(coarse.block_sums(fn(coarse.tilted_norms(0.0)[0]))[0])
    return Estimate(fine, abs(fine - float(blocks[0])), "disk")


def section_volume(body: Body, xi, cfg: QuadratureConfig | None = None, route: str = "direct") -> Estimate:
    """Vol_{2n-2}(body cap H_xi)."""
    cfg = cfg or QuadratureConfig()
    xi = np.asarray(xi, dtype=float)
    if route == "ft":
        from cbplab.fractional import ft_weighted_norm

        ft = ft_weighted_norm(body, xi, 0.0, 0.0, cfg)
        c = 1.0 / (4 * math.pi * (body.n - 1))
        return Estimate(c * ft.value, c * ft.error, f"ft:{ft.route}")
    if route != "direct":
        raise ValidationError(f"unknown route {route!r}")
    if _is_pole(body, xi):
        return Estimate(PoleProfile(body, 0.0, cfg).value(0.0), 0.0, "closed_form")
    k = 2 * body.n - 2
    est = hyperplane_average(body, xi, lambda nr: nr ** (-k) / k, cfg)
    return Estimate(est.value, est.err, est.method)


def sphere_average_biaxial(F: Callable[[float], float], n: int, cfg: QuadratureConfig | None = None, with_error=False):
    """Integral over S^{2n-1} of a function of the biaxial angle psi.

    Uses ``theta = (cos psi) w + (sin psi) omega`` with ``w`` on the unit sphere
    of the first ``2n-2`` coordinates and ``omega`` on the last circle, so
    ``d theta = |S^{2n-3}| |S^1| cos^{2n-3} psi sin psi d psi``, psi in [0, pi/2].
    """
    cfg = cfg or QuadratureConfig()
    const = sphere_surface(2 * n - 2) * 2 * math.pi
    val, err = integrate_adaptive(lambda psi: F(psi) * math.cos(psi) ** (2 * n - 3) * math.sin(psi), 0.0, math.pi / 2, cfg)
    return (const * val, const * err) if with_error else const * val


def sphere_average_biaxial_fixed(values: np.ndarray, psi: np.ndarray, weights: np.ndarray, n: int) -> float:
    const = sphere_surface(2 * n - 2) * 2 * math.pi
    return const * float(np.sum(values * weights * np.cos(psi) ** (2 * n - 3) * np.sin(psi)))

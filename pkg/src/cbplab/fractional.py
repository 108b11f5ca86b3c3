"""Regularized fractional actions and Fourier transforms of weighted norm powers.

For a radial profile ``A`` of ``t = |u|`` on ``R^2`` the action
``<|u|^{-q-2}/Gamma(-q/2), A>`` equals ``2 pi`` times the analytic
continuation in ``q`` of ``(1/Gamma(-q/2)) int_0^inf t^{-q-1} A(t) dt``.
The Fourier transform of ``|x|^{-p} ||x||^{-(2n-q-p-2)}`` at ``xi`` is
``2^{q+1} Gamma((q+2)/2) (2n-q-p-2)`` times that action on the parallel
section function of weight ``p``.

Three routes are available:

``closed_form``
    radial bodies, classical formula for the transform of ``|x|^{-g}``.
``a_route``
    the section-profile formula above (pole of biaxial bodies).
``sphere_route``
    for any direction: writing ``x = sqrt(1-s^2) w + s xi`` with ``w`` on the
    unit sphere of ``H_xi`` gives the transform as
    ``2^{q+1} Gamma((q+2)/2) RM_q[H]`` with
    ``H(s) = 2 pi (1-s^2)^{n-2} int ||sqrt(1-s^2) w + s xi||^{-gamma} dw``,
    smooth and even in ``s`` on ``[0, 1]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cbplab.bodies import Body, Dilate, EuclideanBall, ProfileBody
from cbplab.errors import DomainError, PrecisionError, ValidationError
from cbplab.numerics import (
    QuadratureConfig,
    gamma_fn,
    gauss_legendre,
    graded_gauss_legendre,
    integrate_adaptive,
    regularized_moment,
    rgamma,
    taylor_even_coeffs,
)
from cbplab.sections import (
    HyperplaneRule,
    PoleProfile,
    RadialSectionProfile,
    _is_pole,
    canonical_direction,
    section_profile,
    sphere_average_biaxial_fixed,
)

MAX_WINDOW = 2


# ---------------------------------------------------------------- queries


def window_of(q: float) -> str:
    if q < 0:
        return "neg"
    d = round(q / 2)
    if abs(q - 2 * d) < 1e-14:
        return f"even_integer({d})"
    return f"window({math.floor(q / 2)})"


@dataclass(frozen=True)
class FracQuery:
    n: int
    q: float
    p: float = 0.0

    def __post_init__(self):
        n, q, p = self.n, self.q, self.p
        if not (-2 < q < 2 * n - 2):
            raise DomainError(f"q={q} outside (-2, {2*n-2})")
        if not p < 2 * n - 2:
            raise DomainError(f"p={p} >= 2n-2: slice weight not integrable")
        if not self.gamma > 0:
            raise DomainError(f"2n-q-p-2 = {self.gamma} must be positive")
        if q > 2 * MAX_WINDOW + 2:
            raise DomainError(f"q={q}: windows beyond ({2*MAX_WINDOW}, {2*MAX_WINDOW+2}) are not supported")

    @property
    def window(self) -> str:
        return window_of(self.q)

    @property
    def gamma(self) -> float:
        return 2 * self.n - self.q - self.p - 2


@dataclass(frozen=True)
class FtValue:
    value: float
    route: str
    error: float = 0.0
    warnings: tuple = field(default=())

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise PrecisionError(f"non-finite transform value on route {self.route}")


def subtraction_order(q: float, kappa: float = math.inf) -> int:
    """Number of Taylor terms subtracted: ``J`` with the integrand ``t^{2J+1-q}`` integrable at 0.

    Near the upper edge of a window one more term is subtracted (when the
    profile has it) so the integrand does not approach ``t^{-1}``.
    """
    if q < 0:
        d = -1
    else:
        d = math.ceil(q / 2) - 1
        if abs(q - 2 * round(q / 2)) < 1e-14:
            d = round(q / 2)
            return d
    if 2 * (d + 1) - q < 0.5 and 2 * (d + 1) < kappa:
        return d + 1
    return d


# ---------------------------------------------------------------- A-route


def frac_action_estimate(profile: RadialSectionProfile, q: float, cfg: QuadratureConfig | None = None):
    """``(value, err)`` of ``<|u|^{-q-2}/Gamma(-q/2), A>``."""
    cfg = cfg or QuadratureConfig()
    n = profile.n
    if not (-2 < q < 2 * n - 2):
        raise DomainError(f"q={q} outside (-2, {2*n-2})")
    kappa = profile.nonanalytic_exponent()
    if q >= kappa:
        raise DomainError(f"q={q} >= {kappa}: the action is not defined by even Taylor subtraction")
    J = subtraction_order(q, kappa)
    if J > MAX_WINDOW + 1:
        raise DomainError(f"q={q} needs {J} Taylor terms; not supported")
    if J < 0:
        coeffs = []
    else:
        coeffs = profile.coeffs(J)
    d_even = round(q / 2)
    if abs(q - 2 * d_even) < 1e-14:
        val = regularized_moment(q, profile.t_max, coeffs, J)
        return 2 * math.pi * val, 0.0
    T = profile.t_max
    resid_int, err = _residual_integral(profile, q, J, coeffs, kappa, cfg)
    val = regularized_moment(q, T, coeffs, J, resid_int)
    return 2 * math.pi * val, 2 * math.pi * abs(rgamma(-q / 2)) * err


def _residual_integral(profile, q, J, coeffs, kappa, cfg):
    T = profile.t_max
    beta = min(2 * J + 2, kappa) - q - 1
    hint = beta if beta < 0 else None
    if J < 0:
        def g(t):
            return t ** (-q - 1) * float(profile.value(t))
        return integrate_adaptive(g, 0.0, T, cfg, singularity=(hint, None))
    if profile.has_accurate_residual(J):
        def g(t):
            return t ** (-q - 1) * profile.residual(t, J)
        return integrate_adaptive(g, 0.0, T, cfg, singularity=(hint, None))
    # generic: accurate residual of a lower order (or plain subtraction) above t_cut,
    # next Taylor terms in closed form below it
    base = 1 if profile.has_accurate_residual(1) else (0 if profile.has_accurate_residual(0) else -1)
    base = min(base, J)

    def g(t):
        if base >= 0:
            r = profile.residual(t, base)
        else:
            r = float(profile.value(t)) - coeffs[0]
        start = base + 1 if base >= 0 else 1
        r -= sum(coeffs[j] * t ** (2 * j) for j in range(start, J + 1))
        return t ** (-q - 1) * r

    t_cut = 0.05 * T
    v, e = integrate_adaptive(g, t_cut, T, cfg)
    small = 0.0
    extra = J + 1
    if 2 * extra < kappa and extra <= 3:
        try:
            c_more = profile.coeffs(extra)
            small = c_more[extra] * t_cut ** (2 * extra - q) / (2 * extra - q)
        except PrecisionError:
            small = 0.0
    e += abs(small)
    return v + small, e


def frac_action(profile: RadialSectionProfile, q: float, cfg: QuadratureConfig | None = None) -> float:
    """Regularized action of the radial distribution ``|u|^{-q-2}/Gamma(-q/2)`` on ``A``."""
    return frac_action_estimate(profile, q, cfg)[0]


# ---------------------------------------------------------------- closed form


def ft_prefactor(n: int, p: float, q: float) -> float:
    return 2 ** (q + 1) * gamma_fn((q + 2) / 2) * (2 * n - q - p - 2)


def radial_power_ft(n: int, g: float) -> float:
    """``(|x|^{-g})^(xi) = c |xi|^{g-2n}`` on R^{2n}; returns ``c`` (0 < g < 2n)."""
    if not (0 < g < 2 * n):
        raise DomainError(f"|x|^-{g} is not locally integrable with a homogeneous transform on R^{2*n}")
    return 2 ** (2 * n - g) * math.pi**n * gamma_fn((2 * n - g) / 2) / gamma_fn(g / 2)


def _ball_radius(body: Body):
    if isinstance(body, ProfileBody) and "radial" in body.tags:
        return body.scale
    if isinstance(body, Dilate):
        r = _ball_radius(body.inner)
        return None if r is None else r * body.lam
    return None


# ---------------------------------------------------------------- sphere route


class SphereRoute:
    """Cached tilted norms for one (body, direction); evaluates transforms for many (p, q)."""

    def __init__(self, body: Body, xi, cfg: QuadratureConfig | None = None):
        self.cfg = cfg or QuadratureConfig()
        self.body = body
        self.xi = np.asarray(xi, dtype=float)
        self.n = body.n
        scale = max(min(body.r_min / body.r_max, 1.0), 1e-3)
        self.s_cut = 0.02 * scale
        self.h0 = (0.05 * scale) ** 2
        self.depth = 3
        self.scale = scale
        self.rules = [HyperplaneRule(body, xi, self.cfg, resolution=r) for r in self._resolutions()]
        self.s_nodes, self.s_weights = graded_gauss_legendre(self.s_cut, 1.0, levels=int(math.ceil(math.log2(1 / self.s_cut))) + 1, order=16)
        self.s_nodes[-1] = min(self.s_nodes[-1], 1.0)
        self._tables = [self._norm_table(rule, self.s_nodes) for rule in self.rules]
        self._extra = [dict() for _ in self.rules]

    def _resolutions(self):
        inner = self.body.inner if isinstance(self.body, Dilate) else self.body
        if isinstance(inner, ProfileBody) and self.n >= 3:
            # thinner bodies need more disk nodes
            res = min(2.0, max(0.5, 0.1 / self.scale))
            return (res, res / 2)
        return (1,)

    @staticmethod
    def _norm_table(rule, s):
        rows = []
        for chunk in np.array_split(np.asarray(s), max(1, len(s) // 8)):
            rows.append(rule.tilted_norms(chunk))
        return np.vstack(rows)

    def _row(self, k, s):
        cache = self._extra[k]
        key = float(s)
        if key not in cache:
            cache[key] = self.rules[k].tilted_norms(np.array([key]))[0]
        return cache[key]

    def _H(self, k, norms_rows, s, gam):
        """Block values of H at the given s (rows of tilted norms)."""
        s = np.asarray(s, dtype=float)
        fac = 2 * math.pi * np.maximum(1 - s * s, 0.0) ** (self.n - 2)
        return fac[:, None] * self.rules[k].block_sums(norms_rows ** (-gam))

    def _ft_one(self, k, p, q):
        n = self.n
        gam = 2 * n - q - p - 2
        J = subtraction_order(q)
        Jt = min(3, J + 3)
        rule = self.rules[k]
        H_grid = self._H(k, self._tables[k], self.s_nodes, gam)  # (n_s, blocks)
        results = []
        for b in range(rule.blocks):
            def Hs(t, _b=b):
                if t == 0.0:
                    row = self._row(k, 0.0)
                else:
                    row = self._row(k, t)
                return float(self._H(k, row[None, :], np.array([t]), gam)[0, _b])

            coeffs, cerr = taylor_even_coeffs(Hs, Jt, self.h0, depth=self.depth, return_error=True)
            d_even = round(q / 2)
            if abs(q - 2 * d_even) < 1e-14:
                rm = (-1) ** d_even * math.factorial(d_even) * coeffs[d_even] / 2.0
                err = math.factorial(d_even) * cerr[d_even] / 2.0
            else:
                s = self.s_nodes
                poly = sum(coeffs[j] * s ** (2 * j) for j in range(J + 1)) if J >= 0 else 0.0
                body_int = float(np.sum(self.s_weights * s ** (-q - 1) * (H_grid[:, b] - poly)))
                head = sum(coeffs[j] * self.s_cut ** (2 * j - q) / (2 * j - q) for j in range(J + 1, Jt + 1))
                tail = sum(coeffs[j] / (2 * j - q) for j in range(J + 1))
                rg = rgamma(-q / 2)
                rm = rg * (body_int + head + tail)
                last = abs(coeffs[Jt] * self.s_cut ** (2 * Jt - q) / (2 * Jt - q))
                cpart = sum(cerr[j] * abs(1.0 / (2 * j - q) - self.s_cut ** (2 * j - q) / (2 * j - q)) for j in range(J + 1))
                cpart += sum(cerr[j] * self.s_cut ** (2 * j - q) / abs(2 * j - q) for j in range(J + 1, Jt + 1))
                err = abs(rg) * (last + cpart)
            pref = 2 ** (q + 1) * gamma_fn((q + 2) / 2)
            results.append((pref * rm, pref * err))
        return results

    def ft(self, p: float, q: float) -> FtValue:
        FracQuery(self.n, q, p)
        fine = self._ft_one(0, p, q)
        vals = np.array([v for v, _ in fine])
        terr = max(e for _, e in fine)
        value = float(vals.mean())
        if len(vals) > 1:
            err = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        else:
            coarse = self._ft_one(1, p, q)[0][0]
            err = abs(value - coarse)
        return FtValue(value, "sphere_route", err + terr)


_SPHERE_CACHE: dict = {}


def sphere_route(body: Body, xi, cfg: QuadratureConfig | None = None) -> SphereRoute:
    cfg = cfg or QuadratureConfig()
    key = (body.hash, tuple(np.round(np.asarray(xi, dtype=float), 15)), cfg.rng_seed)
    route = _SPHERE_CACHE.get(key)
    if route is None:
        if len(_SPHERE_CACHE) > 64:
            _SPHERE_CACHE.clear()
        route = _SPHERE_CACHE[key] = SphereRoute(body, xi, cfg)
    return route


# ---------------------------------------------------------------- transforms


def ft_weighted_norm(body: Body, xi, p: float, q: float, cfg: QuadratureConfig | None = None, route: str | None = None) -> FtValue:
    """``(|x|^{-p} ||x||^{-(2n-q-p-2)})^(xi)`` for an R_theta-invariant body."""
    cfg = cfg or QuadratureConfig()
    if "r_theta_invariant" not in body.tags:
        raise DomainError("body is not R_theta-invariant")
    fq = FracQuery(body.n, q, p)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (body.dim,) or abs(np.linalg.norm(xi) - 1) > 1e-12:
        raise ValidationError("xi must be a unit vector in R^{2n}")
    radius = _ball_radius(body)
    if route is None:
        if radius is not None:
            route = "closed_form"
        elif _is_pole(body, xi):
            route = "a_route"
        else:
            route = "sphere_route"
    if route == "closed_form":
        if radius is None:
            raise DomainError("closed_form route needs a Euclidean ball")
        val = radius**fq.gamma * radial_power_ft(body.n, 2 * body.n - q - 2)
        return FtValue(val, "closed_form", 0.0)
    if route == "a_route":
        profile = section_profile(body, xi, p, cfg)
        fa, err = frac_action_estimate(profile, q, cfg)
        c = ft_prefactor(body.n, p, q)
        return FtValue(c * fa, "a_route", abs(c) * err)
    if route == "sphere_route":
        return sphere_route(body, xi, cfg).ft(p, q)
    raise ValidationError(f"unknown route {route!r}")


def frac_laplace_section(body: Body, xi, alpha: float, cfg: QuadratureConfig | None = None, route: str | None = None) -> FtValue:
    """``(-Delta)^{alpha/2} S(xi)`` of the (-2)-homogeneous extension of the section function."""
    n = body.n
    if not (-2 < alpha < 2 * n - 2):
        raise DomainError(f"alpha={alpha} outside (-2, {2*n-2})")
    ft = ft_weighted_norm(body, xi, -alpha, alpha, cfg, route)
    c = 1.0 / (4 * math.pi * (n - 1))
    return FtValue(c * ft.value, ft.route, c * ft.error, ft.warnings)


def _map_ordered(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def posdef_scan(body: Body, p: float, q: float, psi_grid, cfg: QuadratureConfig | None = None, threads: int = 1) -> dict:
    """Transform values along ``xi(psi) = cos(psi) e_1 + sin(psi) e_{2n-1}``."""
    cfg = cfg or QuadratureConfig()
    FracQuery(body.n, q, p)
    psi = [float(x) for x in psi_grid]
    if not psi:
        raise ValidationError("empty psi grid")
    vals = _map_ordered(lambda ps: ft_weighted_norm(body, canonical_direction(body.n, ps), p, q, cfg), psi, threads)
    v = np.array([x.value for x in vals])
    i = int(np.argmin(v))
    return {
        "body": body.hash,
        "p": p,
        "q": q,
        "psi": psi,
        "values": v.tolist(),
        "errors": [x.error for x in vals],
        "routes": [x.route for x in vals],
        "min": float(v[i]),
        "argmin_psi": psi[i],
        "min_error": vals[i].error,
    }


def brunn_report(body: Body, xi, p: float, q: float, samples: int = 100, cfg: QuadratureConfig | None = None) -> dict:
    """Checks that the section function peaks at the origin and the q-action is nonnegative."""
    cfg = cfg or QuadratureConfig()
    if not (0 < q < 2):
        raise DomainError("brunn_report needs q in (0, 2)")
    profile = section_profile(body, xi, p, cfg)
    t = np.linspace(0.0, profile.t_max, samples)
    A = np.asarray(profile.value(t), dtype=float)
    A0 = float(A[0])
    a1 = profile.coeffs(1)[1]
    if profile.has_accurate_residual(1) or profile.has_accurate_residual(0):
        fa, fa_err = frac_action_estimate(profile, q, cfg)
        fa_route = "a_route"
    else:
        ft = ft_weighted_norm(body, xi, p, q, cfg, route="sphere_route")
        c = ft_prefactor(body.n, p, q)
        fa, fa_err = ft.value / c, ft.error / c
        fa_route = "sphere_route"
    excess = A - A0
    return {
        "body": body.hash,
        "p": p,
        "q": q,
        "backend": profile.backend,
        "samples": samples,
        "A0": A0,
        "max_excess": float(excess.max()),
        "max_relative_excess": float(excess.max() / abs(A0)) if A0 else float(excess.max()),
        "brunn_ok": bool(np.all(A <= A0 * (1 + 1e-8))),
        "a1": a1,
        "laplacian_at_origin": 4 * a1,
        "a1_nonpositive": bool(a1 <= 0),
        "frac_action": fa,
        "frac_action_error": fa_err,
        "frac_action_route": fa_route,
        "frac_action_nonnegative": bool(fa >= -fa_err),
    }


# ---------------------------------------------------------------- Parseval


def _ft_on_psi(body: Body, p: float, q: float, psi: np.ndarray, cfg, threads=1):
    vals = _map_ordered(lambda ps: ft_weighted_norm(body, canonical_direction(body.n, ps), p, q, cfg), list(psi), threads)
    return np.array([v.value for v in vals]), np.array([v.error for v in vals])


def parseval_residual(K: Body, L: Body, p: float, cfg: QuadratureConfig | None = None, psi_order: int = 32, threads: int = 1) -> dict:
    """Both sides of ``int (||x||_K^{-p})^ (||x||_L^{-2n+p})^ = (2 pi)^{2n} int ||x||_K^{-p} ||x||_L^{-2n+p}``."""
    cfg = cfg or QuadratureConfig()
    n = K.n
    if L.n != n:
        raise ValidationError("bodies live in different dimensions")
    if not (0 < p < 2 * n):
        raise DomainError(f"p={p} outside (0, {2*n})")
    for b in (K, L):
        if not (isinstance(b, ProfileBody) or (isinstance(b, Dilate) and isinstance(b.inner, ProfileBody))):
            raise DomainError("parseval_residual uses the biaxial angle grid; bodies must be biaxial")
    qK, qL = 2 * n - p - 2, p - 2

    def sides(order):
        psi, w = gauss_legendre(0.0, math.pi / 2, order)
        fK, eK = _ft_on_psi(K, 0.0, qK, psi, cfg, threads)
        fL, eL = _ft_on_psi(L, 0.0, qL, psi, cfg, threads)
        lhs = sphere_average_biaxial_fixed(fK * fL, psi, w, n)
        lerr = sphere_average_biaxial_fixed(np.abs(eK * fL) + np.abs(fK * eL), psi, w, n)
        nK = _norm_at_psi(K, psi)
        nL = _norm_at_psi(L, psi)
        rhs = (2 * math.pi) ** (2 * n) * sphere_average_biaxial_fixed(nK ** (-p) * nL ** (p - 2 * n), psi, w, n)
        return lhs, lerr, rhs

    lhs, lerr, rhs = sides(psi_order)
    lhs_c, _, rhs_c = sides(max(8, (3 * psi_order) // 4))
    lhs_err = lerr + abs(lhs - lhs_c)
    rhs_err = abs(rhs - rhs_c)
    scale = max(abs(lhs), abs(rhs))
    return {
        "K": K.hash,
        "L": L.hash,
        "p": p,
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs) / scale,
        "sigma": (lhs_err + rhs_err) / scale,
    }


def _norm_at_psi(body: Body, psi):
    psi = np.asarray(psi, dtype=float)
    n = body.n
    x = np.zeros((len(psi), 2 * n))
    x[:, 0] = np.cos(psi)
    x[:, 2 * n - 2] = np.sin(psi)
    return body.norm(x)


def write_scan_csv(report: dict, path_or_file):
    import csv

    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["psi", "value", "route", "err"])
        for ps, v, r, e in zip(report["psi"], report["values"], report["routes"], report["errors"]):
            w.writerow([f"{ps:.17g}", f"{v:.17g}", r, f"{e:.17g}"])
    finally:
        if own:
            fh.close()

"""The explicit non-positive-definite construction and its large-N behaviour.

The body is ``{|y| <= (1 - t^2 - N t^4)^(1/(2n-alpha-2)), t = |z| <= a_N}``;
at its pole the weighted parallel section function with weight ``alpha``
is computed in closed form and the regularized integral

    I = int_0^inf t^{-q-1} (A(t) - A(0) - a_1 t^2) dt,   q = 2n - alpha - 4,

is evaluated with exact Taylor subtraction. For ``q`` in (2, 3) the
transform at the pole has the sign of ``I``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from cbplab.bodies import CounterexampleBody, CounterexampleParams
from cbplab.errors import DomainError, PrecisionError, ValidationError
from cbplab.fractional import ft_prefactor
from cbplab.numerics import QuadratureConfig, find_root, integrate_adaptive, rgamma, sphere_surface
from cbplab.sections import PoleProfile


def alpha_root(N: float) -> float:
    """First positive root of ``1 - t^2 - N t^4``."""
    if not N > 0:
        raise DomainError("N must be positive")
    # (sqrt(1+4N) - 1)/(2N) written without cancellation
    return math.sqrt(2.0 / (1.0 + math.sqrt(1.0 + 4.0 * N)))


def beta_root(N: float, q: float) -> float:
    """Root of ``1 - t^2 - N t^4 = t^(q+1)`` in ``(0, a_N)``."""
    if not N > 0:
        raise DomainError("N must be positive")
    a = alpha_root(N)
    return find_root(lambda t: 1.0 - t * t - N * t**4 - t ** (q + 1), 0.0, a, tol=1e-15 * a)


def origin_closed_forms(n: int, alpha: float) -> dict:
    """Origin data of the pole profile (weight ``alpha``).

    ``a1_paper`` is the displayed value of the Laplacian at the origin taken
    as a candidate Taylor coefficient; ``a1_exact`` is the coefficient of
    ``t^2`` obtained by differentiating the profile integral.
    """
    g = 2 * n - alpha - 2
    if not (g > 0 and g - 2 > 0):
        raise DomainError(f"alpha={alpha}: denominators 2n-alpha-2 and 2n-alpha-4 must be positive")
    S = sphere_surface(2 * n - 2)
    A0 = S / g
    a1_paper = -S * (1.0 / g + alpha / (g - 2))
    a1_exact = -S * (1.0 / g + alpha / (2 * (g - 2)))
    ratio = a1_paper / a1_exact
    return {
        "n": n,
        "alpha": alpha,
        "A0": A0,
        "a1_paper": a1_paper,
        "a1_exact": a1_exact,
        "paper_over_a1": ratio,
        "paper_over_laplacian": ratio / 4.0,
        "paper_matches": _which_multiple(ratio),
    }


def _which_multiple(ratio: float, tol: float = 1e-9) -> str:
    for name, m in (("a1", 1.0), ("laplacian=4*a1", 4.0), ("a1/2", 0.5), ("2*a1", 2.0)):
        if abs(ratio - m) <= tol * m:
            return name
    return "none"


@dataclass(frozen=True)
class CertificateResult:
    n: int
    alpha: float
    N: float
    q: float
    a_N: float
    b_N: float
    A0: float
    a1: float
    a1_source: str
    integral_value: float
    err: float
    ft_pole_value: float
    status: str
    pieces: dict = field(default_factory=dict)

    @property
    def negative(self) -> bool:
        return self.status == "negative"

    def record(self) -> dict:
        d = asdict(self)
        d["negative"] = self.negative
        return d


def _pieces(profile: PoleProfile, coeffs, q, a_N, b_N, cfg, generic: bool, a1_err: float = 0.0):
    """Sub-integrals on [0, b_N], [b_N, a_N] and the closed-form tail."""
    a0, a1 = coeffs[0], coeffs[1]
    if not generic:
        def g(t):
            return t ** (-q - 1) * profile.residual(t, 1)

        v1, e1 = integrate_adaptive(g, 0.0, b_N, cfg)
        head_extra = 0.0
    else:
        # residual from plain values above t_cut, Taylor terms below
        t_cut = 0.05 * a_N

        def g(t):
            return t ** (-q - 1) * (float(profile.value(t)) - a0 - a1 * t * t)

        v1, e1 = integrate_adaptive(g, t_cut, b_N, cfg)
        a2 = profile.coeffs(2, source="taylor")[2]
        head_extra = a2 * t_cut ** (4 - q) / (4 - q)
        v1 += head_extra
        e1 += abs(head_extra) * 0.05 + a1_err * t_cut ** (2 - q) / (q - 2)
    v2, e2 = integrate_adaptive(g, b_N, a_N, cfg)
    tail = -a0 * a_N ** (-q) / q - a1 * a_N ** (2 - q) / (q - 2)
    return {"int_0_bN": v1, "int_bN_aN": v2, "tail_aN_inf": tail, "err_0_bN": e1, "err_bN_aN": e2}


def lemma4_certificate(params: CounterexampleParams, cfg: QuadratureConfig | None = None, a1_source: str = "closed_form") -> CertificateResult:
    """Sign certificate of the regularized pole integral.

    ``a1_source="taylor"`` replaces every closed-form origin datum by
    Richardson estimates and the accurate residual by plain subtraction
    above a small cut, as an independent numerical path.
    """
    cfg = cfg or QuadratureConfig()
    if not isinstance(params, CounterexampleParams):
        raise ValidationError("params must be CounterexampleParams")
    n, alpha, N = params.n, params.alpha, params.N
    q = params.q
    body = CounterexampleBody(n, alpha, N)
    profile = PoleProfile(body, alpha, cfg)
    a_N, b_N = alpha_root(N), beta_root(N, q)
    if a1_source == "closed_form":
        coeffs = profile.coeffs(1)
        a1_err = 0.0
        generic = False
    elif a1_source == "taylor":
        from cbplab.numerics import taylor_even_coeffs

        c, ce = taylor_even_coeffs(profile.value, 1, profile._h0 * profile.lam**2, return_error=True)
        coeffs, a1_err = c, ce[1]
        generic = True
    else:
        raise ValidationError(f"unknown a1 source {a1_source!r}")
    pc = _pieces(profile, coeffs, q, a_N, b_N, cfg, generic, a1_err)
    I = pc["int_0_bN"] + pc["int_bN_aN"] + pc["tail_aN_inf"]
    err = pc["err_0_bN"] + pc["err_bN_aN"] + 1e-15 * (abs(pc["int_0_bN"]) + abs(pc["int_bN_aN"]) + abs(pc["tail_aN_inf"]))
    frac = 2 * math.pi * rgamma(-q / 2) * I
    ft = ft_prefactor(n, alpha, q) * frac
    if I + err < 0:
        status = "negative"
    elif I - err > 0:
        status = "nonnegative"
    else:
        status = "indeterminate"
    return CertificateResult(
        n=n, alpha=alpha, N=N, q=q, a_N=a_N, b_N=b_N, A0=coeffs[0], a1=coeffs[1], a1_source=a1_source,
        integral_value=I, err=err, ft_pole_value=ft, status=status, pieces=pc,
    )


def refinement_check(params: CounterexampleParams, cfg: QuadratureConfig | None = None) -> dict:
    """Certificate at the given and at a 100x tighter tolerance."""
    cfg = cfg or QuadratureConfig()
    base = lemma4_certificate(params, cfg)
    fine = lemma4_certificate(params, cfg.refined(0.01))
    shift = abs(fine.integral_value - base.integral_value)
    return {"base": base.integral_value, "fine": fine.integral_value, "shift": shift, "err": base.err,
            "stable": bool(shift <= 2 * base.err)}


def geometric_grid(lo: float, hi: float, per_decade: int = 4) -> list[float]:
    if not (0 < lo < hi):
        raise DomainError("grid bounds must satisfy 0 < lo < hi")
    k = int(round(math.log10(hi / lo) * per_decade))
    return [lo * 10 ** (i / per_decade) for i in range(k + 1)]


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def nstar_sweep(n: int, alpha: float, N_grid, cfg: QuadratureConfig | None = None, threads: int = 1) -> dict:
    """Certificates over a grid of N and the empirical onset of negativity."""
    cfg = cfg or QuadratureConfig()
    grid = sorted(float(x) for x in N_grid)
    results = _map(lambda N: lemma4_certificate(CounterexampleParams(n, alpha, N), cfg), grid, threads)
    non_neg = [r.N for r in results if not r.negative]
    n_star = max(non_neg) if non_neg else None
    if n_star is None:
        onset = grid[0]
        below = None
    else:
        above = [N for N in grid if N > n_star]
        onset = above[0] if above else None
        below = n_star
    stable = onset is not None and all(r.negative for r in results if r.N >= onset)
    return {
        "n": n,
        "alpha": alpha,
        "N_star": n_star,
        "neighbors": [below, onset],
        "negative_beyond_N_star": stable,
        "results": results,
    }


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingFit:
    quantity: str
    N_grid: tuple
    exponent: float
    reference: float
    residual: float
    warnings: tuple = ()


def _fit(name, grid, vals, ref, tol=0.05):
    x = np.log(np.asarray(grid))
    y = np.log(np.abs(np.asarray(vals)))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    warns = ("log-log fit residual above 0.05",) if res > tol else ()
    return ScalingFit(name, tuple(grid), float(coef[0]), float(ref), res, warns)


def proof_constants(n: int, alpha: float, N: float) -> dict:
    g = 2 * n - alpha - 2
    C = 1 / g - alpha / (2 * (g - 2)) + alpha * (alpha + 2) / (4 * (g - 4))
    D = N / g - alpha * (alpha + 2) / (4 * (g - 4))
    E = alpha / (2 * g)
    F = alpha * (alpha + 2) / g
    out = {"C": C, "D": D, "E": E, "F": F}
    out.update({f"{k}_positive": bool(v > 0) for k, v in list(out.items())})
    return out


def scaling_study(n: int, alpha: float, N_grid, cfg: QuadratureConfig | None = None, threads: int = 1) -> dict:
    """Log-log exponents of the roots, the certificate integral and its three pieces."""
    cfg = cfg or QuadratureConfig()
    grid = sorted(float(x) for x in N_grid)
    if len(grid) < 4:
        raise ValidationError("scaling_study needs at least 4 grid points")
    ratios = np.diff(np.log(grid))
    if np.any(np.abs(ratios - ratios[0]) > 1e-9 * abs(ratios[0])):
        raise ValidationError("N grid must be geometric")
    if grid[-1] > 1e10:
        raise DomainError("largest N above 1e10")
    params = CounterexampleParams(n, alpha, grid[0])
    q = params.q
    certs = _map(lambda N: lemma4_certificate(CounterexampleParams(n, alpha, N), cfg), grid, threads)
    a = [c.a_N for c in certs]
    b = [c.b_N for c in certs]
    I = [c.integral_value for c in certs]
    top = [i for i, N in enumerate(grid) if N >= grid[-1] / 10]
    if len(top) < 2:
        top = list(range(len(grid) - 2, len(grid)))
    fits = [
        _fit("a_N", grid, a, -0.25),
        _fit("b_N", grid, b, -0.25),
        _fit("|integral_value| (top decade)", [grid[i] for i in top], [I[i] for i in top], q / 4),
        _fit("|int_0_bN|", grid, [c.pieces["int_0_bN"] for c in certs], (q - 2) / 4),
        _fit("|int_bN_aN|", grid, [c.pieces["int_bN_aN"] for c in certs], -0.25),
        _fit("|tail_aN_inf|", grid, [c.pieces["tail_aN_inf"] for c in certs], q / 4),
    ]
    # tail check: closed form vs quadrature of the subtracted polynomial
    c_last = certs[-1]
    tq, _ = integrate_adaptive(
        lambda t: t ** (-q - 1) * (-c_last.A0 - c_last.a1 * t * t), c_last.a_N, math.inf, cfg.refined(0.01)
    )
    return {
        "n": n,
        "alpha": alpha,
        "q": q,
        "fits": fits,
        "constants": proof_constants(n, alpha, grid[-1]),
        "tail_closed_form": c_last.pieces["tail_aN_inf"],
        "tail_quadrature": tq,
        "certificates": certs,
    }


CERT_COLUMNS = ["n", "alpha", "N", "q", "a_N", "b_N", "A0", "a1", "integral_value", "err", "ft_pole_value", "negative"]


def cert_row(c: CertificateResult) -> list:
    vals = [c.n, c.alpha, c.N, c.q, c.a_N, c.b_N, c.A0, c.a1, c.integral_value, c.err, c.ft_pole_value, c.negative]
    return [v if isinstance(v, (bool, int)) else f"{v:.17g}" for v in vals]


def write_certificate_csv(results, path_or_file):
    own = isinstance(path_or_file, str) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(CERT_COLUMNS)
        for c in results:
            w.writerow(["true" if x is True else "false" if x is False else x for x in cert_row(c)])
    finally:
        if own:
            fh.close()

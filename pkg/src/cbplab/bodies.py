"""Body families as Minkowski functionals on R^{2n}.

Coordinates are ordered ``(x11, x12, ..., xn1, xn2)``; coordinate pairs are
the complex coordinates. Biaxial bodies split a point into ``y`` (the first
``2n-2`` coordinates) and ``z`` (the last pair) and are described by a
profile ``|y| <= f(|z|)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from cbplab.errors import DomainError, ValidationError
from cbplab.numerics import (
    QuadratureConfig,
    bisect_bracket,
    find_root,
    integrate_adaptive,
    sphere_surface,
)


@dataclass(frozen=True)
class Estimate:
    """A numeric result with its error estimate and provenance."""

    value: float
    err: float = 0.0
    method: str = ""
    warnings: tuple[str, ...] = ()


def spec_hash(spec: Mapping[str, Any]) -> str:
    text = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CounterexampleParams:
    n: int
    alpha: float
    N: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError("counterexample needs an integer n >= 3")
        if not (2 * self.n - 7 < self.alpha < 2 * self.n - 6):
            raise DomainError(f"alpha={self.alpha} is outside ({2*self.n-7}, {2*self.n-6})")
        if not self.N > 0:
            raise DomainError("N must be positive")

    @property
    def q(self) -> float:
        return 2 * self.n - self.alpha - 4

    @property
    def exponent(self) -> float:
        return 2 * self.n - self.alpha - 2


class Body:
    """Origin-symmetric star body in R^{2n}, immutable after construction."""

    n: int
    spec: dict
    tags: frozenset

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def hash(self) -> str:
        return spec_hash(self.spec)

    @property
    def biaxial(self) -> bool:
        return "biaxial" in self.tags

    @property
    def radial(self) -> bool:
        return "radial" in self.tags

    def norm(self, x) -> np.ndarray:
        raise NotImplementedError

    # shell bounds: r_min |x| <= ... i.e. r_min <= |x|/||x|| <= r_max
    r_min: float
    r_max: float


def _check_points(body: Body, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != body.dim:
        raise DomainError(f"points must have last axis {body.dim}, got {x.shape}")
    return x


class ProfileBody(Body):
    """Biaxial body ``{|y| <= scale * f(|z|/scale)}``, ``f(t) = P(t^2)^(1/e)`` on ``[0, a]``.

    ``poly`` holds the coefficients of ``P`` in ``s = t^2`` with ``P(0) = 1``;
    ``a`` is the first positive root of ``P(t^2)``.
    """

    def __init__(self, n: int, poly, exponent: float, scale: float = 1.0, spec=None, tags=()):
        poly = tuple(float(c) for c in poly)
        if len(poly) < 2 or poly[0] != 1.0:
            raise ValidationError("poly must start with the constant term 1 and have degree >= 1")
        if exponent < 1:
            raise ValidationError("profile exponent must be >= 1")
        if scale <= 0:
            raise ValidationError("scale must be positive")
        self.n = int(n)
        self.poly = poly
        self.exponent = float(exponent)
        self.scale = float(scale)
        self.spec = dict(spec) if spec is not None else {
            "family": "biaxial_profile", "n": self.n, "poly": list(poly), "exponent": self.exponent,
        }
        self.tags = frozenset({"origin_symmetric", "r_theta_invariant", "biaxial", *tags})
        self._P = np.polynomial.Polynomial(poly)
        self._dP = self._P.deriv()
        roots = [r.real for r in self._P.roots() if abs(r.imag) < 1e-12 and r.real > 0]
        if not roots:
            raise ValidationError("P(t^2) has no positive root: the profile is unbounded")
        s_root = min(roots)
        grid = np.linspace(0.0, s_root, 513)
        if np.any(np.diff(self._P(grid)) > 0):
            raise ValidationError("P must be nonincreasing on [0, a^2]")
        self.support = math.sqrt(s_root)  # a for the unit profile
        self.r_min, self.r_max = self._shell()

    # unit-profile helpers -------------------------------------------------
    def profile(self, t):
        """Unscaled profile f(t); zero for t >= a."""
        t = np.asarray(t, dtype=float)
        P = self._P(t * t)
        return np.where((t < self.support) & (P > 0), np.abs(np.maximum(P, 0.0)) ** (1.0 / self.exponent), 0.0)

    def _unit_norm_yz(self, ry, rz):
        ry = np.asarray(ry, dtype=float)
        rz = np.asarray(rz, dtype=float)
        a = self.support
        out = np.empty(np.broadcast(ry, rz).shape)
        ry, rz = np.broadcast_to(ry, out.shape), np.broadcast_to(rz, out.shape)
        only_y = rz == 0
        only_z = (ry == 0) & ~only_y
        mixed = ~(only_y | only_z)
        out[only_y] = ry[only_y]
        out[only_z] = rz[only_z] / a
        if np.any(mixed):
            y, z = ry[mixed], rz[mixed]
            s_lo = np.maximum(y, z / a)
            s_hi = y + z / a
            e = self.exponent

            # (y u)^e = P((z u)^2) is smooth in u even where f has a vertical tangent
            P, dP = self._P, self._dP
            lo, hi = bisect_bracket(lambda u: (y * u) ** e - P((z * u) ** 2), 1.0 / s_hi, 1.0 / s_lo, iters=6)
            u = 0.5 * (lo + hi)
            act = np.arange(len(u))
            for _ in range(40):
                ua, ya, za = u[act], y[act], z[act]
                w = (za * ua) ** 2
                Gu = (ya * ua) ** e - P(w)
                pos = Gu > 0
                h = np.where(pos, ua, hi[act])
                l = np.where(pos, lo[act], ua)
                dG = e * ya * (ya * ua) ** (e - 1) - 2 * za * za * ua * dP(w)
                with np.errstate(divide="ignore", invalid="ignore"):
                    u_new = ua - Gu / dG
                inside = (u_new >= l) & (u_new <= h)
                u_next = np.where(inside, u_new, 0.5 * (l + h))
                hi[act], lo[act], u[act] = h, l, u_next
                act = act[np.abs(u_next - ua) > 1e-15 * ua]
                if not len(act):
                    break
            out[mixed] = 1.0 / u
        return out

    def norm_yz(self, ry, rz):
        """Norm of a point given only |y| and |z|."""
        return self._unit_norm_yz(np.asarray(ry) / self.scale, np.asarray(rz) / self.scale)

    def norm(self, x):
        x = _check_points(self, x)
        ry = np.linalg.norm(x[..., : self.dim - 2], axis=-1)
        rz = np.linalg.norm(x[..., self.dim - 2 :], axis=-1)
        return self.norm_yz(ry, rz)

    def norm_at_angle(self, psi):
        """Norm of the unit vector (cos psi e_y, sin psi e_z)."""
        psi = np.asarray(psi, dtype=float)
        return self.norm_yz(np.cos(psi), np.sin(psi))

    def _shell(self):
        psi = np.linspace(0.0, math.pi / 2, 4001)
        rho = 1.0 / self._unit_norm_yz(np.cos(psi), np.sin(psi))
        return float(rho.min() * (1 - 1e-9)) * self.scale, float(rho.max() * (1 + 1e-9)) * self.scale

    @property
    def t_max(self) -> float:
        """Support radius of the pole profile in the scaled body."""
        return self.support * self.scale

    def with_scale(self, lam: float, spec) -> "ProfileBody":
        body = ProfileBody.__new__(type(self))
        body.__dict__.update(self.__dict__)
        body.scale = self.scale * lam
        body.spec = dict(spec)
        body.r_min, body.r_max = self.r_min * lam, self.r_max * lam
        return body


class EuclideanBall(ProfileBody):
    def __init__(self, n: int, radius: float = 1.0):
        if radius <= 0:
            raise ValidationError("radius must be positive")
        super().__init__(
            n, (1.0, -1.0), 2.0, scale=radius,
            spec={"family": "euclidean_ball", "n": int(n), "radius": float(radius)},
            tags=("radial",),
        )
        self.r_min = self.r_max = float(radius)

    @property
    def radius(self) -> float:
        return self.scale

    def norm(self, x):
        x = _check_points(self, x)
        return np.linalg.norm(x, axis=-1) / self.scale

    def norm_yz(self, ry, rz):
        return np.hypot(ry, rz) / self.scale


class CounterexampleBody(ProfileBody):
    """``|y| <= (1 - t^2 - N t^4)^(1/(2n-alpha-2))`` with ``t = |z|``."""

    def __init__(self, n: int, alpha: float, N: float):
        if not (2 * n - 7 <= alpha <= 2 * n - 6):
            raise ValidationError(f"counterexample alpha={alpha} outside [{2*n-7}, {2*n-6}]")
        if not N > 0:
            raise ValidationError("counterexample N must be positive")
        self.alpha = float(alpha)
        self.N = float(N)
        super().__init__(
            n, (1.0, -1.0, -float(N)), 2 * n - alpha - 2,
            spec={"family": "counterexample", "n": int(n), "alpha": float(alpha), "N": float(N)},
        )

    @property
    def a_N(self) -> float:
        return self.support * self.scale


class ComplexLp(Body):
    """``||z|| = (sum_k |z_k|^r)^(1/r)`` over the complex coordinates."""

    def __init__(self, n: int, r: float):
        if r < 1:
            raise ValidationError("complex_lp exponent r must be >= 1")
        self.n = int(n)
        self.r = float(r)
        self.spec = {"family": "complex_lp", "n": self.n, "r": self.r}
        self.tags = frozenset({"origin_symmetric", "r_theta_invariant"})
        k = self.n ** (0.5 - 1.0 / self.r)
        lo, hi = (1.0, k) if self.r >= 2 else (k, 1.0)
        self.r_min, self.r_max = lo * (1 - 1e-12), hi * (1 + 1e-12)

    def norm(self, x):
        x = _check_points(self, x)
        rho = np.hypot(x[..., 0::2], x[..., 1::2])
        m = rho.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        return (m[..., 0]) * np.sum((rho / safe) ** self.r, axis=-1) ** (1.0 / self.r)

    def exact_volume(self) -> float:
        return math.pi**self.n * math.gamma(1 + 2 / self.r) ** self.n / math.gamma(1 + 2 * self.n / self.r)


class Dilate(Body):
    """``lambda * inner`` for bodies without a profile representation."""

    def __init__(self, lam: float, inner: Body, spec):
        if lam <= 0:
            raise ValidationError("dilation factor must be positive")
        self.lam = float(lam)
        self.inner = inner
        self.n = inner.n
        self.spec = dict(spec)
        self.tags = inner.tags
        self.r_min, self.r_max = inner.r_min * lam, inner.r_max * lam

    def norm(self, x):
        return self.inner.norm(x) / self.lam


# ---------------------------------------------------------------- construction

_FIELDS = {
    "euclidean_ball": ({"family", "n"}, {"radius"}),
    "complex_lp": ({"family", "n", "r"}, set()),
    "biaxial_profile": ({"family", "n", "poly", "exponent"}, set()),
    "counterexample": ({"family", "n", "alpha", "N"}, set()),
    "dilate": ({"family", "lambda", "inner"}, {"n"}),
}


def _num(spec, key, kind=float):
    try:
        val = spec[key]
        if isinstance(val, bool):
            raise TypeError
        return kind(val) if kind is float else val
    except (TypeError, ValueError):
        raise ValidationError(f"field '{key}' must be numeric, got {spec.get(key)!r}") from None


def make_body(spec: Mapping[str, Any]) -> Body:
    """Build a body from a pure-data description (see README for the schema)."""
    if not isinstance(spec, Mapping):
        raise ValidationError("body spec must be a JSON object")
    family = spec.get("family")
    if family not in _FIELDS:
        raise ValidationError(f"field 'family' must be one of {sorted(_FIELDS)}, got {family!r}")
    required, optional = _FIELDS[family]
    missing = sorted(required - set(spec))
    extra = sorted(set(spec) - required - optional)
    if missing:
        raise ValidationError(f"missing field(s) {missing} for family {family}")
    if extra:
        raise ValidationError(f"unknown field(s) {extra} for family {family}")
    if family != "dilate":
        n = spec["n"]
        if isinstance(n, bool) or not isinstance(n, (int, float)) or int(n) != n or n < 1:
            raise ValidationError(f"field 'n' must be a positive integer, got {n!r}")
        n = int(n)
    if family == "euclidean_ball":
        return EuclideanBall(n, _num(spec, "radius") if "radius" in spec else 1.0)
    if family == "complex_lp":
        return ComplexLp(n, _num(spec, "r"))
    if family == "biaxial_profile":
        poly = spec["poly"]
        if not isinstance(poly, list) or not all(isinstance(c, (int, float)) for c in poly):
            raise ValidationError("field 'poly' must be a list of numbers")
        body = ProfileBody(n, poly, _num(spec, "exponent"))
        return body
    if family == "counterexample":
        if n < 3:
            raise ValidationError("field 'n' must be >= 3 for the counterexample family")
        return CounterexampleBody(n, _num(spec, "alpha"), _num(spec, "N"))
    inner = make_body(spec["inner"])
    lam = _num(spec, "lambda")
    if lam <= 0:
        raise ValidationError("field 'lambda' must be positive")
    if "n" in spec and spec["n"] != inner.n:
        raise ValidationError("field 'n' disagrees with the inner body")
    canon = {"family": "dilate", "lambda": lam, "inner": inner.spec}
    if isinstance(inner, ProfileBody):
        return inner.with_scale(lam, canon)
    if isinstance(inner, Dilate):
        return Dilate(lam * inner.lam, inner.inner, canon)
    return Dilate(lam, inner, canon)


def load_body(path: str | Path) -> Body:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return make_body(spec)


def dilate(lam: float, body: Body) -> Body:
    return make_body({"family": "dilate", "lambda": lam, "inner": body.spec})


# ---------------------------------------------------------------- operations


def norm_eval(body: Body, x) -> np.ndarray:
    return body.norm(x)


def r_theta_rotate(x, theta: float) -> np.ndarray:
    """Rotate every coordinate pair of ``x`` counterclockwise by ``theta``."""
    x = np.asarray(x, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    out = np.empty_like(x)
    out[..., 0::2] = c * x[..., 0::2] - s * x[..., 1::2]
    out[..., 1::2] = s * x[..., 0::2] + c * x[..., 1::2]
    return out


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=key)))


@dataclass(frozen=True)
class InvarianceReport:
    max_deviation: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def check_invariance(body: Body, sample_count: int = 1000, tol: float = 1e-12, seed: int = 0) -> InvarianceReport:
    rng = _rng(seed, 1)
    x = rng.standard_normal((sample_count, body.dim))
    theta = rng.uniform(0, 2 * math.pi, sample_count)
    base = body.norm(x)
    rot = np.array([body.norm(r_theta_rotate(xi, th)) for xi, th in zip(x, theta)])
    dev = float(np.max(np.abs(rot - base) / base))
    return InvarianceReport(dev, tol, sample_count)


@dataclass(frozen=True)
class ConvexityReport:
    max_triangle_excess: float
    midpoint_failures: int
    pairs: int

    @property
    def passed(self) -> bool:
        return self.midpoint_failures == 0 and self.max_triangle_excess <= 1e-9


def convexity_probe(body: Body, pairs: int = 10000, seed: int = 0) -> ConvexityReport:
    """Empirical triangle-inequality and midpoint probes on random pairs."""
    rng = _rng(seed, 2)
    x = rng.standard_normal((pairs, body.dim))
    y = rng.standard_normal((pairs, body.dim))
    # bias pairs toward the boundary directions of thin bodies
    x[: pairs // 2, -2:] *= 0.05
    nx, ny, ns = body.norm(x), body.norm(y), body.norm(x + y)
    excess = float(np.max((ns - nx - ny) / (nx + ny)))
    mid = body.norm(0.5 * (x + y))
    fails = int(np.sum(mid > np.maximum(nx, ny) * (1 + 1e-9)))
    return ConvexityReport(excess, fails, pairs)


def volume(body: Body, cfg: QuadratureConfig | None = None) -> Estimate:
    """Vol_{2n} by the polar formula (1/2n) * integral over the sphere of ||theta||^{-2n}."""
    cfg = cfg or QuadratureConfig()
    n2 = body.dim
    if isinstance(body, ProfileBody):
        const = sphere_surface(n2 - 2) * 2 * math.pi / n2

        def integrand(psi):
            return float(body.norm_at_angle(psi)) ** (-n2) * math.cos(psi) ** (n2 - 3) * math.sin(psi)

        val, err = integrate_adaptive(integrand, 0.0, math.pi / 2, cfg)
        return Estimate(const * val, const * err, "biaxial_1d")
    if isinstance(body, Dilate):
        inner = volume(body.inner, cfg)
        f = body.lam**n2
        return Estimate(inner.value * f, inner.err * f, inner.method, inner.warnings)
    return _volume_mc(body, cfg)


def _volume_mc(body: Body, cfg: QuadratureConfig) -> Estimate:
    rng = _rng(cfg.rng_seed, 3)
    g = rng.standard_normal((cfg.mc_samples, body.dim))
    theta = g / np.linalg.norm(g, axis=1, keepdims=True)
    vals = body.norm(theta) ** (-body.dim)
    const = sphere_surface(body.dim) / body.dim
    mean = float(vals.mean())
    sigma = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    warnings = ()
    if sigma > cfg.rel_tol * abs(mean):
        warnings = (f"MC standard error {sigma/mean:.2e} (relative) exceeds requested tolerance",)
    return Estimate(const * mean, const * sigma, "sphere_mc", warnings)

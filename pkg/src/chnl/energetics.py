"""
Free-energy ingredients: configuration potentials and their Yosida/Moreau
regularisations, the gradient-energy coefficient ``a(u)``, the change of
variable ``φ(s) = ∫_0^s sqrt(a)``, the discrete energy, and the convexity
test that decides whether the fourth-order flow is contractive.

Every potential is split as ``f = f0 - λ r`` with ``f0`` nondecreasing and
``f0(0) = 0``.  With a Yosida parameter ``σ`` the monotone part is replaced by

    f_σ(r) = (r - J_σ(r)) / σ,        J_σ = (I + σ f0)^{-1},
    F_σ(r) = |r - J_σ(r)|² / (2σ) + F0(J_σ(r)),

so ``F_σ' = f_σ``, ``f_σ`` is nondecreasing and ``1/σ``-Lipschitz, and
``F_σ ≤ F0`` increases as ``σ`` decreases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.special import xlogy

from .errors import DomainViolation, NonPositiveCoefficient, ResolventFailure
from .grid import Field, grad_sq_array, lap_array

__all__ = [
    "PotentialFamily",
    "CustomPotential",
    "PotentialSpec",
    "CoefficientFamily",
    "CoefficientSpec",
    "RegimeReport",
    "potential_F",
    "potential_f",
    "potential_fprime",
    "monotone_f",
    "monotone_F",
    "monotone_fprime",
    "resolvent",
    "yosida_f",
    "yosida_fprime",
    "moreau_F",
    "coefficient_a",
    "coefficient_aprime",
    "coefficient_asecond",
    "phi_transform",
    "phi_inverse",
    "phi_quadrature",
    "energy",
    "check_uniqueness_regime",
    "is_concave",
]

LOG_EDGE = 1e-15
RESOLVENT_TOL = 1e-12
RESOLVENT_MAXITER = 200


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


class PotentialFamily(enum.Enum):
    LOGARITHMIC = "logarithmic"
    SIXTH_POLYNOMIAL = "polynomial"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CustomPotential:
    """User-supplied monotone part ``f0`` with primitive ``F0``.

    ``domain`` is the open interval where ``f0`` is finite (``None`` for the
    whole line).  ``f0prime`` falls back to a centred difference.
    """

    f0: Callable[[np.ndarray], np.ndarray]
    F0: Callable[[np.ndarray], np.ndarray]
    f0prime: Callable[[np.ndarray], np.ndarray] | None = None
    domain: tuple[float, float] | None = None
    label: str = "custom"

    @classmethod
    def linear(cls, slope: float) -> "CustomPotential":
        """``f0(r) = slope * r``, the linearised model used for dispersion checks."""
        if slope < 0:
            raise ValueError("a linear monotone part needs slope >= 0")
        return cls(
            f0=lambda r: slope * np.asarray(r, dtype=float),
            F0=lambda r: 0.5 * slope * np.asarray(r, dtype=float) ** 2,
            f0prime=lambda r: np.full(np.shape(r), float(slope)),
            label=f"linear:{slope!r}",
        )

    @classmethod
    def from_table(cls, r: np.ndarray, f0_values: np.ndarray) -> "CustomPotential":
        """Monotone (PCHIP) interpolation of a tabulated ``f0``.

        The table must be nondecreasing and pass through ``(0, 0)``; its range
        becomes the open domain of the potential.
        """
        r = np.asarray(r, dtype=float)
        v = np.asarray(f0_values, dtype=float)
        if np.any(np.diff(r) <= 0) or np.any(np.diff(v) < 0):
            raise ValueError("table must be strictly increasing in r and nondecreasing in f0")
        if not r[0] < 0 < r[-1]:
            raise ValueError("table must bracket r = 0")
        p = PchipInterpolator(r, v, extrapolate=False)
        shift = float(p(0.0))
        if abs(shift) > 1e-12 * max(1.0, float(np.max(np.abs(v)))):
            raise ValueError("tabulated f0 must vanish at 0")
        P = p.antiderivative()
        P0 = float(P(0.0))
        dp = p.derivative()
        return cls(
            f0=lambda x: p(x),
            F0=lambda x: P(x) - P0,
            f0prime=lambda x: dp(x),
            domain=(float(r[0]), float(r[-1])),
            label="table",
        )


def _poly_coeffs(h0: float) -> np.polynomial.Polynomial:
    # (u+1)^2 (u^2+h0) (u-1)^2
    return np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** 2 * np.polynomial.Polynomial([h0, 0.0, 1.0])


def minimal_lambda_sixth(h0: float) -> float:
    """Smallest λ making ``P'' + λ`` nonnegative for the sixth-degree potential."""
    P2 = _poly_coeffs(h0).deriv(2)
    crit = [c.real for c in P2.deriv().roots() if abs(c.imag) < 1e-12]
    cand = [float(P2(c)) for c in crit] + [float(P2(0.0))]
    return max(0.0, -min(cand))


@dataclass(frozen=True)
class PotentialSpec:
    family: PotentialFamily = PotentialFamily.LOGARITHMIC
    lam: float = 0.0
    h0: float = 0.0
    sigma: float | None = None
    custom: CustomPotential | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", PotentialFamily(self.family))
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.sigma is not None:
            if not 0.0 < self.sigma <= 1.0:
                raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.family is PotentialFamily.CUSTOM and self.custom is None:
            raise ValueError("custom family needs a CustomPotential")
        if self.family is PotentialFamily.SIXTH_POLYNOMIAL:
            need = minimal_lambda_sixth(self.h0)
            if self.lam < need - 1e-12:
                raise ValueError(
                    f"lam={self.lam} too small: P''+lam must be >= 0, need lam >= {need:.6g}"
                )

    @classmethod
    def logarithmic(cls, lam: float = 0.0, sigma: float | None = None) -> "PotentialSpec":
        return cls(PotentialFamily.LOGARITHMIC, lam=lam, sigma=sigma)

    @classmethod
    def sixth_polynomial(cls, h0: float, lam: float | None = None, sigma: float | None = None):
        if lam is None:
            lam = minimal_lambda_sixth(h0)
        return cls(PotentialFamily.SIXTH_POLYNOMIAL, lam=lam, h0=h0, sigma=sigma)

    @classmethod
    def linear(cls, slope: float) -> "PotentialSpec":
        return cls(PotentialFamily.CUSTOM, custom=CustomPotential.linear(slope))

    def with_sigma(self, sigma: float | None) -> "PotentialSpec":
        return PotentialSpec(self.family, self.lam, self.h0, sigma, self.custom)

    @property
    def domain(self) -> tuple[float, float] | None:
        if self.family is PotentialFamily.LOGARITHMIC:
            return (-1.0, 1.0)
        if self.family is PotentialFamily.CUSTOM:
            return self.custom.domain
        return None

    @property
    def is_singular(self) -> bool:
        return self.domain is not None

    @property
    def shift(self) -> float:
        return self.h0 if self.family is PotentialFamily.SIXTH_POLYNOMIAL else 0.0

    @property
    def is_linear(self) -> bool:
        return (
            self.family is PotentialFamily.CUSTOM
            and self.custom.label.startswith("linear:")
        )


def _check_domain(spec: PotentialSpec, r: np.ndarray) -> None:
    dom = spec.domain
    if dom is None:
        return
    lo, hi = dom
    bad = (r <= lo) | (r >= hi) | ~np.isfinite(r)
    if np.any(bad):
        worst = r[bad].flat[0]
        raise DomainViolation(f"value {worst!r} outside the open domain ({lo}, {hi})")


def monotone_f(spec: PotentialSpec, r):
    """The nondecreasing part ``f0`` (no regularisation, no domain check)."""
    r = np.asarray(r, dtype=float)
    fam = spec.family
    if fam is PotentialFamily.LOGARITHMIC:
        return np.log1p(r) - np.log1p(-r)
    if fam is PotentialFamily.SIXTH_POLYNOMIAL:
        return _poly_coeffs(spec.h0).deriv()(r) + spec.lam * r
    return np.asarray(spec.custom.f0(r), dtype=float)


def monotone_F(spec: PotentialSpec, r):
    """Primitive ``F0`` of ``f0`` with ``F0(0) = 0``."""
    r = np.asarray(r, dtype=float)
    fam = spec.family
    if fam is PotentialFamily.LOGARITHMIC:
        return xlogy(1.0 - r, 1.0 - r) + xlogy(1.0 + r, 1.0 + r)
    if fam is PotentialFamily.SIXTH_POLYNOMIAL:
        return _poly_coeffs(spec.h0)(r) - spec.h0 + 0.5 * spec.lam * r * r
    return np.asarray(spec.custom.F0(r), dtype=float)


def monotone_fprime(spec: PotentialSpec, r):
    r = np.asarray(r, dtype=float)
    fam = spec.family
    if fam is PotentialFamily.LOGARITHMIC:
        return 2.0 / ((1.0 - r) * (1.0 + r))
    if fam is PotentialFamily.SIXTH_POLYNOMIAL:
        return _poly_coeffs(spec.h0).deriv(2)(r) + spec.lam
    if spec.custom.f0prime is not None:
        return np.asarray(spec.custom.f0prime(r), dtype=float)
    eps = 1e-6
    return (np.asarray(spec.custom.f0(r + eps)) - np.asarray(spec.custom.f0(r - eps))) / (2 * eps)


def _bracket_limits(spec: PotentialSpec) -> tuple[float, float]:
    dom = spec.domain
    if dom is None:
        return -np.inf, np.inf
    lo, hi = dom
    if spec.family is PotentialFamily.LOGARITHMIC:
        return lo + LOG_EDGE, hi - LOG_EDGE
    width = hi - lo
    return lo + LOG_EDGE * width, hi - LOG_EDGE * width


def _warm_newton(spec: PotentialSpec, sigma: float, r: np.ndarray, y: np.ndarray):
    """Plain Newton from a nearby guess; ``None`` unless every entry converges
    inside the domain within a few sweeps."""
    dlo, dhi = _bracket_limits(spec)
    for _ in range(4):
        if not (y.min() > dlo and y.max() < dhi):
            return None
        g = y + sigma * monotone_f(spec, y) - r
        if np.max(np.abs(g)) <= RESOLVENT_TOL:
            return y
        y = y - g / (1.0 + sigma * monotone_fprime(spec, y))
    return None


def resolvent(spec: PotentialSpec, sigma: float, r, guess=None):
    """``J_σ(r)``: the root of ``y + σ f0(y) = r``.

    Safeguarded Newton: each iterate is kept inside a shrinking sign bracket,
    which starts as ``[min(0, r), max(0, r)]`` intersected with the open
    domain of ``f0``.  When the root lies closer to a singular endpoint than
    floating point can resolve, the iterate is pinned to the clipped edge.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if guess is not None and np.shape(guess) == np.shape(r) and np.ndim(r) > 0:
        y = _warm_newton(spec, sigma, np.asarray(r, dtype=float), np.asarray(guess, dtype=float))
        if y is not None:
            return y
    scalar = np.ndim(r) == 0
    shape = np.shape(r)
    r = np.asarray(r, dtype=float).ravel()
    if not np.all(np.isfinite(r)):
        raise ResolventFailure("non-finite argument to the resolvent")
    dlo, dhi = _bracket_limits(spec)
    tol = RESOLVENT_TOL * np.maximum(1.0, np.abs(r))
    lo = np.maximum(np.minimum(0.0, r), dlo)
    hi = np.minimum(np.maximum(0.0, r), dhi)
    if guess is None:
        y = r / (1.0 + sigma * float(monotone_fprime(spec, 0.0)))
    else:
        y = np.broadcast_to(np.asarray(guess, dtype=float), shape).ravel().copy()
    y = np.clip(y, lo, hi)
    # roots beyond the representable edge of a singular domain
    for edge, side in ((dhi, 1.0), (dlo, -1.0)):
        if np.isfinite(edge):
            sel = side * r >= side * edge
            if np.any(sel):
                g_edge = edge + sigma * monotone_f(spec, edge) - r[sel]
                pin = side * g_edge <= 0.0
                idx = np.flatnonzero(sel)[pin]
                y[idx] = edge
                lo[idx] = hi[idx] = edge
    active = np.ones(r.shape, dtype=bool)
    for _ in range(RESOLVENT_MAXITER):
        ya = y[active]
        ra = r[active]
        g = ya + sigma * monotone_f(spec, ya) - ra
        width = hi[active] - lo[active]
        done = (np.abs(g) <= tol[active]) | (width <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(ya)))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not np.any(active):
            break
        keep = ~done
        idx, ya, g = idx[keep], ya[keep], g[keep]
        neg = g < 0
        lo[idx[neg]] = ya[neg]
        hi[idx[~neg]] = ya[~neg]
        gp = 1.0 + sigma * monotone_fprime(spec, ya)
        with np.errstate(divide="ignore", invalid="ignore"):
            yn = ya - g / gp
        out = ~((yn > lo[idx]) & (yn < hi[idx])) | ~np.isfinite(yn)
        yn[out] = 0.5 * (lo[idx][out] + hi[idx][out])
        y[idx] = yn
    else:
        bad = np.flatnonzero(active)
        raise ResolventFailure(
            f"resolvent did not reach tolerance in {RESOLVENT_MAXITER} iterations "
            f"(first failing r={r[bad[0]]!r}, sigma={sigma})"
        )
    return float(y[0]) if scalar else y.reshape(shape)


def yosida_f(spec: PotentialSpec, sigma: float, r):
    """Yosida approximation ``f_σ(r) = (r - J_σ(r))/σ`` of the monotone part."""
    J = resolvent(spec, sigma, r)
    return (np.asarray(r, dtype=float) - J) / sigma


def yosida_fprime(spec: PotentialSpec, sigma: float, r, J=None):
    """``f_σ' = f0'(J)/(1 + σ f0'(J))``, exact for C¹ ``f0``."""
    if J is None:
        J = resolvent(spec, sigma, r)
    d = monotone_fprime(spec, J)
    return d / (1.0 + sigma * d)


def moreau_F(spec: PotentialSpec, sigma: float, r):
    """Moreau envelope ``F_σ`` of ``F0`` (primitive of :func:`yosida_f`)."""
    J = resolvent(spec, sigma, r)
    r = np.asarray(r, dtype=float)
    return (r - J) ** 2 / (2.0 * sigma) + monotone_F(spec, J)


def potential_F(spec: PotentialSpec, r):
    """Full potential ``F = F0 - (λ/2) r²`` (or ``F_σ - (λ/2) r²``)."""
    r = np.asarray(r, dtype=float)
    if spec.sigma is None:
        _check_domain(spec, r)
        core = monotone_F(spec, r)
    else:
        core = moreau_F(spec, spec.sigma, r)
    return core - 0.5 * spec.lam * r * r + spec.shift


def potential_f(spec: PotentialSpec, r):
    """Full derivative ``f = f0 - λ r`` (or ``f_σ - λ r``)."""
    r = np.asarray(r, dtype=float)
    if spec.sigma is None:
        _check_domain(spec, r)
        core = monotone_f(spec, r)
    else:
        core = yosida_f(spec, spec.sigma, r)
    return core - spec.lam * r


def potential_fprime(spec: PotentialSpec, r):
    r = np.asarray(r, dtype=float)
    if spec.sigma is None:
        _check_domain(spec, r)
        core = monotone_fprime(spec, r)
    else:
        core = yosida_fprime(spec, spec.sigma, r)
    return core - spec.lam


def potential_f_and_fprime(spec: PotentialSpec, r):
    """``(f, f')`` sharing one resolvent solve."""
    r = np.asarray(r, dtype=float)
    if spec.sigma is None:
        _check_domain(spec, r)
        return monotone_f(spec, r) - spec.lam * r, monotone_fprime(spec, r) - spec.lam
    J = resolvent(spec, spec.sigma, r)
    d = monotone_fprime(spec, J)
    return (r - J) / spec.sigma - spec.lam * r, d / (1.0 + spec.sigma * d) - spec.lam


# ---------------------------------------------------------------------------
# gradient-energy coefficient
# ---------------------------------------------------------------------------


class CoefficientFamily(enum.Enum):
    CONSTANT = "constant"
    EVEN_QUADRATIC = "even_quadratic"
    GENERAL_QUADRATIC = "quadratic"


_P = np.polynomial.Polynomial


def _quintic_blend(v0: float, d0: float, s0: float, v1: float) -> _P:
    """Quintic on t in [0, 1] with (value, slope, curvature) = (v0, d0, s0) at 0
    and (v1, 0, 0) at 1."""
    H0 = _P([1, 0, 0, -10, 15, -6])
    H1 = _P([0, 1, 0, -6, 8, -3])
    H2 = _P([0, 0, 0.5, -1.5, 1.5, -0.5])
    H3 = _P([0, 0, 0, 10, -15, 6])
    return v0 * H0 + d0 * H1 + s0 * H2 + v1 * H3


@dataclass(frozen=True)
class CoefficientSpec:
    """Gradient-energy coefficient ``a(u)``.

    The polynomial core is used on ``[-1, 1]``; quintic Hermite blends on
    ``[1, 2]`` and ``[-2, -1]`` match it to second order at ``±1`` and reach
    the constants ``a_plus``/``a_minus`` flatly at ``±2``.  By default the
    end constants equal the core values at ``±1``.
    """

    family: CoefficientFamily = CoefficientFamily.CONSTANT
    c0: float = 1.0
    c1: float = 0.0
    c2: float = 0.0
    a_minus: float | None = None
    a_plus: float | None = None
    a_low: float = field(init=False, default=0.0)
    a_high: float = field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "family", CoefficientFamily(self.family))
        core = _P([self.c0, self.c1, self.c2])
        if self.a_plus is None:
            object.__setattr__(self, "a_plus", float(core(1.0)))
        if self.a_minus is None:
            object.__setattr__(self, "a_minus", float(core(-1.0)))
        dcore = core.deriv()
        d2core = dcore.deriv()
        right = _quintic_blend(core(1.0), dcore(1.0), d2core(1.0), self.a_plus)
        # t = -1 - r maps [-2, -1] onto [1, 0]; d/dt = -d/dr
        left = _quintic_blend(core(-1.0), -dcore(-1.0), d2core(-1.0), self.a_minus)
        object.__setattr__(self, "_pieces", (core, right, left))
        s = np.linspace(-2.5, 2.5, 10_001)
        vals = coefficient_a(self, s)
        lo, hi = float(vals.min()), float(vals.max())
        if lo <= 0:
            raise NonPositiveCoefficient(f"a(r) reaches {lo:.4g} <= 0 on [-2.5, 2.5]")
        object.__setattr__(self, "a_low", lo)
        object.__setattr__(self, "a_high", hi)
        object.__setattr__(self, "_phi_table", _build_phi_table(self))

    @classmethod
    def constant(cls, c: float) -> "CoefficientSpec":
        return cls(CoefficientFamily.CONSTANT, c0=c)

    @classmethod
    def even_quadratic(cls, g0: float, g2: float, **kw) -> "CoefficientSpec":
        return cls(CoefficientFamily.EVEN_QUADRATIC, c0=g0, c2=g2, **kw)

    @classmethod
    def quadratic(cls, a0: float, a1: float, a2: float, **kw) -> "CoefficientSpec":
        return cls(CoefficientFamily.GENERAL_QUADRATIC, c0=a0, c1=a1, c2=a2, **kw)

    @property
    def is_constant(self) -> bool:
        return self.c1 == 0.0 and self.c2 == 0.0


def _eval_a(spec: CoefficientSpec, r, order: int):
    core, right, left = spec._pieces
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    m_core = np.abs(r) <= 1.0
    m_right = (r > 1.0) & (r < 2.0)
    m_left = (r < -1.0) & (r > -2.0)
    m_hi = r >= 2.0
    m_lo = r <= -2.0
    out[m_core] = core.deriv(order)(r[m_core]) if order else core(r[m_core])
    out[m_right] = right.deriv(order)(r[m_right] - 1.0) if order else right(r[m_right] - 1.0)
    sign = (-1.0) ** order
    out[m_left] = sign * (left.deriv(order)(-1.0 - r[m_left]) if order else left(-1.0 - r[m_left]))
    out[m_hi] = spec.a_plus if order == 0 else 0.0
    out[m_lo] = spec.a_minus if order == 0 else 0.0
    return out if out.ndim else float(out)


def coefficient_a(spec: CoefficientSpec, r):
    return _eval_a(spec, r, 0)


def coefficient_aprime(spec: CoefficientSpec, r):
    return _eval_a(spec, r, 1)


def coefficient_asecond(spec: CoefficientSpec, r):
    return _eval_a(spec, r, 2)


# ---------------------------------------------------------------------------
# φ(s) = ∫_0^s sqrt(a(r)) dr
# ---------------------------------------------------------------------------

PHI_NODES = 4096
PHI_RANGE = 2.5


def _adaptive_simpson(g, a: float, b: float, tol: float, depth: int = 50) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) * (fa + 4.0 * fm + fb) / 6.0

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = g(lm), g(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    fa, fb, fm = g(a), g(b), g(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def phi_quadrature(spec: CoefficientSpec, s: float, tol: float = 1e-12) -> float:
    """Reference value of ``φ(s)`` by adaptive Simpson quadrature."""
    g = lambda x: float(np.sqrt(coefficient_a(spec, x)))  # noqa: E731
    if s == 0.0:
        return 0.0
    # split at the blend knots so each panel sees a smooth integrand
    knots = [k for k in (-2.0, -1.0, 1.0, 2.0) if min(0.0, s) < k < max(0.0, s)]
    pts = sorted({0.0, float(s), *knots})
    total = sum(_adaptive_simpson(g, a, b, tol / len(pts)) for a, b in zip(pts[:-1], pts[1:]))
    return total if s > 0 else -total


def _panel_simpson(g, a: np.ndarray, b: np.ndarray, tol: float, max_level: int = 12) -> np.ndarray:
    """Simpson integrals of ``g`` over many panels, each refined by halving
    until successive composite estimates agree to ``15 * tol``."""
    prev = None
    for level in range(max_level):
        m = 2 ** (level + 1)  # even number of subintervals
        t = np.linspace(0.0, 1.0, m + 1)
        x = a[:, None] + (b - a)[:, None] * t[None, :]
        y = g(x)
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        cur = (b - a) / (3.0 * m) * (y @ w)
        if prev is not None:
            err = np.abs(cur - prev)
            if np.all(err <= 15.0 * tol):
                return cur + (cur - prev) / 15.0
        prev = cur
    return prev


def _build_phi_table(spec: CoefficientSpec):
    nodes = np.linspace(-PHI_RANGE, PHI_RANGE, PHI_NODES)
    sqrt_a = np.sqrt(coefficient_a(spec, nodes))
    g = lambda x: np.sqrt(coefficient_a(spec, x))  # noqa: E731
    panels = _panel_simpson(g, nodes[:-1], nodes[1:], 1e-12 / PHI_NODES)
    vals = np.concatenate([[0.0], np.cumsum(panels)])
    # anchor φ(0) = 0: interpolate the cumulative table at the origin exactly
    j = np.searchsorted(nodes, 0.0) - 1
    offset = vals[j] + _panel_simpson(g, nodes[j:j + 1], np.zeros(1), 1e-14)[0]
    vals -= offset
    return nodes, vals, CubicHermiteSpline(nodes, vals, sqrt_a, extrapolate=False)


def phi_transform(spec: CoefficientSpec, r):
    """``φ(r)`` from the precomputed Hermite table (linear beyond ``±2.5``)."""
    nodes, vals, spline = spec._phi_table
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    inside = np.abs(r) <= PHI_RANGE
    out[inside] = spline(r[inside])
    hi = r > PHI_RANGE
    lo = r < -PHI_RANGE
    out[hi] = vals[-1] + np.sqrt(spec.a_plus) * (r[hi] - PHI_RANGE)
    out[lo] = vals[0] + np.sqrt(spec.a_minus) * (r[lo] + PHI_RANGE)
    return out if out.ndim else float(out)


def phi_inverse(spec: CoefficientSpec, s, tol: float = 1e-12, maxiter: int = 50):
    nodes, vals, _ = spec._phi_table
    s = np.asarray(s, dtype=float)
    r = np.interp(s, vals, nodes)
    outside = (s > vals[-1]) | (s < vals[0])
    if np.any(outside):
        r = np.where(s > vals[-1], PHI_RANGE + (s - vals[-1]) / np.sqrt(spec.a_plus), r)
        r = np.where(s < vals[0], -PHI_RANGE + (s - vals[0]) / np.sqrt(spec.a_minus), r)
    for _ in range(maxiter):
        res = phi_transform(spec, r) - s
        if np.all(np.abs(res) <= tol):
            break
        r = r - res / np.sqrt(coefficient_a(spec, r))
    return r if r.ndim else float(r)


# ---------------------------------------------------------------------------
# energy and convexity regime
# ---------------------------------------------------------------------------


def energy_density(u: np.ndarray, domain, delta: float, spec_F: PotentialSpec, spec_a: CoefficientSpec):
    dens = 0.5 * coefficient_a(spec_a, u) * grad_sq_array(u, domain) + potential_F(spec_F, u)
    if delta:
        dens = dens + 0.5 * delta * lap_array(u, domain) ** 2
    return dens


def energy(u: Field, delta: float, spec_F: PotentialSpec, spec_a: CoefficientSpec) -> float:
    """Discrete free energy ``∫ δ/2 |Δu|² + a(u)/2 |∇u|² + F(u)``."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    dens = energy_density(u.values, u.domain, delta, spec_F, spec_a)
    return float(np.sum(dens) * u.domain.cell_volume)


@dataclass(frozen=True)
class RegimeReport:
    convex_a: bool
    kappa: float
    unique_nonviscous: bool
    unique_viscous: bool


def check_uniqueness_regime(spec_a: CoefficientSpec, samples: int = 10_000) -> RegimeReport:
    """Test ``a'' >= 0`` and ``(1/a)'' <= -κ`` on ``[-1, 1]`` by dense sampling."""
    r = np.linspace(-1.0, 1.0, samples)
    a = coefficient_a(spec_a, r)
    a1 = coefficient_aprime(spec_a, r)
    a2 = coefficient_asecond(spec_a, r)
    convex = bool(np.min(a2) >= -1e-12)
    inv2 = (2.0 * a1 * a1 - a * a2) / a**3
    kappa = float(-np.max(inv2)) + 0.0
    return RegimeReport(
        convex_a=convex,
        kappa=kappa,
        unique_nonviscous=convex and kappa > 0,
        unique_viscous=convex and kappa >= 0,
    )


def is_concave(spec_a: CoefficientSpec, samples: int = 10_000) -> bool:
    r = np.linspace(-1.0, 1.0, samples)
    return bool(np.max(coefficient_asecond(spec_a, r)) <= 1e-12)

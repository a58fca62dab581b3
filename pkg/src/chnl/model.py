"""
Chemical potential, implicit-Euler residuals and initial data for the three
model variants:

* ``SIXTH``: ``u_t = MΔw``, ``w = δΔ²u + 𝒜(u) + f_σ(u) - λu + (ε+σ)u_t``
* ``FOURTH``: the same with ``δ = 0`` and plain viscosity ``ε``
* ``PHASE_FIELD``: ``u_t + σw_t = MΔw``, ``w = 𝒜(u) + f_σ(u) - λu + (ε+σ)u_t``

``𝒜(u) = -a(u)Δu - a'(u)/2 |∇u|²`` is discretised as the exact gradient of
the discrete interfacial energy ``Σ a(u_i)/2 |∇u|²_i h^d``, i.e. in the
conservative form ``-∇·(ā∇u) + a'(u)/2 |∇u|²`` with face-averaged ``ā``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .energetics import (
    CoefficientSpec,
    PotentialSpec,
    coefficient_a,
    coefficient_aprime,
    potential_f,
)
from .errors import AmplitudeTooLarge, MeanOutOfRange
from .grid import Domain, Field, grad_sq_array, lap_array, weighted_div_grad

__all__ = [
    "Mode",
    "ModelParams",
    "SimState",
    "calA",
    "chemical_potential",
    "residual",
    "smooth_initial_datum",
    "Constant",
    "SeededNoise",
    "CosineMode",
    "TanhInterface",
    "make_initial",
    "initial_state",
    "initial_rate",
]


class Mode(enum.Enum):
    SIXTH = "sixth"
    FOURTH = "fourth"
    PHASE_FIELD = "phasefield"


@dataclass(frozen=True)
class ModelParams:
    mode: Mode
    spec_F: PotentialSpec
    spec_a: CoefficientSpec
    delta: float = 0.0
    epsilon: float = 0.0
    sigma: float = 0.0
    mobility: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.delta < 0 or self.epsilon < 0 or self.sigma < 0:
            raise ValueError("delta, epsilon and sigma must be >= 0")
        if not self.mobility > 0:
            raise ValueError("mobility must be > 0")
        if self.mode is Mode.SIXTH and not self.delta > 0:
            raise ValueError("mode=sixth requires delta > 0")
        if self.mode is not Mode.SIXTH and self.delta != 0:
            raise ValueError(f"mode={self.mode.value} requires delta = 0")
        if self.mode is Mode.PHASE_FIELD and not self.sigma > 0:
            raise ValueError("mode=phasefield requires sigma > 0")

    @property
    def lam(self) -> float:
        return self.spec_F.lam

    @property
    def sigma_visc(self) -> float:
        return 0.0 if self.mode is Mode.FOURTH else self.sigma

    @property
    def sigma_pf(self) -> float:
        return self.sigma if self.mode is Mode.PHASE_FIELD else 0.0

    @property
    def eta(self) -> float:
        """Total viscosity multiplying ``u_t`` in the chemical potential."""
        return self.epsilon + self.sigma_visc

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    u: Field
    w: Field


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------


def calA_array(u: np.ndarray, domain: Domain, spec_a: CoefficientSpec) -> np.ndarray:
    if spec_a.is_constant:
        return -spec_a.c0 * lap_array(u, domain)
    a = coefficient_a(spec_a, u)
    ap = coefficient_aprime(spec_a, u)
    return -weighted_div_grad(u, a, domain) + 0.5 * ap * grad_sq_array(u, domain)


def static_potential_array(u: np.ndarray, domain: Domain, params: ModelParams, fvals=None) -> np.ndarray:
    """``δΔ²u + 𝒜(u) + f(u)``: the variational derivative of the energy."""
    out = calA_array(u, domain, params.spec_a)
    out = out + (potential_f(params.spec_F, u) if fvals is None else fvals)
    if params.delta:
        out = out + params.delta * lap_array(lap_array(u, domain), domain)
    return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def calA(u: Field, spec_a: CoefficientSpec) -> Field:
    """Nonlinear diffusion operator ``𝒜(u) = -a(u)Δu - a'(u)/2 |∇u|²``."""
    return u.like(calA_array(u.values, u.domain, spec_a))


def chemical_potential(u_new: Field, u_old: Field, tau: float, params: ModelParams) -> Field:
    if not tau > 0:
        raise ValueError("tau must be > 0")
    mu = static_potential_array(u_new.values, u_new.domain, params)
    if params.eta:
        mu = mu + params.eta * (u_new.values - u_old.values) / tau
    return u_new.like(mu)


def residual(state_new: SimState, state_old: SimState, tau: float, params: ModelParams):
    """Implicit-Euler residuals ``(R1, R2)``; the step is their common root."""
    if state_new.u.domain != state_old.u.domain:
        raise ValueError("states live on different domains")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    dom = state_new.u.domain
    du = state_new.u.values - state_old.u.values
    r1 = du / tau - params.mobility * lap_array(state_new.w.values, dom)
    if params.sigma_pf:
        r1 = r1 + params.sigma_pf * (state_new.w.values - state_old.w.values) / tau
    mu = chemical_potential(state_new.u, state_old.u, tau, params)
    r2 = state_new.w.values - mu.values
    return Field(dom, r1), Field(dom, r2)


def smooth_initial_datum(u0: Field, sigma: float, order: int = 1) -> Field:
    """Solve ``v + σ(-Δ)^order v = u0`` spectrally; the mean is untouched."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    dom = u0.domain
    mult = 1.0 / (1.0 + sigma * dom.symbol**order)
    v = dom.apply_multiplier(u0.values, mult)
    # the zero mode has multiplier exactly 1; restore the mean bit-for-bit
    v += np.mean(u0.values) - np.mean(v)
    return u0.like(v)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    m: float


@dataclass(frozen=True)
class SeededNoise:
    m: float
    amplitude: float
    seed: int = 0


@dataclass(frozen=True)
class CosineMode:
    m: float
    amplitude: float
    k: int = 1


@dataclass(frozen=True)
class TanhInterface:
    position: float
    width: float
    amplitude: float = 0.9


def make_initial(kind, domain: Domain, *, margin: float = 1e-3, singular: bool = True) -> Field:
    """Deterministic initial field.

    ``SeededNoise`` draws from the counter-based Philox generator keyed by the
    seed, so the field is reproducible bit-for-bit; the sample mean is removed
    before adding ``m``.  Cosine and tanh profiles vary along the first axis.
    """
    x = domain.coordinates()[0]
    L = domain.lengths[0]
    if isinstance(kind, Constant):
        vals = np.full(domain.shape, float(kind.m))
    elif isinstance(kind, SeededNoise):
        rng = np.random.Generator(np.random.Philox(key=int(kind.seed)))
        noise = rng.uniform(-1.0, 1.0, size=domain.shape)
        noise -= noise.mean()
        vals = kind.m + kind.amplitude * noise
    elif isinstance(kind, CosineMode):
        freq = 2.0 * np.pi * kind.k / L if domain.periodic else np.pi * kind.k / L
        vals = kind.m + kind.amplitude * np.cos(freq * x)
    elif isinstance(kind, TanhInterface):
        if not kind.width > 0:
            raise ValueError("width must be > 0")
        vals = kind.amplitude * np.tanh((x - kind.position) / kind.width)
    else:
        raise TypeError(f"unknown initial-condition kind {kind!r}")
    m = float(np.mean(vals))
    if not -1.0 < m < 1.0:
        raise MeanOutOfRange(f"mean {m} outside (-1, 1)")
    if singular and np.max(np.abs(vals)) > 1.0 - margin:
        raise AmplitudeTooLarge(
            f"max|u| = {np.max(np.abs(vals)):.6g} exceeds 1 - margin = {1.0 - margin}"
        )
    return Field(domain, vals)


def initial_rate(u0: Field, params: ModelParams) -> np.ndarray:
    """``u_t`` at ``t = 0`` from ``(I - ηMΔ)u_t = MΔμ(u0)`` (zero in phase-field mode)."""
    dom = u0.domain
    if params.mode is Mode.PHASE_FIELD:
        return np.zeros(dom.shape)
    mu = static_potential_array(u0.values, dom, params)
    M = params.mobility
    mult = -M * dom.symbol / (1.0 + params.eta * M * dom.symbol)
    return dom.apply_multiplier(mu, mult)


def initial_state(u0: Field, params: ModelParams) -> SimState:
    """Pair ``(u0, w0)`` with ``w0`` from the constitutive law at ``t = 0``.

    Phase-field runs start from ``w0 = 0``.
    """
    dom = u0.domain
    if params.mode is Mode.PHASE_FIELD:
        return SimState(0.0, u0.copy(), dom.zeros())
    mu = static_potential_array(u0.values, dom, params)
    if params.eta:
        mu = mu + params.eta * initial_rate(u0, params)
    return SimState(0.0, u0.copy(), Field(dom, mu))

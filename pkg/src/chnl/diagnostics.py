"""
Verification studies built on the simulator: energy balance, the
Dal Passo-Garcke-Grün integration-by-parts identity, linear dispersion,
parameter and mesh sweeps, and contraction of nearby trajectories.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .energetics import is_concave
from .errors import MeanMismatch, NonlinearSpec, StepFailure
from .grid import Domain, Field, _shift, inv_lap_array, lap_array
from .model import Mode, ModelParams, SeededNoise, make_initial, smooth_initial_datum
from .observables import CSV_COLUMNS, DiagnosticsRecord, DiagnosticsSeries
from .stepper import StepperConfig, run

__all__ = [
    "DiagnosticsRecord",
    "DiagnosticsSeries",
    "CSV_COLUMNS",
    "SWEEP_COLUMNS",
    "ConvergenceReport",
    "ContractionReport",
    "DispersionRow",
    "Scenario",
    "DpggWeight",
    "energy_equality_residual",
    "dpgg_identity_residual",
    "dispersion_check",
    "sweep_delta",
    "sweep_sigma",
    "refine",
    "restrict",
    "contraction_check",
]

SWEEP_COLUMNS = ("param", "distance_l2", "distance_h1", "observed_order_cum")


# ---------------------------------------------------------------------------
# energy balance
# ---------------------------------------------------------------------------


def energy_equality_residual(series: DiagnosticsSeries) -> np.ndarray:
    """``|E(t) - E(0) + ∫ (M‖∇w‖² + η‖u_t‖²)|`` with trapezoidal time quadrature.

    In phase-field runs ``E`` is the augmented functional ``E + σ/2 ‖w‖²``.
    """
    if len(series) == 0:
        return np.zeros(0)
    t = series.column("t")
    e = series.column("energy") + 0.5 * series.sigma_pf * series.column("w_sq")
    d = series.mobility * series.column("grad_w_sq") + series.eta * series.column("ut_sq")
    dissipated = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (d[1:] + d[:-1]))))
    return np.abs(e - e[0] + dissipated)


# ---------------------------------------------------------------------------
# DPGG identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DpggWeight:
    """A scalar C² weight ``h`` with its first two derivatives."""

    h: object
    dh: object
    d2h: object

    @classmethod
    def constant(cls, c: float) -> "DpggWeight":
        return cls(lambda r: np.full_like(r, c), np.zeros_like, np.zeros_like)

    @classmethod
    def power(cls, p: int) -> "DpggWeight":
        if p < 0:
            raise ValueError("p must be >= 0")
        if p == 0:
            return cls.constant(1.0)
        return cls(
            lambda r: r**p,
            lambda r: p * r ** (p - 1),
            lambda r: p * (p - 1) * r ** max(p - 2, 0) if p >= 2 else np.zeros_like(r),
        )


def _centred(v: np.ndarray, domain: Domain, axis: int) -> np.ndarray:
    h = domain.spacing[axis]
    return (_shift(v, axis, 1, domain.periodic) - _shift(v, axis, -1, domain.periodic)) / (2.0 * h)


def _second(v: np.ndarray, domain: Domain, axis: int) -> np.ndarray:
    h = domain.spacing[axis]
    return (_shift(v, axis, 1, domain.periodic) - 2.0 * v + _shift(v, axis, -1, domain.periodic)) / (h * h)


def dpgg_identity_residual(z: Field, h_spec: DpggWeight) -> float:
    """Discrete defect of

        ∫h'(z)|∇z|²Δz + (1/3)∫h''(z)|∇z|⁴ - (2/3)∫h(z)(|D²z|² - |Δz|²) = 0,

    which holds for periodic fields and for flat no-flux boundaries.
    Gradients are centred; ``D²`` uses centred second and mixed differences.
    """
    dom = z.domain
    v = z.values
    grads = [_centred(v, dom, ax) for ax in range(dom.dim)]
    g2 = sum(g * g for g in grads)
    diag = [_second(v, dom, ax) for ax in range(dom.dim)]
    lap = sum(diag)
    hess2 = sum(d * d for d in diag)
    for i in range(dom.dim):
        for j in range(i + 1, dom.dim):
            mixed = _centred(grads[i], dom, j)
            hess2 = hess2 + 2.0 * mixed * mixed
    total = (
        h_spec.dh(v) * g2 * lap
        + h_spec.d2h(v) * g2 * g2 / 3.0
        - 2.0 / 3.0 * h_spec.h(v) * (hess2 - lap * lap)
    )
    return abs(float(np.sum(total)) * dom.cell_volume)


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DispersionRow:
    mode: int
    wavenumber: float
    symbol: float
    mu_numeric: float
    mu_analytic: float
    rel_err: float


def _mode_shape(domain: Domain, j: int) -> np.ndarray:
    x = domain.coordinates()[0]
    L = domain.lengths[0]
    k = (2.0 if domain.periodic else 1.0) * np.pi * j / L
    return np.cos(k * x), k


def dispersion_check(
    params: ModelParams,
    domain: Domain,
    modes=(1, 2, 3),
    amplitude: float = 1e-3,
    steps: int = 1000,
    efolds: float = 1.0,
) -> list[DispersionRow]:
    """Decay rates of single cosine modes along the first axis.

    The analytic rate uses the discrete eigenvalue ``s`` of ``-Δ``:
    ``μ = -Ms(δs² + a0 s + λ0)/(1 + εMs)``.  The numeric rate is the
    log-amplitude slope of an implicit run over ``efolds`` e-foldings with
    ``τ = efolds/(steps|μ|)``, so the time-stepping bias is about
    ``τ|μ|/2``.
    """
    spec_F, spec_a = params.spec_F, params.spec_a
    if not spec_a.is_constant:
        raise NonlinearSpec("dispersion_check needs a constant coefficient a")
    if not spec_F.is_linear:
        raise NonlinearSpec("dispersion_check needs a linear potential derivative f")
    if params.mode is Mode.PHASE_FIELD:
        raise NonlinearSpec("dispersion_check covers the sixth- and fourth-order systems")
    lam0 = float(spec_F.custom.f0(np.array([1.0]))[0]) - spec_F.lam
    a0, M, delta, eta = spec_a.c0, params.mobility, params.delta, params.eta
    rows = []
    for j in modes:
        shape, k = _mode_shape(domain, j)
        n, h = domain.cells[0], domain.spacing[0]
        s = (2.0 / h * math.sin(math.pi * j / (n if domain.periodic else 2 * n))) ** 2
        mu_a = -M * s * (delta * s * s + a0 * s + lam0) / (1.0 + eta * M * s)
        if j == 0 or mu_a == 0.0:
            rows.append(DispersionRow(j, k, s, 0.0, mu_a, 0.0 if mu_a == 0.0 else math.inf))
            continue
        tau = efolds / (steps * abs(mu_a))
        u0 = Field(domain, amplitude * np.broadcast_to(shape, domain.shape).copy())
        res = run(u0, StepperConfig(tau=tau, t_end=steps * tau), params, diagnostics_every=steps)
        basis = np.broadcast_to(shape, domain.shape)
        amp = float(np.sum(res.final.u.values * basis) / np.sum(basis * basis))
        mu_n = math.log(amp / amplitude) / res.final.t
        rows.append(DispersionRow(j, k, s, mu_n, mu_a, abs(mu_n - mu_a) / abs(mu_a)))
    return rows


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Everything but the swept parameter."""

    domain: Domain
    params: ModelParams
    stepper: StepperConfig
    initial: object
    smoothing: float = 0.0
    smoothing_order: int = 2

    def initial_field(self, domain: Domain | None = None) -> Field:
        dom = self.domain if domain is None else domain
        u0 = make_initial(self.initial, dom, singular=self.params.spec_F.is_singular)
        if self.smoothing:
            u0 = smooth_initial_datum(u0, self.smoothing, self.smoothing_order)
        return u0

    def final(self) -> Field:
        res = run(self.initial_field(), self.stepper, self.params, diagnostics_every=10**9, keep_states=False)
        return res.final.u


@dataclass(frozen=True)
class ConvergenceReport:
    parameter: str
    ladder: tuple
    distances: tuple
    distances_h1: tuple
    observed_order: float
    orders_cum: tuple

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for p, d, dh, o in zip(self.ladder[1:], self.distances, self.distances_h1, self.orders_cum):
            w.writerow([repr(float(p)), repr(float(d)), repr(float(dh)), repr(float(o))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @property
    def strictly_decreasing(self) -> bool:
        d = np.asarray(self.distances)
        return bool(np.all(np.diff(d) < 0))


def _slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(y <= 0) or np.any(x <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _distances(a: Field, b: Field) -> tuple[float, float]:
    dom = a.domain
    d = a.values - b.values
    dv = dom.cell_volume
    l2 = float(np.sum(d * d) * dv)
    semi = float(np.sum(-d * lap_array(d, dom)) * dv)
    return math.sqrt(l2), math.sqrt(l2 + max(semi, 0.0))


def _report(name: str, ladder, finals, scale=None) -> ConvergenceReport:
    l2, h1 = [], []
    for a, b in zip(finals[:-1], finals[1:]):
        x, y = _distances(a, b)
        l2.append(x)
        h1.append(y)
    xs = list(ladder[1:]) if scale is None else list(scale[1:])
    cum = [math.nan] + [_slope(xs[: i + 1], l2[: i + 1]) for i in range(1, len(l2))]
    return ConvergenceReport(name, tuple(ladder), tuple(l2), tuple(h1),
                             _slope(xs, l2), tuple(cum))


def _run_scenario(sc: Scenario) -> Field:
    return sc.final()


def _run_ladder(name: str, scenarios, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_scenario, sc) for sc in scenarios]
            out = []
            for i, fut in enumerate(futures):
                try:
                    out.append(fut.result())
                except StepFailure as exc:
                    raise StepFailure(f"{name}[{i}]: {exc}", last_residual=exc.last_residual,
                                      guard_trips=exc.guard_trips) from exc
            return out
    out = []
    for i, sc in enumerate(scenarios):
        try:
            out.append(sc.final())
        except StepFailure as exc:
            err = StepFailure(f"{name}[{i}]: {exc}", last_residual=exc.last_residual,
                              guard_trips=exc.guard_trips, partial=exc.partial)
            raise err from exc
    return out


def sweep_delta(scenario: Scenario, ladder, *, require_concave: bool = False, workers: int = 1) -> ConvergenceReport:
    """Sixth-order runs along a δ-ladder; distances between successive finals."""
    ladder = tuple(float(d) for d in ladder)
    if len(ladder) < 2:
        raise ValueError("need at least two ladder entries")
    if any(d <= 0 for d in ladder):
        raise ValueError("delta ladder entries must be > 0")
    if require_concave and not is_concave(scenario.params.spec_a):
        raise ValueError("a is not concave on [-1, 1]; the vanishing-delta regime is not covered")
    scs = [replace(scenario, params=scenario.params.replace(mode=Mode.SIXTH, delta=d)) for d in ladder]
    return _report("delta", ladder, _run_ladder("sweep_delta", scs, workers))


def sweep_sigma(scenario: Scenario, ladder, *, workers: int = 1) -> ConvergenceReport:
    """Runs along a σ-ladder; σ sets both the Yosida parameter and the model σ."""
    ladder = tuple(float(s) for s in ladder)
    if len(ladder) < 2:
        raise ValueError("need at least two ladder entries")
    if any(s <= 0 for s in ladder):
        raise ValueError("sigma ladder entries must be > 0")
    p = scenario.params
    scs = [replace(scenario, params=p.replace(sigma=s, spec_F=p.spec_F.with_sigma(s))) for s in ladder]
    return _report("sigma", ladder, _run_ladder("sweep_sigma", scs, workers))


def restrict(fine: Field, coarse: Domain) -> Field:
    """Average fine cells onto a coarse grid whose cell counts divide evenly."""
    fd = fine.domain
    ratios = []
    for nf, nc in zip(fd.cells, coarse.cells):
        if nf % nc:
            raise ValueError("fine cell counts must be multiples of the coarse ones")
        ratios.append(nf // nc)
    shape = []
    for nc, r in zip(coarse.cells, ratios):
        shape += [nc, r]
    v = fine.values.reshape(shape)
    return Field(coarse, v.mean(axis=tuple(range(1, 2 * fd.dim, 2))))


def refine(scenario: Scenario, levels: int, *, workers: int = 1) -> ConvergenceReport:
    """Mesh refinement by factors of two; finer solutions are averaged onto the
    coarser grid before differencing.  ``param`` is the mesh width."""
    if levels < 2:
        raise ValueError("need at least two levels")
    if isinstance(scenario.initial, SeededNoise):
        raise ValueError("refinement needs a grid-independent initial profile")
    dom = scenario.domain
    doms = [Domain(tuple(n * 2**l for n in dom.cells), dom.lengths, dom.bc) for l in range(levels)]
    scs = [replace(scenario, domain=d) for d in doms]
    finals = _run_ladder("refine", scs, workers)
    pairs = [restrict(finals[l + 1], doms[l]) for l in range(levels - 1)]
    hs = tuple(d.spacing[0] for d in doms)
    l2, h1 = [], []
    for l in range(levels - 1):
        x, y = _distances(finals[l], pairs[l])
        l2.append(x)
        h1.append(y)
    xs = hs[1:]
    cum = [math.nan] + [_slope(xs[: i + 1], l2[: i + 1]) for i in range(1, len(l2))]
    return ConvergenceReport("h", hs, tuple(l2), tuple(h1), _slope(xs, l2), tuple(cum))


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionReport:
    times: np.ndarray
    distances: np.ndarray
    rho_hat: float
    rho_early: float
    rho_late: float

    @property
    def bounded(self) -> bool:
        d0 = self.distances[0]
        env = d0 * np.exp(self.rho_hat * self.times) * (1.0 + 1e-9)
        return bool(np.isfinite(self.rho_hat) and np.all(self.distances <= env + 1e-300))

    @property
    def superexponential(self) -> bool:
        """Late growth rate clearly exceeding the early one."""
        return bool(self.rho_late > self.rho_early + 1.0 + 0.5 * abs(self.rho_early))


def _contraction_distance(d: np.ndarray, domain: Domain, eta: float) -> float:
    dv = domain.cell_volume
    d = d - d.mean()
    hm1 = math.sqrt(max(float(np.sum(d * inv_lap_array(d, domain)) * dv), 0.0))
    return hm1 + math.sqrt(eta) * math.sqrt(float(np.sum(d * d) * dv))


def contraction_check(scenario: Scenario, perturbation_amplitude: float, *, perturbation: Field | None = None,
                      seed: int = 12345) -> ContractionReport:
    """Two runs from ``u0`` and ``u0 + p`` with mean-zero ``p`` scaled so that
    ``d(0)`` equals ``perturbation_amplitude``.

    ``d = ‖u1 - u2‖_{H^-1} + √η ‖u1 - u2‖`` with ``η`` the total viscosity.
    ``rho_hat`` is the smallest rate with ``d(t) <= d(0) exp(ρ t)`` on the
    recorded times.
    """
    u0 = scenario.initial_field()
    dom = u0.domain
    eta = scenario.params.eta
    if perturbation is None:
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        p = rng.uniform(-1.0, 1.0, size=dom.shape)
        p -= p.mean()
    else:
        p = perturbation.values
        if abs(float(np.mean(p))) > 1e-12 * max(1.0, float(np.max(np.abs(p)))):
            raise MeanMismatch("perturbation changes the mean; initial data must share their mass")
    d0 = _contraction_distance(p, dom, eta)
    if perturbation_amplitude == 0.0 or d0 == 0.0:
        p = np.zeros(dom.shape)
    else:
        p = p * (perturbation_amplitude / d0)
    u1 = u0
    u2 = Field(dom, u0.values + p)
    r1 = run(u1, scenario.stepper, scenario.params)
    r2 = run(u2, scenario.stepper, scenario.params)
    if len(r1.states) != len(r2.states):
        raise StepFailure("contraction_check: the two runs took different step sequences")
    t = np.array([s.t for s in r1.states])
    d = np.array([_contraction_distance(a.u.values - b.u.values, dom, eta)
                  for a, b in zip(r1.states, r2.states)])
    if d[0] == 0.0:
        return ContractionReport(t, d, 0.0, 0.0, 0.0)
    with np.errstate(divide="ignore"):
        logr = np.log(d / d[0])
    pos = t > 0
    rho_hat = float(np.max(logr[pos] / t[pos])) if np.any(pos) else 0.0
    half = len(t) // 2
    early = _lin_rate(t[: half + 1], logr[: half + 1])
    late = _lin_rate(t[half:], logr[half:])
    return ContractionReport(t, d, rho_hat, early, late)


def _lin_rate(t, y) -> float:
    if len(t) < 2 or not np.all(np.isfinite(y)):
        return math.nan
    return float(np.polyfit(t, y, 1)[0])

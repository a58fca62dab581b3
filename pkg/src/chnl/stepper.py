"""
Implicit-Euler time stepping of the conserved gradient flow, plus an
independent explicit RK4 integrator used as a verification oracle.

The step solves ``residual(state_new, state_old, τ) = 0``.  The first
(linear) equation is eliminated exactly before Newton is applied:

* sixth/fourth order: the unknown is the mean-zero increment ``v = u - u_old``
  and ``w`` is recovered from the constitutive law; the reduced equation is

      (τM)^{-1} (-Δ)^{-1} v + Π0[ δΔ²u + 𝒜(u) + f(u) + η v/τ ] = 0,

  the optimality condition of the minimizing-movement problem in the
  ``H^{-1}`` metric, so mass is conserved by construction;
* phase field: the unknown is ``w`` and ``u = u_old - σ(w - w_old) + τMΔw``.

Newton corrections come from preconditioned GMRES with matrix-free
Jacobian-vector products; the right preconditioner is the constant-coefficient
linearisation, diagonal in the DCT/FFT basis.  The reported nonlinear
residual is the preconditioned residual ``‖P^{-1}G‖``, i.e. the size of the
next Newton correction, because the raw residual of the sixth-order system has a
round-off floor far above any useful absolute tolerance.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .energetics import coefficient_a, potential_f, potential_f_and_fprime, resolvent
from .errors import DomainViolation, Instability, ResolventFailure, StepFailure
from .grid import Field, lap_array, laplacian_matrix
from .io import write_checkpoint, write_snapshot
from .model import (
    Mode,
    ModelParams,
    SimState,
    calA_array,
    initial_rate,
    initial_state,
    static_potential_array,
)
from .observables import DiagnosticsSeries, lyapunov, observe

__all__ = [
    "StepperConfig",
    "StepReport",
    "RunResult",
    "step",
    "run",
    "explicit_oracle",
    "oracle_initial_step",
    "stable_explicit_oracle",
]

log = logging.getLogger(__name__)

GUARD_MARGIN = 1e-12


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    t_end: float
    newton_tol: float = 1e-10
    newton_max: int = 30
    krylov_tol: float = 1e-8
    krylov_max: int = 500
    tau_min: float | None = None
    domain_guard: bool = True
    accept_energy_slack: float = 1e-9

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.tau_min is None:
            object.__setattr__(self, "tau_min", self.tau / 1024)
        if not 0 < self.tau_min <= self.tau:
            raise ValueError("need 0 < tau_min <= tau")
        for name in ("newton_tol", "krylov_tol", "accept_energy_slack"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.newton_max < 1 or self.krylov_max < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass(frozen=True)
class StepReport:
    accepted: bool
    newton_iters: int
    krylov_iters_total: int
    tau_used: float
    energy_before: float
    energy_after: float
    dissipation_increment: float
    residual: float = math.nan
    guard_trips: int = 0
    retries: int = 0


@dataclass
class RunResult:
    states: list[SimState]
    series: DiagnosticsSeries
    reports: list[StepReport] = field(default_factory=list)

    @property
    def final(self) -> SimState:
        return self.states[-1]


class _AttemptFailed(Exception):
    def __init__(self, reason, residual=math.nan, trips=0):
        super().__init__(reason)
        self.residual = residual
        self.trips = trips


def _l2(x: np.ndarray, dv: float) -> float:
    return float(np.sqrt(np.sum(x * x) * dv))


class _Newton:
    """One implicit-Euler attempt at a fixed step size."""

    def __init__(self, state: SimState, tau: float, cfg: StepperConfig, params: ModelParams):
        self.dom = state.u.domain
        self.tau = tau
        self.cfg = cfg
        self.p = params
        self.u_old = state.u.values
        self.w_old = state.w.values
        spec = params.spec_F
        self.guard = None
        if spec.sigma is None and spec.is_singular:
            lo, hi = spec.domain
            m = GUARD_MARGIN * (hi - lo) / 2.0
            self.guard = (lo + m, hi - m)
        self.trips = 0
        self.krylov_iters = 0
        self.newton_iters = 0

    def _inside(self, u: np.ndarray) -> bool:
        if self.guard is None:
            return True
        lo, hi = self.guard
        return bool(np.all((u > lo) & (u < hi)))

    def _pot(self, u: np.ndarray):
        try:
            return potential_f_and_fprime(self.p.spec_F, u)
        except (DomainViolation, ResolventFailure) as exc:
            raise _AttemptFailed(str(exc), trips=self.trips) from None

    def _krylov(self, jv, pinv, rhs: np.ndarray) -> np.ndarray:
        dom = self.dom
        shape = dom.shape
        n = rhs.size
        count = [0]

        def cb(_):
            count[0] += 1

        op = LinearOperator(
            (n, n),
            matvec=lambda y: jv(dom.apply_multiplier(y.reshape(shape), pinv)).ravel(),
            dtype=float,
        )
        restart = min(self.cfg.krylov_max, 100)
        y, _info = gmres(
            op,
            rhs.ravel(),
            rtol=self.cfg.krylov_tol,
            atol=0.0,
            restart=restart,
            maxiter=max(1, math.ceil(self.cfg.krylov_max / restart)),
            callback=cb,
            callback_type="pr_norm",
        )
        self.krylov_iters += count[0]
        return dom.apply_multiplier(y.reshape(shape), pinv)

    def _fd_step(self, u: np.ndarray, p: np.ndarray) -> float:
        pn = float(np.max(np.abs(p)))
        return 1e-7 * (1.0 + float(np.max(np.abs(u)))) / pn if pn > 0 else 1.0

    # -- sixth / fourth order -------------------------------------------------

    def solve_increment(self):
        dom, tau, p, cfg = self.dom, self.tau, self.p, self.cfg
        dv = dom.cell_volume
        M, eta, delta = p.mobility, p.eta, p.delta
        sym = dom.symbol
        nz = sym > 0
        inv_tm = np.zeros_like(sym)
        inv_tm[nz] = 1.0 / (tau * M * sym[nz])
        u_old = self.u_old
        v = np.zeros_like(u_old)
        rho = math.inf
        for it in range(cfg.newton_max + 1):
            u = u_old + v
            f, fp = self._pot(u)
            A = calA_array(u, dom, p.spec_a)
            mu = A + f
            if delta:
                mu = mu + delta * lap_array(lap_array(u, dom), dom)
            if eta:
                mu = mu + eta * v / tau
            G = dom.apply_multiplier(v, inv_tm) + mu
            G -= G.mean()
            abar = float(np.mean(coefficient_a(p.spec_a, u)))
            cbar = max(float(np.mean(fp)), 0.0)
            psym = inv_tm + delta * sym**2 + abar * sym + cbar + eta / tau
            pinv = np.where(nz, 1.0 / np.where(nz, psym, 1.0), 0.0)
            rho = _l2(dom.apply_multiplier(G, pinv), dv)
            if not math.isfinite(rho):
                raise _AttemptFailed("non-finite residual", rho, self.trips)
            if rho <= cfg.newton_tol:
                return u, mu, rho
            if it == cfg.newton_max:
                break

            def jv(q, u=u, A=A, fp=fp):
                e = self._fd_step(u, q)
                out = dom.apply_multiplier(q, inv_tm)
                out += (calA_array(u + e * q, dom, p.spec_a) - A) / e + fp * q
                if delta:
                    out += delta * lap_array(lap_array(q, dom), dom)
                if eta:
                    out += eta * q / tau
                return out - out.mean()

            dv_ = self._krylov(jv, pinv, -G)
            dv_ -= dv_.mean()
            self.newton_iters += 1
            alpha = 1.0
            while not self._inside(u_old + v + alpha * dv_):
                self.trips += 1
                alpha *= 0.5
                if alpha < 2.0**-10:
                    raise _AttemptFailed("domain guard tripped", rho, self.trips)
            v = v + alpha * dv_
            v -= v.mean()
        raise _AttemptFailed("Newton did not converge", rho, self.trips)

    # -- phase field ----------------------------------------------------------

    def solve_phase_field(self):
        dom, tau, p, cfg = self.dom, self.tau, self.p, self.cfg
        dv = dom.cell_volume
        M, eta, sig = p.mobility, p.eta, p.sigma_pf
        sym = dom.symbol
        u_old, w_old = self.u_old, self.w_old

        def u_of(w):
            return u_old - sig * (w - w_old) + tau * M * lap_array(w, dom)

        w = w_old.copy()
        rho = math.inf
        for it in range(cfg.newton_max + 1):
            u = u_of(w)
            if not self._inside(u):
                raise _AttemptFailed("domain guard tripped", rho, self.trips + 1)
            f, fp = self._pot(u)
            A = calA_array(u, dom, p.spec_a)
            mu = A + f
            if eta:
                mu = mu + eta * (u - u_old) / tau
            R = w - mu
            abar = float(np.mean(coefficient_a(p.spec_a, u)))
            cbar = max(float(np.mean(fp)), 0.0)
            pinv = 1.0 / (1.0 + (abar * sym + cbar + eta / tau) * (sig + tau * M * sym))
            rho = _l2(dom.apply_multiplier(R, pinv), dv)
            if not math.isfinite(rho):
                raise _AttemptFailed("non-finite residual", rho, self.trips)
            if rho <= cfg.newton_tol:
                return u, w, rho
            if it == cfg.newton_max:
                break

            def jv(q, u=u, A=A, fp=fp):
                du = -sig * q + tau * M * lap_array(q, dom)
                e = self._fd_step(u, du)
                dmu = (calA_array(u + e * du, dom, p.spec_a) - A) / e + fp * du
                if eta:
                    dmu += eta * du / tau
                return q - dmu

            dw = self._krylov(jv, pinv, -R)
            self.newton_iters += 1
            alpha = 1.0
            while not self._inside(u_of(w + alpha * dw)):
                self.trips += 1
                alpha *= 0.5
                if alpha < 2.0**-10:
                    raise _AttemptFailed("domain guard tripped", rho, self.trips)
            w = w + alpha * dw
        raise _AttemptFailed("Newton did not converge", rho, self.trips)


def _check_params(cfg: StepperConfig, params: ModelParams) -> None:
    spec = params.spec_F
    if spec.sigma is None and spec.is_singular and not cfg.domain_guard:
        raise ValueError("an unregularised singular potential needs the domain guard")


def step(state: SimState, cfg: StepperConfig, params: ModelParams, tau: float | None = None):
    """Advance ``state`` by one accepted implicit-Euler step.

    Returns ``(new_state, report)``.  The step size starts at ``tau`` (default
    ``cfg.tau``) and is halved after Newton failure, a domain-guard trip or an
    energy increase beyond ``accept_energy_slack * (1 + |E|)``, down to
    ``cfg.tau_min``.
    """
    _check_params(cfg, params)
    dom = state.u.domain
    tau_req = cfg.tau if tau is None else float(tau)
    floor = min(cfg.tau_min, tau_req)
    e_before = lyapunov(state.u.values, state.w.values, dom, params)
    trial = tau_req
    retries = 0
    trips = 0
    last_res = math.nan
    reasons = []
    while True:
        solver = _Newton(state, trial, cfg, params)
        try:
            if params.mode is Mode.PHASE_FIELD:
                u, w, res = solver.solve_phase_field()
            else:
                u, w, res = solver.solve_increment()
        except _AttemptFailed as exc:
            trips += exc.trips
            last_res = exc.residual
            reasons.append(f"tau={trial:.3e}: {exc}")
        else:
            trips += solver.trips
            last_res = res
            e_after = lyapunov(u, w, dom, params)
            if e_after <= e_before + cfg.accept_energy_slack * (1.0 + abs(e_before)):
                ut = (u - state.u.values) / trial
                diss = trial * (
                    params.mobility * float(np.sum(-w * lap_array(w, dom))) * dom.cell_volume
                    + params.eta * float(np.sum(ut * ut)) * dom.cell_volume
                )
                new = SimState(state.t + trial, Field(dom, u), Field(dom, w))
                report = StepReport(
                    accepted=True,
                    newton_iters=solver.newton_iters,
                    krylov_iters_total=solver.krylov_iters,
                    tau_used=trial,
                    energy_before=e_before,
                    energy_after=e_after,
                    dissipation_increment=diss,
                    residual=res,
                    guard_trips=trips,
                    retries=retries,
                )
                return new, report
            reasons.append(f"tau={trial:.3e}: energy rose by {e_after - e_before:.3e}")
        trial *= 0.5
        retries += 1
        if trial < floor * (1.0 - 1e-12):
            raise StepFailure(
                f"step: no acceptable step down to tau_min={floor:.3e} at t={state.t:.6g} "
                f"(last residual {last_res:.3e}, {trips} guard trips); " + "; ".join(reasons[-3:]),
                last_residual=last_res,
                guard_trips=trips,
            )
        log.debug("step: retry with tau=%.3e (%s)", trial, reasons[-1])


def run(
    initial,
    cfg: StepperConfig,
    params: ModelParams,
    diagnostics_every: int = 1,
    *,
    checkpoint_every: int = 0,
    checkpoint_dir=None,
    snapshot_every: int = 0,
    snapshot_dir=None,
    record_initial: bool = True,
    step_offset: int = 0,
    keep_states: bool = True,
) -> RunResult:
    """Integrate from ``initial`` (a Field or a SimState) up to ``cfg.t_end``.

    Diagnostics are recorded every ``diagnostics_every`` accepted steps and at
    ``t_end``; the recorded states are kept in ``RunResult.states``.  On
    :class:`StepFailure` the partial result is attached to the exception.
    """
    if diagnostics_every < 1:
        raise ValueError("diagnostics_every must be >= 1")
    if isinstance(initial, SimState):
        state = initial
        ut0 = np.zeros(state.u.domain.shape)
    else:
        state = initial_state(initial, params)
        ut0 = initial_rate(initial, params)
    series = DiagnosticsSeries(params.mobility, params.eta, params.sigma_pf)
    result = RunResult([], series)
    if record_initial:
        series.append(observe(state.t, state.u, state.w, ut0, params))
        result.states.append(state)
    t_end = cfg.t_end
    n = step_offset
    tiny = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - tiny:
        remaining = t_end - state.t
        last = remaining <= cfg.tau * (1.0 + 1e-9)
        # a remainder equal to tau up to round-off keeps the nominal step, so
        # a run stopped at t_end and resumed matches the uninterrupted one
        tau_try = remaining if last and remaining < cfg.tau * (1.0 - 1e-9) else cfg.tau
        try:
            new, rep = step(state, cfg, params, tau_try)
        except StepFailure as exc:
            if not result.states or result.states[-1] is not state:
                result.states.append(state)
            exc.partial = result
            raise
        if last and rep.tau_used == tau_try:
            new = SimState(t_end, new.u, new.w)
        ut = (new.u.values - state.u.values) / rep.tau_used
        state = new
        n += 1
        result.reports.append(rep)
        at_end = state.t >= t_end - tiny
        if n % diagnostics_every == 0 or at_end:
            series.append(observe(state.t, state.u, state.w, ut, params, rep.newton_iters, rep.tau_used))
            if keep_states or at_end:
                result.states.append(state)
        if checkpoint_every and n % checkpoint_every == 0:
            write_checkpoint(os.path.join(checkpoint_dir, f"checkpoint_{n:06d}.chkp"),
                             state.t, cfg.tau, state.u, state.w)
        if snapshot_every and n % snapshot_every == 0:
            write_snapshot(state.u, os.path.join(snapshot_dir, f"u_{n:06d}.snap"), state.t)
    if not result.states or result.states[-1] is not state:
        result.states.append(state)
    return result


# ---------------------------------------------------------------------------
# explicit oracle
# ---------------------------------------------------------------------------


def explicit_oracle(initial: Field, tau_tiny: float, t_end: float, params: ModelParams) -> Field:
    """Classical RK4 for ``u_t = MΔw(u)``; viscous terms enter through
    ``(I - ηMΔ) u_t = MΔ μ(u)`` solved in the transform basis."""
    if params.mode is Mode.PHASE_FIELD:
        raise ValueError("the explicit oracle covers the sixth- and fourth-order systems only")
    if not tau_tiny > 0:
        raise ValueError("tau_tiny must be > 0")
    dom = initial.domain
    shape = dom.shape
    M, eta, delta = params.mobility, params.eta, params.delta
    spec, spec_a = params.spec_F, params.spec_a
    # the oracle runs for ~1e5 steps on small grids: work on flat vectors with
    # a sparse Laplacian to keep per-call overhead down
    L = laplacian_matrix(dom)
    last_J = [None]

    def mu(u):
        if spec.sigma is None:
            f = potential_f(spec, u)
        else:
            # consecutive stages are close: warm-start the resolvent
            J = resolvent(spec, spec.sigma, u, guess=last_J[0])
            last_J[0] = J
            f = (u - J) * (1.0 / spec.sigma) - spec.lam * u
        if spec_a.is_constant:
            out = (L @ u) * (-spec_a.c0)
        else:
            out = calA_array(u.reshape(shape), dom, spec_a).ravel()
        if delta:
            out += delta * (L @ (L @ u))
        out += f
        return out

    if eta:
        mult = -M * dom.symbol / (1.0 + eta * M * dom.symbol)

        def rhs(u):
            return dom.apply_multiplier(mu(u).reshape(shape), mult).ravel()
    else:

        def rhs(u):
            return (L @ mu(u)) * M

    u = initial.values.ravel().copy()
    if t_end <= 0:
        return Field(dom, u.reshape(shape))
    n = max(1, math.ceil(t_end / tau_tiny - 1e-9))
    dt = t_end / n
    bound = 1e6 * max(1.0, float(np.max(np.abs(u))))
    for _ in range(n):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.max(np.abs(u)) <= bound:  # also catches NaN
            raise Instability(f"explicit oracle blew up (dt={dt:.3e})")
    return Field(dom, u.reshape(shape))


def oracle_initial_step(domain, params: ModelParams) -> float:
    h = min(domain.spacing)
    if params.mode is Mode.SIXTH:
        return h**6 / (64.0 * params.delta * params.mobility)
    return h**4 * min(1.0, 1.0 / params.spec_a.a_high) / (16.0 * params.mobility)


def stable_explicit_oracle(initial: Field, t_end: float, params: ModelParams, max_halvings: int = 20):
    """Run the oracle from the default step, halving on blow-up.

    Returns ``(field, dt_used)``.
    """
    dt = oracle_initial_step(initial.domain, params)
    for _ in range(max_halvings + 1):
        try:
            return explicit_oracle(initial, dt, t_end, params), dt
        except (Instability, DomainViolation, ResolventFailure):
            dt *= 0.5
    raise Instability("explicit oracle unstable after all halvings")

"""
Built-in invariant suite behind ``chnl check``.

Each check runs on a small fixed scenario and returns ``(ok, detail)``; on
failure ``detail`` carries the first counterexample.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .config import parse_text, serialize
from .diagnostics import DpggWeight, dispersion_check, dpgg_identity_residual, energy_equality_residual
from .energetics import (
    CoefficientSpec,
    PotentialSpec,
    check_uniqueness_regime,
    coefficient_a,
    coefficient_aprime,
    coefficient_asecond,
    energy,
    monotone_F,
    monotone_f,
    moreau_F,
    phi_inverse,
    phi_transform,
    yosida_f,
)
from .errors import FormatError
from .grid import BC, Domain, Field, inv_lap_array, lap_array
from .io import read_checkpoint, read_snapshot, write_checkpoint, write_snapshot
from .model import (Constant, Mode, ModelParams, SeededNoise, SimState, initial_state, make_initial, residual,
                    static_potential_array)
from .stepper import StepperConfig, run, step

__all__ = ["CheckResult", "CHECKS", "run_checks"]

SIGMAS = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    ok: bool
    detail: str
    seconds: float


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def _domains():
    return [Domain((32,), (1.0,), BC.NOFLUX), Domain((16, 12), (1.0, 0.75), BC.PERIODIC),
            Domain((8, 8, 6), (1.0, 1.0, 0.75), BC.NOFLUX)]


# -- grid ---------------------------------------------------------------------


def grid_divergence():
    for dom in _domains():
        f = _rng(1).standard_normal(dom.shape)
        s = float(np.sum(lap_array(f, dom)) * dom.cell_volume)
        bound = 1e-12 * np.max(np.abs(f)) * dom.volume / min(dom.spacing) ** 2
        if abs(s) > bound:
            return False, f"{dom.cells} {dom.bc.name}: ∫Δf = {s:.3e} > {bound:.3e}"
    return True, "∫Δf = 0 on random fields"


def grid_self_adjoint():
    for dom in _domains():
        f, g = _rng(2).standard_normal((2,) + dom.shape)
        a = float(np.sum(lap_array(f, dom) * g))
        b = float(np.sum(f * lap_array(g, dom)))
        neg = float(np.sum(f * lap_array(f, dom)))
        if abs(a - b) > 1e-12 * max(abs(a), 1.0) * 100 or neg > 0:
            return False, f"{dom.cells}: <Δf,g>={a:.6e} <f,Δg>={b:.6e} <f,Δf>={neg:.3e}"
    return True, "Δ symmetric and nonpositive"


def grid_inverse():
    for dom in _domains():
        f = _rng(3).standard_normal(dom.shape)
        f -= f.mean()
        err = float(np.max(np.abs(-lap_array(inv_lap_array(f, dom), dom) - f)))
        if err > 1e-10:
            return False, f"{dom.cells}: |-Δ(-Δ)^-1 f - f| = {err:.3e}"
    return True, "inverse Laplacian roundtrip <= 1e-10"


def grid_order():
    errs = []
    for n in (32, 128):
        dom = Domain((n,), (1.0,), BC.NOFLUX)
        x = dom.coordinates()[0]
        f = np.cos(np.pi * x)
        errs.append(float(np.max(np.abs(lap_array(f, dom) + np.pi**2 * f))))
    order = np.log(errs[0] / errs[1]) / np.log(4.0)
    return 1.8 <= order <= 2.2, f"observed order {order:.3f}"


# -- energetics -----------------------------------------------------------------


def yosida_lipschitz():
    spec = PotentialSpec.logarithmic()
    r = _rng(4).uniform(-3, 3, size=(2, 10_000))
    for s in SIGMAS:
        fa, fb = yosida_f(spec, s, r[0]), yosida_f(spec, s, r[1])
        dr = r[0] - r[1]
        slope = (fa - fb) / dr
        if np.min(slope) < -1e-9 or np.max(slope) > (1 + 1e-9) / s:
            i = int(np.argmax(np.abs(slope - 0.5 / s)))
            return False, f"sigma={s}: slope {slope[i]:.6g} at r=({r[0][i]:.6g}, {r[1][i]:.6g})"
        if yosida_f(spec, s, 0.0) != 0.0:
            return False, f"sigma={s}: f_sigma(0) != 0"
    return True, "nondecreasing, 1/sigma-Lipschitz, f_sigma(0)=0"


def moreau_ordering():
    spec = PotentialSpec.logarithmic()
    r = np.linspace(-0.999, 0.999, 10_000)
    Fs = [moreau_F(spec, s, r) for s in SIGMAS]
    F0 = monotone_F(spec, r)
    for a, b, s in zip(Fs[:-1], Fs[1:], SIGMAS[1:]):
        if np.any(a > b + 1e-12):
            i = int(np.argmax(a - b))
            return False, f"F_sigma not increasing as sigma drops to {s} at r={r[i]:.6g}"
    if np.any(Fs[-1] > F0 + 1e-12):
        i = int(np.argmax(Fs[-1] - F0))
        return False, f"F_sigma > F0 at r={r[i]:.6g}"
    return True, "F_{sigma1} <= F_{sigma2} <= F0 for sigma2 <= sigma1"


def coercivity():
    spec = PotentialSpec.logarithmic()
    r = np.linspace(-3.0, 3.0, 6001)
    lam = 3.0
    c = [float(np.max(lam * r * r - moreau_F(spec, s, r))) for s in SIGMAS]
    # F_sigma increases as sigma drops, so the coarsest rung bounds the rest
    return max(c) <= c[0] + 1e-12, f"max(lam r^2 - F_sigma) = " + ", ".join(f"{x:.4g}" for x in c)


def compact_convergence():
    spec = PotentialSpec.logarithmic()
    r = np.linspace(-0.9, 0.9, 10_001)
    f0 = monotone_f(spec, r)
    errs = [float(np.max(np.abs(yosida_f(spec, s, r) - f0))) for s in SIGMAS]
    ok = all(a > b for a, b in zip(errs[:-1], errs[1:]))
    return ok, "sup|f_sigma - f0| on [-0.9,0.9]: " + ", ".join(f"{e:.3e}" for e in errs)


def controlled_derivative():
    spec = PotentialSpec.logarithmic()
    r = np.linspace(-2.0, 2.0, 10_001)
    h = 1e-6
    worst = {}
    for m in (0.1, 1.0):
        vals = []
        for s in SIGMAS:
            fp = (yosida_f(spec, s, r + h) - yosida_f(spec, s, r - h)) / (2 * h)
            vals.append(max(0.0, -float(np.min(fp - m * np.abs(yosida_f(spec, s, r))))))
        worst[m] = vals
    # C_m(sigma) must stay below one constant fixed by the coarsest rung;
    # a bound that blows up like 1/sigma grows tenfold per rung
    ok = all(max(v) <= 2.0 * (1.0 + v[0]) for v in worst.values())
    return ok, "; ".join(f"C_{m}: " + ", ".join(f"{x:.3g}" for x in v) for m, v in worst.items())


def extension_regularity():
    spec = CoefficientSpec.even_quadratic(1.0, 0.5)
    h = 1e-9  # small enough that a''' * 2h stays far below the jump tolerance
    for fn in (coefficient_a, coefficient_aprime, coefficient_asecond):
        for p in (-2.0, -1.0, 1.0, 2.0):
            jump = abs(float(fn(spec, p + h)) - float(fn(spec, p - h)))
            if jump > 1e-6:
                return False, f"{fn.__name__} jumps by {jump:.3e} at r={p}"
    return True, "a, a', a'' continuous at +-1, +-2"


def phi_roundtrip():
    spec = CoefficientSpec.even_quadratic(1.0, 0.5)
    r = np.linspace(-2, 2, 1000)
    err = float(np.max(np.abs(phi_inverse(spec, phi_transform(spec, r)) - r)))
    return err <= 1e-10, f"max roundtrip error {err:.3e}"


def regime_examples():
    rc = check_uniqueness_regime(CoefficientSpec.constant(1.0))
    rq = check_uniqueness_regime(CoefficientSpec.even_quadratic(1.0, 1.0))
    ok = rc.convex_a and rc.kappa == 0 and rc.unique_viscous and not rc.unique_nonviscous and not rq.unique_viscous
    return ok, f"constant: {rc}; g2=1: {rq}"


# -- model / stepper -------------------------------------------------------------


def _small_params(mode=Mode.FOURTH):
    spec = PotentialSpec.logarithmic(3.0, 1e-2)
    a = CoefficientSpec.even_quadratic(1e-3, 2e-4)
    if mode is Mode.SIXTH:
        return ModelParams(mode, spec, a, delta=1e-6)
    if mode is Mode.PHASE_FIELD:
        return ModelParams(mode, spec, a, sigma=1e-2)
    return ModelParams(mode, spec, a, epsilon=0.0)


def steady_state():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    p = _small_params()
    u0 = make_initial(Constant(0.2), dom)
    s0 = initial_state(u0, p)
    s1, rep = step(s0, StepperConfig(tau=1e-3, t_end=1e-3), p)
    r1, r2 = residual(s1, s0, 1e-3, p)
    diff = float(np.max(np.abs(s1.u.values - u0.values)))
    ok = diff == 0.0 and rep.newton_iters <= 1
    return ok, f"|u1-u0|={diff:.3e}, newton={rep.newton_iters}, |R|={np.max(np.abs(r1.values)):.1e},{np.max(np.abs(r2.values)):.1e}"


def variational_gradient():
    dom = Domain((24, 20), (1.0, 0.8), BC.NOFLUX)
    p = ModelParams(Mode.SIXTH, PotentialSpec.logarithmic(3.0, 1e-2), CoefficientSpec.quadratic(1.0, 0.2, 0.3),
                    delta=1e-3)
    rng = _rng(7)
    u = 0.4 * rng.uniform(-1, 1, dom.shape)
    d = rng.uniform(-1, 1, dom.shape)
    grad = float(np.sum(static_potential_array(u, dom, p) * d) * dom.cell_volume)
    e = lambda s: energy(Field(dom, u + s * d), p.delta, p.spec_F, p.spec_a)
    h = 1e-5
    fd = (e(h) - e(-h)) / (2 * h)
    rel = abs(fd - grad) / abs(grad)
    return rel <= 1e-7, f"<dE, d> = {grad:.10g}, centred difference {fd:.10g}, rel {rel:.1e}"


def step_residual():
    dom = Domain((48,), (1.0,), BC.NOFLUX)
    p = _small_params(Mode.SIXTH)
    s0 = initial_state(make_initial(SeededNoise(0.0, 0.3, 2), dom), p)
    s1, rep = step(s0, StepperConfig(tau=1e-4, t_end=1.0), p)
    r1, r2 = residual(s1, s0, rep.tau_used, p)
    scale = float(np.max(np.abs(s1.w.values))) + 1.0
    res = max(float(np.max(np.abs(r1.values))) * rep.tau_used, float(np.max(np.abs(r2.values)))) / scale
    return res <= 1e-8, f"scaled residual {res:.2e} after {rep.newton_iters} Newton iterations"


def mass_and_energy():
    dom = Domain((48,), (1.0,), BC.NOFLUX)
    for mode in Mode:
        p = _small_params(mode)
        res = run(make_initial(SeededNoise(0.1, 0.1, 3), dom), StepperConfig(tau=2e-4, t_end=4e-3), p)
        s = res.series
        mass = s.column("mass") + (p.sigma_pf * np.array([st.w.values.mean() for st in res.states])
                                   if p.sigma_pf else 0.0)
        e = s.column("energy") + 0.5 * p.sigma_pf * s.column("w_sq")
        dm = float(np.max(np.abs(mass - mass[0])))
        de = float(np.max(np.diff(e)))
        if dm > 1e-10 or de > 1e-9 * (1 + abs(e[0])):
            return False, f"{mode.value}: mass drift {dm:.3e}, max energy increase {de:.3e}"
    return True, "mass conserved to 1e-10 and energy nonincreasing in every mode"


def restart_determinism():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    p = _small_params()
    u0 = make_initial(SeededNoise(0.0, 0.2, 9), dom)
    cfg = StepperConfig(tau=5e-4, t_end=5e-3)
    full = run(u0, cfg, p)
    with tempfile.TemporaryDirectory() as tmp:
        half = run(u0, StepperConfig(tau=5e-4, t_end=2.5e-3), p, checkpoint_every=5, checkpoint_dir=tmp)
        t, tau, u, w = read_checkpoint(os.path.join(tmp, "checkpoint_000005.chkp"))
        rest = run(SimState(t, u, w), StepperConfig(tau=tau, t_end=5e-3), p, record_initial=False)
    ok = np.array_equal(rest.final.u.values, full.final.u.values) and half.final.t == t
    return ok, "checkpoint restart bit-identical" if ok else "restart differs from uninterrupted run"


# -- diagnostics ---------------------------------------------------------------


def energy_residual_start():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    p = _small_params()
    res = run(make_initial(SeededNoise(0.0, 0.2, 1), dom), StepperConfig(tau=5e-4, t_end=2e-3), p)
    r = energy_equality_residual(res.series)
    return r[0] == 0.0, f"r(0) = {r[0]:.3e}, max r = {r.max():.3e}"


def dpgg_order():
    res = []
    for n in (16, 32, 64):
        dom = Domain((n, n), (1.0, 1.0), BC.PERIODIC)
        x, y = dom.coordinates()
        z = Field(dom, np.sin(2 * np.pi * x + 0.3) * np.sin(2 * np.pi * y + 1.1) + 0.2)
        res.append(dpgg_identity_residual(z, DpggWeight.power(2)))
    order = float(np.polyfit(np.log([16, 32, 64]), np.log(res), 1)[0]) * -1
    return 1.6 <= order <= 2.4, f"observed order {order:.3f}"


def dispersion_small():
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, PotentialSpec.linear(1.0), CoefficientSpec.constant(1.0))
    rows = dispersion_check(p, dom, modes=(1,), steps=200)
    return rows[0].rel_err <= 1e-2, f"k=pi: mu={rows[0].mu_numeric:.4f}, analytic {rows[0].mu_analytic:.4f}"


# -- cli / io ------------------------------------------------------------------


def config_roundtrip():
    cfg = parse_text("mode = sixth\ncells = 32,16\ndelta = 1e-4\nsigma = 1e-2\ncoefficient = even_quadratic\ng2 = 0.3\n")
    again = parse_text(serialize(cfg))
    return again == cfg, "parse(serialize(c)) == c"


def file_roundtrip():
    dom = Domain((8, 6), (1.0, 2.0), BC.PERIODIC)
    u = Field(dom, _rng(5).standard_normal(dom.shape))
    w = Field(dom, _rng(6).standard_normal(dom.shape))
    with tempfile.TemporaryDirectory() as tmp:
        sp = os.path.join(tmp, "u.snap")
        cp = os.path.join(tmp, "c.chkp")
        write_snapshot(u, sp, 0.25)
        v, t = read_snapshot(sp)
        write_checkpoint(cp, 0.5, 1e-3, u, w)
        t2, tau, u2, w2 = read_checkpoint(cp)
        with open(sp, "rb") as fh:
            data = fh.read()
        with open(sp, "wb") as fh:
            fh.write(data[:-3])
        try:
            read_snapshot(sp)
            truncated = False
        except FormatError:
            truncated = True
    ok = (np.array_equal(v.values, u.values) and v.domain == dom and t == 0.25 and t2 == 0.5 and tau == 1e-3
          and np.array_equal(u2.values, u.values) and np.array_equal(w2.values, w.values) and truncated)
    return ok, "snapshot/checkpoint bit-exact; truncation rejected"


CHECKS = [
    ("grid", "discrete divergence theorem", grid_divergence),
    ("grid", "self-adjoint negative Laplacian", grid_self_adjoint),
    ("grid", "inverse Laplacian roundtrip", grid_inverse),
    ("grid", "second-order Laplacian", grid_order),
    ("energetics", "Yosida monotone and Lipschitz", yosida_lipschitz),
    ("energetics", "Moreau family ordering", moreau_ordering),
    ("energetics", "sigma-uniform coercivity", coercivity),
    ("energetics", "uniform convergence on compacts", compact_convergence),
    ("energetics", "controlled-derivative bound", controlled_derivative),
    ("energetics", "C2 extension of a", extension_regularity),
    ("energetics", "phi roundtrip", phi_roundtrip),
    ("energetics", "uniqueness regime examples", regime_examples),
    ("model", "steady state is a fixed point", steady_state),
    ("model", "chemical potential is the energy gradient", variational_gradient),
    ("model", "accepted step solves the residual", step_residual),
    ("stepper", "mass conservation and energy decay", mass_and_energy),
    ("stepper", "checkpoint restart determinism", restart_determinism),
    ("diagnostics", "energy residual vanishes at t=0", energy_residual_start),
    ("diagnostics", "DPGG identity second order", dpgg_order),
    ("diagnostics", "dispersion at k=pi", dispersion_small),
    ("cli", "config roundtrip", config_roundtrip),
    ("cli", "binary formats", file_roundtrip),
]


def run_checks(select=None) -> list[CheckResult]:
    out = []
    for module, name, fn in CHECKS:
        if select and module not in select:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed property, reported with its message
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(module, name, bool(ok), detail, time.perf_counter() - t0))
    return out

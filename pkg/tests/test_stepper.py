import os

import numpy as np
import pytest

from chnl.energetics import CoefficientSpec, PotentialSpec, potential_f
from chnl.errors import StepFailure
from chnl.grid import BC, Domain, Field
from chnl.io import read_checkpoint, read_snapshot
from chnl.model import Constant, CosineMode, Mode, ModelParams, SeededNoise, SimState, initial_state, make_initial
from chnl.observables import lyapunov
from chnl.stepper import StepperConfig, explicit_oracle, oracle_initial_step, run, stable_explicit_oracle, step

LOG = PotentialSpec.logarithmic(3.0, 1e-2)
A = CoefficientSpec.even_quadratic(1e-3, 3e-4)
DOM = Domain((48,), (1.0,), BC.NOFLUX)


def params(mode, **kw):
    base = dict(delta=1e-6) if mode is Mode.SIXTH else {}
    if mode is Mode.PHASE_FIELD:
        base["sigma"] = 1e-2
    base.update(kw)
    return ModelParams(mode, LOG, A, **base)


def noise(dom=DOM, m=0.0, amp=0.2, seed=1):
    return make_initial(SeededNoise(m, amp, seed), dom)


def test_config_validation():
    assert StepperConfig(tau=1e-3, t_end=1.0).tau_min == pytest.approx(1e-3 / 1024)
    with pytest.raises(ValueError):
        StepperConfig(tau=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        StepperConfig(tau=1e-3, t_end=1.0, tau_min=1e-2)
    with pytest.raises(ValueError):
        StepperConfig(tau=1e-3, t_end=1.0, newton_tol=0.0)


def test_unguarded_singular_potential_rejected():
    p = ModelParams(Mode.FOURTH, PotentialSpec.logarithmic(3.0), A)
    s = initial_state(noise(), p)
    with pytest.raises(ValueError):
        step(s, StepperConfig(tau=1e-4, t_end=1.0, domain_guard=False), p)


def test_steady_state_does_not_move():
    for mode in Mode:
        p = params(mode)
        u0 = make_initial(Constant(0.3), DOM)
        # phase-field runs start from w = 0, so build the equilibrium pair directly
        s0 = SimState(0.0, u0, DOM.constant(float(potential_f(LOG, 0.3))))
        s1, rep = step(s0, StepperConfig(tau=1e-3, t_end=1.0), p)
        assert np.array_equal(s1.u.values, s0.u.values)
        assert rep.newton_iters <= 1 and rep.accepted
        assert s1.t == pytest.approx(1e-3)


def test_linear_cosine_decay_matches_dispersion():
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, PotentialSpec.linear(1.0), CoefficientSpec.constant(1.0))
    u0 = make_initial(CosineMode(0.0, 0.1, 1), dom)
    res = run(u0, StepperConfig(tau=2e-5, t_end=0.01), p, diagnostics_every=10**6)
    k2 = (2 * np.sin(np.pi / 128) / dom.spacing[0]) ** 2
    expected = 0.1 * np.exp(-k2 * (k2 + 1.0) * 0.01)
    amp = float(np.sum(res.final.u.values * u0.values) / np.sum(u0.values**2)) * 0.1
    assert res.final.t == 0.01
    assert amp == pytest.approx(expected, rel=1e-2)
    # with the continuous symbol the amplitude is the familiar exp(-107.28 t) decay
    assert np.exp(-np.pi**2 * (np.pi**2 + 1) * 0.01) == pytest.approx(expected / 0.1, rel=2e-3)


@pytest.mark.parametrize("mode", list(Mode), ids=lambda m: m.value)
def test_mass_energy_and_report(mode):
    p = params(mode, epsilon=0.05)
    cfg = StepperConfig(tau=2e-4, t_end=4e-3)
    res = run(noise(), cfg, p)
    u = np.array([s.u.values for s in res.states])
    w = np.array([s.w.values for s in res.states])
    mass = u.mean(axis=1) + p.sigma_pf * w.mean(axis=1)
    assert np.max(np.abs(mass - mass[0])) <= 1e-10
    lyap = [lyapunov(a, b, DOM, p) for a, b in zip(u, w)]
    for e0, e1 in zip(lyap[:-1], lyap[1:]):
        assert e1 <= e0 + cfg.accept_energy_slack * (1 + abs(e0))
    for rep in res.reports:
        assert rep.accepted
        assert rep.residual <= cfg.newton_tol
        assert rep.dissipation_increment >= 0
        assert rep.energy_after <= rep.energy_before + cfg.accept_energy_slack * (1 + abs(rep.energy_before))
    assert len(res.series) == len(res.states) == 21


def test_sixth_order_2d_mass():
    dom = Domain((16, 16), (1.0, 1.0), BC.PERIODIC)
    p = params(Mode.SIXTH)
    res = run(noise(dom, m=0.1), StepperConfig(tau=5e-4, t_end=5e-3), p)
    assert abs(res.final.u.values.mean() - 0.1) <= 1e-10
    e = res.series.column("energy")
    assert np.all(np.diff(e) <= 1e-9 * (1 + np.abs(e[:-1])))


def test_phase_field_relaxes_from_zero_potential():
    p = params(Mode.PHASE_FIELD)
    s0 = initial_state(make_initial(Constant(0.3), DOM), p)
    assert np.all(s0.w.values == 0)
    res = run(s0.u, StepperConfig(tau=1e-3, t_end=0.2), p)
    fin = res.final
    # u + sigma w is conserved, and w approaches f(u)
    assert np.allclose(fin.u.values + 0.01 * fin.w.values, 0.3, atol=1e-12)
    assert np.allclose(fin.w.values, potential_f(LOG, fin.u.values), atol=1e-6)


def test_zero_horizon():
    p = params(Mode.FOURTH)
    res = run(noise(), StepperConfig(tau=1e-3, t_end=0.0), p)
    assert len(res.states) == 1 and len(res.series) == 1 and res.final.t == 0.0


def test_last_step_lands_on_t_end():
    p = params(Mode.FOURTH)
    res = run(noise(), StepperConfig(tau=3e-4, t_end=1e-3), p)
    assert res.final.t == 1e-3
    assert [r.tau_used for r in res.reports][-1] == pytest.approx(1e-4)


def test_checkpoint_restart_is_bit_identical(tmp_path):
    p = params(Mode.SIXTH, epsilon=0.1)
    cfg = StepperConfig(tau=2e-4, t_end=4e-3)
    u0 = noise()
    full = run(u0, cfg, p, checkpoint_every=5, checkpoint_dir=str(tmp_path), snapshot_every=10,
               snapshot_dir=str(tmp_path))
    t, tau, u, w = read_checkpoint(os.path.join(tmp_path, "checkpoint_000010.chkp"))
    assert tau == cfg.tau
    rest = run(SimState(t, u, w), cfg, p, record_initial=False, step_offset=10)
    assert np.array_equal(rest.final.u.values, full.final.u.values)
    assert np.array_equal(rest.final.w.values, full.final.w.values)
    snap, ts = read_snapshot(os.path.join(tmp_path, "u_000020.snap"))
    assert np.array_equal(snap.values, full.final.u.values) and ts == full.final.t


def test_seeded_runs_are_bit_identical():
    p = params(Mode.FOURTH)
    cfg = StepperConfig(tau=2e-4, t_end=2e-3)
    a = run(noise(seed=9), cfg, p).series.to_csv()
    b = run(noise(seed=9), cfg, p).series.to_csv()
    assert a == b


def test_step_failure_keeps_partial_results():
    p = params(Mode.FOURTH)
    cfg = StepperConfig(tau=0.5, t_end=1.0, newton_max=1, tau_min=0.25)
    with pytest.raises(StepFailure) as info:
        run(noise(amp=0.5), cfg, p)
    exc = info.value
    assert exc.partial is not None and exc.partial.final.t == 0.0
    assert np.isfinite(exc.last_residual)


def test_guarded_unregularised_run_stays_inside():
    p = ModelParams(Mode.FOURTH, PotentialSpec.logarithmic(6.0), CoefficientSpec.constant(1e-3))
    res = run(noise(amp=0.2, seed=5), StepperConfig(tau=1e-4, t_end=3e-3), p)
    assert max(np.max(np.abs(s.u.values)) for s in res.states) < 1.0


# -- explicit oracle ---------------------------------------------------------------


def test_oracle_constant_state():
    p = params(Mode.FOURTH)
    u0 = make_initial(Constant(0.3), DOM)
    out = explicit_oracle(u0, 1e-7, 1e-5, p)
    assert np.allclose(out.values, 0.3, rtol=0, atol=1e-14)


def test_oracle_linear_mode_and_mass():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, PotentialSpec.linear(1.0), CoefficientSpec.constant(1.0), epsilon=0.5)
    u0 = make_initial(CosineMode(0.2, 0.1, 1), dom)
    dt = oracle_initial_step(dom, p)
    out = explicit_oracle(u0, dt, 1e-3, p)
    k2 = (2 * np.sin(np.pi / 64) / dom.spacing[0]) ** 2
    mu = -k2 * (k2 + 1) / (1 + 0.5 * k2)
    expected = 0.2 + (u0.values - 0.2) * np.exp(mu * 1e-3)
    assert abs(out.values.mean() - 0.2) <= 1e-10
    assert np.allclose(out.values, expected, atol=1e-10)


def test_oracle_agrees_with_implicit_steps():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, PotentialSpec.logarithmic(3.0, 1e-2), CoefficientSpec.constant(1e-2))
    u0 = make_initial(SeededNoise(0.0, 0.3, 4), dom)
    t_end = 2e-4
    ref, dt = stable_explicit_oracle(u0, t_end, p)
    assert dt <= oracle_initial_step(dom, p)
    errs = []
    for tau in (4e-5, 2e-5, 1e-5):
        fin = run(u0, StepperConfig(tau=tau, t_end=t_end), p, keep_states=False).final.u
        errs.append(np.max(np.abs(fin.values - ref.values)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 0.8) & (orders < 1.2))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chnl.energetics import CoefficientSpec, PotentialSpec, energy, potential_f
from chnl.errors import AmplitudeTooLarge, DomainViolation, MeanOutOfRange
from chnl.grid import BC, Domain, Field, integrate, laplacian, mean, norm_l2
from chnl.model import (
    Constant,
    CosineMode,
    Mode,
    ModelParams,
    SeededNoise,
    SimState,
    TanhInterface,
    calA,
    chemical_potential,
    initial_rate,
    initial_state,
    make_initial,
    residual,
    smooth_initial_datum,
)

LIN = PotentialSpec.linear(1.0)
ONE = CoefficientSpec.constant(1.0)


def cosine(dom, amp=0.1, k=1):
    return make_initial(CosineMode(0.0, amp, k), dom)


def test_params_invariants():
    with pytest.raises(ValueError):
        ModelParams(Mode.SIXTH, LIN, ONE)
    with pytest.raises(ValueError):
        ModelParams(Mode.FOURTH, LIN, ONE, delta=1e-3)
    with pytest.raises(ValueError):
        ModelParams(Mode.PHASE_FIELD, LIN, ONE)
    with pytest.raises(ValueError):
        ModelParams(Mode.FOURTH, LIN, ONE, mobility=0.0)
    p = ModelParams(Mode.SIXTH, LIN, ONE, delta=1e-3, epsilon=0.2, sigma=0.1)
    assert p.eta == pytest.approx(0.3) and p.sigma_pf == 0.0
    q = ModelParams(Mode.FOURTH, LIN, ONE, epsilon=0.2, sigma=0.1)
    assert q.eta == 0.2 and q.sigma_visc == 0.0
    r = ModelParams(Mode.PHASE_FIELD, LIN, ONE, sigma=0.1)
    assert r.sigma_pf == 0.1 and r.eta == 0.1


# -- calA -------------------------------------------------------------------------


def test_calA_constant_and_unit_coefficient():
    dom = Domain((16, 12), (1.0, 1.0), BC.NOFLUX)
    spec = CoefficientSpec.even_quadratic(1.0, 0.5)
    assert np.all(calA(dom.constant(0.3), spec).values == 0)
    u = Field(dom, np.random.default_rng(0).standard_normal(dom.shape))
    assert np.array_equal(calA(u, ONE).values, -laplacian(u).values)


def _calA_exact(x, amp):
    # a = 1 + u^2/2, u = amp cos(pi x): -a u'' - a'/2 u'^2
    u = amp * np.cos(np.pi * x)
    ux = -amp * np.pi * np.sin(np.pi * x)
    uxx = -np.pi**2 * u
    return -(1 + 0.5 * u * u) * uxx - 0.5 * u * ux * ux


def test_calA_second_order_against_continuous_formula():
    spec = CoefficientSpec.even_quadratic(1.0, 0.5)
    errs = []
    for n in (32, 128):
        dom = Domain((n,), (1.0,), BC.NOFLUX)
        u = cosine(dom)
        errs.append(np.max(np.abs(calA(u, spec).values - _calA_exact(dom.coordinates()[0], 0.1))))
    order = np.log(errs[0] / errs[1]) / np.log(4)
    assert 1.8 <= order <= 2.2


def test_calA_is_the_gradient_of_the_interfacial_energy():
    dom = Domain((20, 16), (1.0, 0.8), BC.NOFLUX)
    spec = CoefficientSpec.quadratic(1.0, 0.2, 0.4)
    flat = PotentialSpec.linear(0.0)
    rng = np.random.default_rng(1)
    u = Field(dom, 0.5 * rng.uniform(-1, 1, dom.shape))
    d = Field(dom, rng.uniform(-1, 1, dom.shape))
    h = 1e-5
    fd = (energy(u + h * d, 0.0, flat, spec) - energy(u - h * d, 0.0, flat, spec)) / (2 * h)
    assert integrate(calA(u, spec) * d) == pytest.approx(fd, rel=1e-7)


def test_calA_weak_form_periodic():
    # <calA(u), v> against the continuous pairing ∫ a ∇u·∇v + a'/2 |∇u|^2 v
    spec = CoefficientSpec.even_quadratic(1.0, 0.5)
    errs = []
    for n in (32, 64):
        dom = Domain((n, n), (1.0, 1.0), BC.PERIODIC)
        x, y = dom.coordinates()
        s, c = np.sin(2 * np.pi * x), np.cos(2 * np.pi * y)
        u = 0.3 * s * c
        ux, uy = 0.6 * np.pi * np.cos(2 * np.pi * x) * c, -0.6 * np.pi * s * np.sin(2 * np.pi * y)
        v = np.cos(2 * np.pi * x + 0.4) * np.cos(2 * np.pi * y + 0.2)
        vx = -2 * np.pi * np.sin(2 * np.pi * x + 0.4) * np.cos(2 * np.pi * y + 0.2)
        vy = -2 * np.pi * np.cos(2 * np.pi * x + 0.4) * np.sin(2 * np.pi * y + 0.2)
        a, ap = 1 + 0.5 * u * u, u
        exact = np.sum(a * (ux * vx + uy * vy) + 0.5 * ap * (ux * ux + uy * uy) * v) * dom.cell_volume
        got = integrate(calA(Field(dom, u), spec) * Field(dom, v))
        errs.append(abs(got - exact))
    assert abs(exact) > 0.1
    assert errs[1] < errs[0] / 3


# -- chemical potential and residual --------------------------------------------


def test_chemical_potential_of_constant_state():
    dom = Domain((16,), (1.0,))
    spec = PotentialSpec.logarithmic(3.0, 1e-2)
    p = ModelParams(Mode.SIXTH, spec, CoefficientSpec.even_quadratic(1.0, 0.3), delta=1e-3, epsilon=0.5, sigma=1e-2)
    u = dom.constant(0.4)
    w = chemical_potential(u, u, 1e-3, p)
    assert np.allclose(w.values, float(potential_f(spec, 0.4)), rtol=1e-14)
    # no dependence on tau when nothing moves
    assert np.array_equal(w.values, chemical_potential(u, u, 7.0, p).values)


def test_chemical_potential_linear_cosine():
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, PotentialSpec.linear(2.0), ONE)
    u = cosine(dom)
    k2 = (2 * np.sin(np.pi / 128) / dom.spacing[0]) ** 2
    w = chemical_potential(u, u, 1e-3, p)
    assert np.allclose(w.values, (k2 + 2.0) * u.values, atol=1e-12)


def test_chemical_potential_domain_violation():
    dom = Domain((8,), (1.0,))
    p = ModelParams(Mode.FOURTH, PotentialSpec.logarithmic(3.0), ONE)
    with pytest.raises(DomainViolation):
        chemical_potential(dom.constant(1.0), dom.constant(0.0), 1e-3, p)


def test_steady_state_residual_vanishes_and_perturbation_does_not():
    dom = Domain((16, 8), (1.0, 1.0))
    spec = PotentialSpec.logarithmic(3.0, 1e-3)
    p = ModelParams(Mode.SIXTH, spec, CoefficientSpec.even_quadratic(1.0, 0.3), delta=1e-3, epsilon=0.1, sigma=1e-3)
    u = dom.constant(-0.3)
    s = SimState(0.0, u, dom.constant(float(potential_f(spec, -0.3))))
    r1, r2 = residual(SimState(1e-3, u, s.w), s, 1e-3, p)
    assert np.max(np.abs(r1.values)) == 0.0
    assert np.max(np.abs(r2.values)) <= 1e-14
    pert = u + 1e-3 * np.random.default_rng(0).standard_normal(dom.shape)
    r1, _ = residual(SimState(1e-3, pert, s.w), s, 1e-3, p)
    assert norm_l2(r1) > 0


@pytest.mark.parametrize("delta,eps", [(0.0, 0.0), (0.0, 1.0), (1e-4, 0.0), (1e-4, 0.5)])
def test_residual_vanishes_on_exact_linear_update(delta, eps):
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    mode = Mode.SIXTH if delta else Mode.FOURTH
    p = ModelParams(mode, PotentialSpec.linear(1.0), ONE, delta=delta, epsilon=eps)
    tau = 1e-3
    u0 = cosine(dom)
    k2 = (2 * np.sin(np.pi / 128) / dom.spacing[0]) ** 2
    factor = 1.0 / (1 + tau * k2 * (delta * k2 * k2 + k2 + 1.0) / (1 + eps * k2))
    u1 = u0 * factor
    w1 = chemical_potential(u1, u0, tau, p)
    r1, r2 = residual(SimState(tau, u1, w1), SimState(0.0, u0, u0), tau, p)
    # roundoff floor of two stacked Laplacians
    floor = 64 * np.finfo(float).eps * dom.max_symbol**2 * np.max(np.abs(u0.values))
    assert np.max(np.abs(r1.values)) <= floor
    assert np.max(np.abs((u1 - u0).values)) / tau > 1e6 * floor
    assert np.max(np.abs(r2.values)) == 0.0


def test_mode_consistency():
    dom = Domain((24,), (1.0,), BC.NOFLUX)
    spec = PotentialSpec.logarithmic(3.0, 1e-2)
    a = CoefficientSpec.even_quadratic(1.0, 0.3)
    rng = np.random.default_rng(4)
    u0 = Field(dom, 0.3 * rng.uniform(-1, 1, dom.shape))
    u1 = Field(dom, u0.values + 0.01 * rng.uniform(-1, 1, dom.shape))
    w0 = Field(dom, rng.standard_normal(dom.shape))
    w1 = Field(dom, rng.standard_normal(dom.shape))
    old, new, tau = SimState(0.0, u0, w0), SimState(1e-3, u1, w1), 1e-3
    fourth = ModelParams(Mode.FOURTH, spec, a, epsilon=0.3)
    sixth = ModelParams(Mode.SIXTH, spec, a, delta=1e-3, epsilon=0.2, sigma=0.1)
    pf = ModelParams(Mode.PHASE_FIELD, spec, a, epsilon=0.2, sigma=0.1)
    f1, f2 = residual(new, old, tau, fourth)
    s1, s2 = residual(new, old, tau, sixth)
    p1, p2 = residual(new, old, tau, pf)
    bih = laplacian(laplacian(u1)).values
    assert np.allclose(s1.values, f1.values, rtol=0, atol=1e-12)
    assert np.allclose(s2.values + 1e-3 * bih, f2.values, rtol=1e-12, atol=1e-9)
    assert np.allclose(p1.values - 0.1 * (w1.values - w0.values) / tau, f1.values, atol=1e-9)
    assert np.array_equal(p2.values, f2.values)


def test_initial_rate_linear_mode():
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    p = ModelParams(Mode.FOURTH, LIN, ONE, epsilon=0.5)
    u0 = cosine(dom)
    k2 = (2 * np.sin(np.pi / 128) / dom.spacing[0]) ** 2
    mu = -k2 * (k2 + 1.0) / (1 + 0.5 * k2)
    assert np.allclose(initial_rate(u0, p), mu * u0.values, atol=1e-9)
    st0 = initial_state(u0, p)
    assert st0.t == 0.0 and np.allclose(st0.w.values, (k2 + 1.0) * u0.values + 0.5 * mu * u0.values, atol=1e-9)


# -- initial data ----------------------------------------------------------------


def test_smoothing_constant_mean_and_convergence():
    dom = Domain((64,), (1.0,), BC.NOFLUX)
    c = dom.constant(0.3)
    for order in (1, 2):
        assert np.allclose(smooth_initial_datum(c, 0.5, order).values, 0.3, rtol=0, atol=1e-15)
    u0 = make_initial(SeededNoise(0.1, 0.3, 2), dom)
    for order in (1, 2):
        gaps = []
        for s in (1e-1, 1e-2, 1e-3):
            v = smooth_initial_datum(u0, s, order)
            assert abs(mean(v) - mean(u0)) <= 1e-14
            gaps.append(norm_l2(v - u0))
        assert gaps[0] > gaps[1] > gaps[2]


def test_make_initial_kinds():
    dom = Domain((32,), (1.0,), BC.NOFLUX)
    c = make_initial(Constant(0.2), dom)
    assert np.all(c.values == 0.2)
    a = make_initial(SeededNoise(0.0, 0.05, 7), dom)
    b = make_initial(SeededNoise(0.0, 0.05, 7), dom)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, make_initial(SeededNoise(0.0, 0.05, 8), dom).values)
    cm = make_initial(CosineMode(0.0, 0.1, 1), dom)
    assert np.allclose(cm.values, 0.1 * np.cos(np.pi * dom.coordinates()[0]))
    assert abs(mean(cm)) < 1e-15
    t = make_initial(TanhInterface(0.5, 0.05), dom)
    assert t.values[0] < 0 < t.values[-1]


def test_make_initial_errors():
    dom = Domain((16,), (1.0,))
    with pytest.raises(MeanOutOfRange):
        make_initial(Constant(1.2), dom, singular=False)
    with pytest.raises(AmplitudeTooLarge):
        make_initial(SeededNoise(0.5, 0.6, 0), dom)
    # polynomial potentials have no bound
    assert make_initial(SeededNoise(0.5, 0.6, 0), dom, singular=False).is_finite()


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(0.0, 0.15), st.integers(0, 2**64 - 1))
def test_noise_mean_is_exact(m, amp, seed):
    dom = Domain((20, 6), (1.0, 1.0))
    u = make_initial(SeededNoise(m, amp, seed), dom)
    assert abs(mean(u) - m) <= 1e-15
    assert np.max(np.abs(u.values - m)) <= 2 * amp + 1e-15

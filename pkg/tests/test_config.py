import pytest
from hypothesis import given, settings, strategies as st

from chnl.config import KEYS, parse_config, parse_text, serialize, write_config
from chnl.energetics import minimal_lambda_sixth
from chnl.errors import ParseError, ValidationError
from chnl.model import Mode

BASE = "mode = fourth\ncells = 32\n"


def test_defaults():
    cfg = parse_text(BASE)
    assert cfg.bc == "noflux" and cfg.potential == "logarithmic" and cfg.lam == 0.0
    assert cfg.lengths == (1.0,) and cfg.tau_min is None and cfg.domain_guard
    p = cfg.params()
    assert p.mode is Mode.FOURTH and p.mobility == 1.0


def test_comments_case_and_blank_lines():
    cfg = parse_text("# header\n\nMODE = Sixth   # trailing\ncells=16,16\ndelta = 1e-6\nbc = PERIODIC\n")
    assert cfg.mode == "sixth" and cfg.cells == (16, 16) and cfg.bc == "periodic"
    assert cfg.domain().lengths == (1.0, 1.0)


def test_polynomial_lambda_auto():
    cfg = parse_text(BASE + "potential = polynomial\nh0 = 0.5\n")
    assert cfg.lam == pytest.approx(minimal_lambda_sixth(0.5))
    with pytest.raises(ValidationError) as info:
        parse_text(BASE + "potential = polynomial\nh0 = 0.5\nlambda = 0\n")
    assert info.value.key == "lambda,h0"


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("mode = fourth\ncells = 32\nbogus = 1\n", 3, "bogus"),
        ("mode = fourth\ncells = 32\ncells = 16\n", 3, "cells"),
        ("mode = fourth\ncells 32\n", 2, "cells 32"),
        ("mode = eighth\ncells = 32\n", 1, "mode"),
        ("mode = fourth\ncells = 32\ntau = fast\n", 3, "tau"),
        ("mode = fourth\ncells = 32\ntau = nan\n", 3, "tau"),
        ("mode = fourth\ncells = 32\ndomain_guard = maybe\n", 3, "domain_guard"),
    ],
)
def test_parse_errors_name_line_and_key(text, line, key):
    with pytest.raises(ParseError) as info:
        parse_text(text)
    assert info.value.line == line and info.value.key == key


@pytest.mark.parametrize(
    "extra, keys",
    [
        ("delta = 1e-3\n", "mode,delta"),
        ("sigma = -1\n", "sigma"),
        ("mobility = 0\n", "mobility"),
        ("tau = 0\n", "tau"),
        ("tau_min = 1\n", "tau_min,tau"),
        ("domain_guard = false\n", "sigma,domain_guard"),
        ("a0 = -1\n", "a0"),
        ("coefficient = even_quadratic\ng0 = 1\ng2 = -2\n", "g0,g2"),
        ("mean = 1.5\n", "mean"),
        ("smoothing_order = 3\n", "smoothing_order"),
        ("seed = -1\n", "seed"),
        ("lengths = 1,2\n", "lengths,cells"),
    ],
)
def test_validation_errors_name_keys(extra, keys):
    with pytest.raises(ValidationError) as info:
        parse_text(BASE + extra)
    assert info.value.key == keys


def test_missing_required_keys():
    with pytest.raises(ValidationError) as info:
        parse_text("mode = fourth\n")
    assert info.value.key == "cells"
    with pytest.raises(ValidationError):
        parse_text("mode = sixth\ncells = 32\n")
    with pytest.raises(ValidationError) as info:
        parse_text("mode = phasefield\ncells = 32\n")
    assert info.value.key == "mode,sigma"


def test_serialize_is_canonical(tmp_path):
    cfg = parse_text("mode = sixth\ncells = 24,12\nlengths = 2,1\ndelta = 1e-5\nepsilon = 0.1\n"
                     "coefficient = quadratic\na0 = 1\na1 = 0.1\na2 = -0.2\nseed = 18446744073709551615\n")
    text = serialize(cfg)
    assert parse_text(text) == cfg
    assert serialize(parse_text(text)) == text
    assert [ln.split(" = ")[0] for ln in text.splitlines()] == list(KEYS)
    path = tmp_path / "c.cfg"
    write_config(cfg, path)
    assert parse_config(path) == cfg


@settings(max_examples=40, deadline=None)
@given(
    tau=st.floats(1e-8, 1e-1),
    eps=st.floats(0, 10),
    mean=st.floats(-0.5, 0.5),
    seed=st.integers(0, 2**64 - 1),
)
def test_roundtrip_property(tau, eps, mean, seed):
    cfg = parse_text(BASE + f"tau = {tau!r}\nt_end = {10 * tau!r}\nepsilon = {eps!r}\nmean = {mean!r}\n"
                     f"amplitude = 0.1\nseed = {seed}\n")
    assert parse_text(serialize(cfg)) == cfg


def test_replace_revalidates():
    cfg = parse_text(BASE)
    assert cfg.replace(seed=7).seed == 7
    with pytest.raises(ValidationError):
        cfg.replace(tau=-1.0)


def test_sigma_sets_both_regularisations():
    cfg = parse_text(BASE + "sigma = 1e-2\n")
    p = cfg.params()
    assert p.sigma == 1e-2 and p.spec_F.sigma == 1e-2

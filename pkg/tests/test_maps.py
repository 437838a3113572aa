import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solnil.charts import sol_chart
from solnil.curves import biharmonic_residual_direct, integrate_helix, initial_state
from solnil.errors import DomainExceeded, ParseError, StepTooLarge, WrongChart
from solnil.maps import (LinearMap, bitension_numeric, case_predicates, classify, corpus_map,
                         default_probes, load_map, nil_residual_closed, parse_map,
                         random_probes, residual_closed, residual_report, sol_residual_closed,
                         tension_linear)


def sol(A1, A2, A3):
    return LinearMap.from_rows("sol", A1, A2, A3)


def nil(A1, A2, A3):
    return LinearMap.from_rows("nil", A1, A2, A3)


# entries are exact zeros or bounded away from zero: rows of size ~1e-8 sit at the
# classifier's zero tolerance, where the residual-threshold verdict is scale dependent
small = st.one_of(st.just(0.0), st.floats(0.05, 2.0), st.floats(-2.0, -0.05))


@st.composite
def linear_maps(draw, target=None):
    target = draw(st.sampled_from(["sol", "nil"])) if target is None else target
    m = draw(st.sampled_from([1, 2, 3, 5]))
    rows = draw(st.lists(st.lists(small, min_size=m, max_size=m), min_size=3, max_size=3))
    return LinearMap(np.array(rows), target)


def test_linear_map_shape_checks():
    with pytest.raises(ValueError):
        LinearMap(np.zeros((2, 3)), "sol")
    with pytest.raises(ValueError):
        LinearMap(np.zeros((3, 2)), "hyperbolic")
    phi = sol([1, 2], [3, 4], [5, 6])
    assert phi.m == 2
    np.testing.assert_allclose(phi([1, 1]), [3, 7, 11])
    with pytest.raises(ValueError):
        phi([1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(linear_maps(), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(phi, a, b):
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-1, 1, (2, phi.m))
    np.testing.assert_allclose(phi(a * x + b * y), a * phi(x) + b * phi(y), atol=1e-12)


def test_tension_examples():
    np.testing.assert_allclose(tension_linear(sol([1, 0], [0, 1], [0, 0]), [0.3, -2.0]), 0.0)
    np.testing.assert_allclose(tension_linear(sol([1, 0], [0, 0], [1, 0]), [0, 0]), [2, 0, -1])
    np.testing.assert_allclose(tension_linear(nil([0, 0], [1, 0], [0, 1]), [1.5, 0.5]), 0.0)


@settings(max_examples=40, deadline=None)
@given(linear_maps())
def test_tension_paths_agree(phi):
    x = random_probes(phi.m, 4, np.random.default_rng(3))
    closed = tension_linear(phi, x)
    contracted = tension_linear(phi, x, method="contraction")
    assert np.max(np.abs(closed - contracted)) <= 1e-10 * max(1.0, np.max(np.abs(closed)))


def test_closed_form_examples():
    np.testing.assert_allclose(sol_residual_closed(sol([1, 0], [0, 1], [0, 0]), [0.4, 0.1]), 0.0)
    np.testing.assert_allclose(sol_residual_closed(sol([1, 0], [0, 0], [1, 0]), [0, 0]), [-8, 0, -6])
    np.testing.assert_allclose(sol_residual_closed(sol([2, 0], [0, 1], [0, 0]), [0, 0]), [0, 0, 30])
    np.testing.assert_allclose(nil_residual_closed(nil([0, 0], [1, 0], [0, 1]), [0.7, 0.2]), 0.0)
    np.testing.assert_allclose(nil_residual_closed(nil([1, 0], [0, 0], [0, 1]), [0.7, 0.2]), 0.0)
    # sigma = 2 expression is -4 y1 here
    r = nil_residual_closed(nil([1, 0], [1, 0], [0, 0]), [0.5, 0.0])
    assert r[1] == pytest.approx(-2.0)


def test_closed_forms_check_target():
    with pytest.raises(WrongChart):
        sol_residual_closed(nil([1], [0], [0]), [0.0])
    with pytest.raises(WrongChart):
        nil_residual_closed(sol([1], [0], [0]), [0.0])


@pytest.mark.parametrize("method", ["auto", "fd"])
def test_bitension_examples(method):
    np.testing.assert_allclose(bitension_numeric(sol([0, 0], [0, 0], [1, 2]), [0.3, 0.1], method=method), 0.0, atol=1e-6)
    np.testing.assert_allclose(bitension_numeric(sol([1, 0], [0, 0], [1, 0]), [0, 0], method=method), [-8, 0, -6], atol=1e-5)
    np.testing.assert_allclose(bitension_numeric(nil([0, 0], [0, 0], [3, -1]), [0.5, 0.5], method=method), 0.0, atol=1e-6)


def test_bitension_step_checks():
    phi = sol([1], [0], [1])
    with pytest.raises(StepTooLarge):
        bitension_numeric(phi, [0.0], h=0.1)
    with pytest.raises(ValueError):
        bitension_numeric(phi, [0.0], h=0.0)


def test_domain_guard():
    with pytest.raises(DomainExceeded):
        tension_linear(sol([0], [0], [1]), [40.0])


@settings(max_examples=60, deadline=None)
@given(linear_maps())
def test_bitension_matches_closed_form(phi):
    x = random_probes(phi.m, 3, np.random.default_rng(7))
    closed = residual_closed(phi, x)
    generic = bitension_numeric(phi, x)
    assert np.max(np.abs(closed - generic)) <= 1e-9 * max(1.0, np.max(np.abs(closed)))


@settings(max_examples=15, deadline=None)
@given(linear_maps())
def test_fd_bitension_close_to_closed_form(phi):
    x = random_probes(phi.m, 2, np.random.default_rng(11)) * 0.5
    closed = residual_closed(phi, x)
    fd = bitension_numeric(phi, x, h=1e-3, method="fd")
    assert np.max(np.abs(closed - fd)) <= 1e-3 * max(1.0, np.max(np.abs(closed)))


@pytest.mark.parametrize("phi, case, harmonic", [
    (sol([3, 4], [5, 0], [0, 0]), "S-i", True),
    (sol([0, 0, 0], [0, 0, 0], [1, 2, 3]), "S-ii", True),
    (sol([1, 0], [0, 0], [1, 0]), "none", False),
    (nil([1, 0], [0, 1], [0, 0]), "none", False),
    (nil([0], [0], [7]), "N-ii", True),
    (nil([0, 0], [1, 0], [0, 1]), "N-i", True),
    (nil([1, 0], [0, 0], [0, 1]), "N-iii", True),
])
def test_classify_examples(phi, case, harmonic):
    v = classify(phi)
    assert v.case == case
    assert v.harmonic is harmonic and v.biharmonic is harmonic
    assert set(v.witnesses) == {"A1.A1", "A2.A2", "A3.A3", "A1.A2", "A1.A3", "A2.A3"}


def test_classify_boundary_is_tolerance_sensitive():
    # |A1|^2 - |A2|^2 = 1e-13 counts as equal, 1e-6 does not
    assert classify(sol([1.0], [math.sqrt(1 - 1e-13)], [0.0])).case == "S-i"
    assert classify(sol([1.0], [math.sqrt(1 - 1e-6)], [0.0])).case == "none"


@settings(max_examples=80, deadline=None)
@given(linear_maps())
def test_classifier_soundness_and_completeness(phi):
    v = classify(phi)
    assert (v.case != "none") == v.harmonic == v.biharmonic
    rep = residual_report(phi)
    if v.biharmonic:
        x = random_probes(phi.m, 10, np.random.default_rng(5))
        assert np.max(np.abs(residual_closed(phi, x))) <= 1e-10
        assert np.max(np.abs(tension_linear(phi, x))) <= 1e-10
    else:
        assert rep.sup_norm > 1e-8


@pytest.mark.parametrize("target", ["sol", "nil"])
@pytest.mark.parametrize("tiny", [1e-7, 1e-8, 1e-9])
def test_flags_consistent_near_zero_rows(target, tiny):
    for rows in ([[0.0], [tiny], [1.0]], [[tiny], [0.0], [1.0]], [[tiny], [tiny], [tiny]],
                 [[1.0, 0.0], [tiny, 1.0], [0.0, tiny]]):
        v = classify(LinearMap(np.array(rows), target))
        assert (v.case != "none") == v.harmonic == v.biharmonic


def test_overlapping_nil_cases():
    phi = nil([0, 0], [0, 0], [1, 1])
    literal = case_predicates(phi)
    assert literal == {"N-i": True, "N-ii": True, "N-iii": True}
    assert classify(phi).case == "N-ii"


def test_corpus_is_deterministic_and_mixed():
    a = [corpus_map("sol", i, seed=4) for i in range(40)]
    b = [corpus_map("sol", i, seed=4) for i in reversed(range(40))][::-1]
    assert all(np.array_equal(x.rows, y.rows) for x, y in zip(a, b))
    for target in ("sol", "nil"):
        verdicts = [classify(corpus_map(target, i)).biharmonic for i in range(200)]
        assert 0.1 < np.mean(verdicts) < 0.9
    assert {corpus_map("nil", i).m for i in range(100)} == {1, 2, 3, 5}


def test_default_probes():
    p = default_probes(3, seed=2)
    assert p.shape == (8, 3)
    np.testing.assert_array_equal(p[0], 0)
    np.testing.assert_array_equal(default_probes(3, seed=2), p)


def test_report_sup_norm():
    rep = residual_report(sol([1, 0], [0, 0], [1, 0]))
    assert rep.sup_norm == np.max(np.abs(rep.per_component))
    assert rep.verdict == "not_biharmonic"


def test_m1_sol_axis_map_matches_curve():
    # A = (0, 0, a)^T traces the z-axis, a geodesic, so case S-ii and a zero curve residual agree
    phi = sol([0.0], [0.0], [1.0])
    assert classify(phi).case == "S-ii"
    traj = integrate_helix(sol_chart(), 0.0, 0.0, initial_state(T=(0, 0, 1)), 3.0, 600)
    assert biharmonic_residual_direct(traj).biharmonic
    # an x-axis map is not a geodesic in Sol and not biharmonic
    assert classify(sol([1.0], [0.0], [0.0])).case == "none"


def test_parse_map(tmp_path):
    phi = parse_map('target = "nil"\nm = 2\nA1 = [1, 0]\nA2 = [0, 0]\nA3 = [0, 1]\n')
    assert phi.target == "nil" and phi.m == 2
    path = tmp_path / "map.toml"
    path.write_text('target = "sol"\nA1 = [1]\nA2 = [2]\nA3 = [3]\n')
    assert load_map(path).m == 1


@pytest.mark.parametrize("text", [
    'target = "sol"\nA1 = [1, 0]\nA2 = [0]\nA3 = [0, 1]\n',
    'target = "sol"\nA1 = [1]\nA2 = [0]\n',
    'target = "h3"\nA1 = [1]\nA2 = [0]\nA3 = [0]\n',
    'target = "sol"\nm = 3\nA1 = [1]\nA2 = [0]\nA3 = [0]\n',
    'target = "sol"\nA1 = ["a"]\nA2 = [0]\nA3 = [0]\n',
    'target = "sol"\nA1 = [1\n',
])
def test_parse_map_errors(text):
    with pytest.raises(ParseError):
        parse_map(text)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solnil.charts import euclidean_chart, nil_chart, sol_chart
from solnil.curves import (FrenetState, biharmonic_residual_direct, biharmonic_residual_frame,
                           d2_ds2, d_ds, euler_frame, frenet_apparatus, initial_state,
                           integrate_frenet, integrate_helix, read_trajectory_csv,
                           sol_condition_residual, sol_condition_terms)
from solnil.errors import (ArcLengthViolation, DomainExceeded, GeodesicDegenerate,
                           InsufficientSamples, NonOrthonormalFrame, WrongChart)

SQ = math.sqrt(0.5)
angles = st.tuples(st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi))


def test_euler_frame_is_rotation():
    f = euler_frame(0.3, 1.1, -2.0)
    np.testing.assert_allclose(f.T @ f, np.eye(3), atol=1e-14)
    assert np.linalg.det(f) == pytest.approx(1.0)


def test_initial_state_completion():
    st0 = initial_state(T=(SQ, -SQ, 0))
    np.testing.assert_allclose(st0.B, np.cross(st0.T, st0.N))
    assert st0.T @ st0.N == pytest.approx(0.0, abs=1e-15)


def test_initial_frame_checks():
    bad = FrenetState(0.0, np.zeros(3), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
    with pytest.raises(NonOrthonormalFrame):
        integrate_helix(sol_chart(), 1.0, 0.0, bad, 1.0, 10)
    left = FrenetState(0.0, np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, -1.0]))
    with pytest.raises(NonOrthonormalFrame):
        integrate_helix(sol_chart(), 1.0, 0.0, left, 1.0, 10)


def test_vertical_line_is_geodesic():
    traj = integrate_helix(sol_chart(), 0.0, 0.0, initial_state(T=(0, 0, 1)), 2.0, 200)
    np.testing.assert_allclose(traj.position[:, :2], 0.0, atol=1e-14)
    np.testing.assert_allclose(traj.position[:, 2], traj.s, atol=1e-12)


def test_diagonal_geodesic_keeps_t3_flat():
    # T3' = T1^2 - T2^2 along a Sol geodesic, and it starts at zero
    traj = integrate_helix(sol_chart(), 0.0, 0.0, initial_state(T=(SQ, SQ, 0)), 3.0, 600)
    T = traj.T
    np.testing.assert_allclose(T[:, 0] ** 2 - T[:, 1] ** 2, 0.0, atol=1e-10)
    np.testing.assert_allclose(d_ds(T[:, 2], traj.ds), T[:, 0] ** 2 - T[:, 1] ** 2, atol=1e-8)


def test_flat_circle():
    traj = integrate_helix(euclidean_chart(3), 1.0, 0.0, initial_state(), 2 * math.pi, 800)
    centre = traj.position[0] + traj.N[0]
    np.testing.assert_allclose(np.linalg.norm(traj.position - centre, axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(traj.position[-1], traj.position[0], atol=1e-8)


def test_drift_and_rk4_order():
    init = initial_state(euler=(0.4, 1.0, 0.3))
    drifts = [integrate_helix(sol_chart(), 0.8, 0.5, init, 2.0, n, reorth_every=None).drift
              for n in (100, 200, 400)]
    assert 12 < drifts[0] / drifts[1] < 20
    assert 12 < drifts[1] / drifts[2] < 20


def test_drift_bound_at_long_range():
    traj = integrate_helix(sol_chart(), 1.0, 0.3, initial_state(euler=(1.0, 0.7, 2.0)), 20.0, 8000)
    assert traj.drift <= 1e-8 * 20


def test_unit_speed():
    traj = integrate_helix(sol_chart(), 1.2, -0.4, initial_state(euler=(2.0, 2.0, 1.0)), 5.0, 1000)
    assert traj.speed_error() < 1e-6


def test_domain_exceeded():
    with pytest.raises(DomainExceeded):
        integrate_helix(sol_chart(), 0.0, 0.0, initial_state(T=(0, 0, 1)), 40.0, 400)


def test_integrate_profiles_and_negative_k():
    traj = integrate_frenet(sol_chart(), lambda s: 1 + 0.1 * s, 0.2, initial_state(), 1.0, 50)
    assert traj.k[-1] == pytest.approx(1.1)
    with pytest.raises(ValueError):
        integrate_helix(sol_chart(), -1.0, 0.0, initial_state(), 1.0, 50)


def test_difference_stencils():
    s = np.linspace(0, 1, 101)
    ds = s[1] - s[0]
    f = np.sin(3 * s)
    assert np.max(np.abs(d_ds(f, ds)[2:-2] - 3 * np.cos(3 * s)[2:-2])) < 1e-6
    assert np.max(np.abs(d2_ds2(f, ds)[2:-2] + 9 * f[2:-2])) < 1e-5
    with pytest.raises(InsufficientSamples):
        d_ds(np.zeros(4), 0.1)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0), angles)
def test_frenet_round_trip(k, tau, euler):
    traj = integrate_helix(sol_chart(), k, tau, initial_state(euler=euler), 3.0, 600)
    rec = frenet_apparatus(sol_chart(), traj.position, traj.ds)
    sl = slice(rec.margin, len(rec) - rec.margin)
    assert np.max(np.abs(rec.k[sl] - k)) < 1e-5
    assert np.max(np.abs(rec.tau[sl] - tau)) < 1e-5
    np.testing.assert_allclose(rec.T[sl], traj.T[sl], atol=1e-6)
    np.testing.assert_allclose(rec.B[sl], traj.B[sl], atol=1e-5)


def test_apparatus_flat_circle_radius():
    r = 2.5
    s = np.linspace(0, 4, 401)
    pos = np.column_stack([r * np.cos(s / r), r * np.sin(s / r), np.zeros_like(s)])
    rec = frenet_apparatus(euclidean_chart(3), pos, s[1] - s[0])
    sl = slice(rec.margin, len(rec) - rec.margin)
    np.testing.assert_allclose(rec.k[sl], 1 / r, atol=1e-6)
    np.testing.assert_allclose(rec.tau[sl], 0.0, atol=1e-6)


def test_apparatus_degenerate_and_arc_length():
    s = np.linspace(0, 1, 51)
    line = np.column_stack([np.zeros_like(s), np.zeros_like(s), s])
    rec = frenet_apparatus(sol_chart(), line, s[1] - s[0])
    assert rec.degenerate.all()
    with pytest.raises(GeodesicDegenerate):
        frenet_apparatus(sol_chart(), line, s[1] - s[0], strict=True)
    with pytest.raises(ArcLengthViolation):
        frenet_apparatus(sol_chart(), 2 * line, s[1] - s[0])


@pytest.mark.parametrize("chart", [sol_chart(), euclidean_chart(3), nil_chart()], ids=lambda c: c.name)
def test_geodesics_have_zero_residual(chart):
    traj = integrate_helix(chart, 0.0, 0.0, initial_state(euler=(0.3, 0.9, 1.7)), 4.0, 1600)
    assert biharmonic_residual_frame(traj).biharmonic
    direct = biharmonic_residual_direct(traj)
    assert direct.sup_norm < 1e-6 and direct.biharmonic
    if chart.name == "sol":
        rep = sol_condition_residual(traj)
        assert rep.biharmonic and "geodesic" in rep.flags


def test_flat_circle_residuals():
    traj = integrate_helix(euclidean_chart(3), 1.0, 0.0, initial_state(), 6.0, 1200)
    frame = biharmonic_residual_frame(traj)
    np.testing.assert_allclose(frame.per_component[:, 1], -1.0, atol=1e-12)
    direct = biharmonic_residual_direct(traj)
    np.testing.assert_allclose(direct.norms, 1.0, atol=1e-5)
    with pytest.raises(WrongChart):
        sol_condition_residual(traj)


def test_sol_helix_not_biharmonic():
    traj = integrate_helix(sol_chart(), 0.5, 0.2, initial_state(euler=(0.7, 1.2, 0.4)), 10.0, 4000)
    frame = biharmonic_residual_frame(traj)
    direct = biharmonic_residual_direct(traj)
    sol = sol_condition_residual(traj)
    assert frame.sup_norm > 0.1
    assert not frame.biharmonic and not direct.biharmonic and not sol.biharmonic
    assert direct.sup_norm / 10 <= frame.sup_norm <= 10 * direct.sup_norm


def test_frame_and_direct_agree_pointwise_on_helix():
    # in the Frenet frame the direct residual is (-3 k k', r2, r3)
    traj = integrate_frenet(sol_chart(), lambda s: 0.8 + 0.1 * math.sin(s), 0.3,
                            initial_state(euler=(1.0, 0.5, 2.0)), 6.0, 2400)
    frame = biharmonic_residual_frame(traj)
    direct = biharmonic_residual_direct(traj)
    off = (len(frame.probes) - len(direct.probes)) // 2
    fr = frame.per_component[off:off + len(direct.probes)]
    sl = slice(traj.margin + 6, len(traj) - traj.margin - 6)
    T, N, B = traj.T[sl], traj.N[sl], traj.B[sl]
    d = direct.per_component
    proj = np.column_stack([np.sum(d * T, 1), np.sum(d * N, 1), np.sum(d * B, 1)])
    np.testing.assert_allclose(proj[:, 0], -3 * fr[:, 0], atol=1e-4)
    np.testing.assert_allclose(proj[:, 1:], fr[:, 1:], atol=1e-4)


def test_sol_condition_identity_with_frame_curvature():
    # R(T,N,T,N) = 2 B3^2 - 1 and R(T,N,T,B) = -2 N3 B3 turn r2, r3 into the Sol condition
    traj = integrate_helix(sol_chart(), 0.9, 0.4, initial_state(euler=(0.2, 2.2, 1.1)), 4.0, 1600)
    frame = biharmonic_residual_frame(traj)
    sol = sol_condition_residual(traj)
    off = (len(sol.probes) - len(frame.probes)) // 2
    k = 0.9
    np.testing.assert_allclose(np.abs(frame.per_component[:, 1]) / k,
                               sol.per_component[off:off + len(frame.probes), 1], atol=1e-9)
    np.testing.assert_allclose(np.abs(frame.per_component[:, 2]) / k,
                               sol.per_component[off:off + len(frame.probes), 2], atol=1e-9)


def test_small_b3_is_never_biharmonic():
    traj = integrate_helix(sol_chart(), 0.3, 0.1, initial_state(T=(0, 0, 1), N=(1, 0, 0)), 0.5, 200)
    # B3 starts at 0 here
    if np.max(traj.B[:, 2] ** 2) < 0.5:
        assert np.min(sol_condition_residual(traj).per_component[:, 1]) > 0


def test_sol_condition_terms_formula():
    terms = sol_condition_terms(np.array([1.0]), np.array([0.0]), np.array([0.5]),
                                np.array([0.2]), np.array([0.0]), np.array([1.0]))
    np.testing.assert_allclose(terms, [[0.5, 0.0, 0.2]])


def test_trajectory_csv_round_trip(tmp_path):
    traj = integrate_helix(sol_chart(), 0.5, 0.2, initial_state(), 1.0, 100)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    s, pos = read_trajectory_csv(path)
    np.testing.assert_array_equal(s, traj.s)
    np.testing.assert_array_equal(pos, traj.position)
    assert path.read_text().splitlines()[0] == "s,x,y,z,T1,T2,T3,N1,N2,N3,B1,B2,B3,k,tau"
    assert [p.name for p in tmp_path.iterdir()] == ["traj.csv"]


def test_too_few_samples():
    traj = integrate_helix(sol_chart(), 0.5, 0.2, initial_state(), 0.1, 3)
    with pytest.raises(InsufficientSamples):
        biharmonic_residual_frame(traj)

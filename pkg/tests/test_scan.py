import math

import numpy as np
import pytest

from solnil.charts import nil_chart, sol_chart
from solnil.curves import euler_frame, initial_state, integrate_helix, sol_condition_residual
from solnil.errors import WrongChart
from solnil.scan import FLAG_DEGENERATE, FLAG_DOMAIN, FLAG_OK, helix_scan, orientation_grid

SQ = math.sqrt(0.5)


def test_orientation_grid():
    grid = orientation_grid()
    assert len(grid) == 64 and len(set(grid)) == 64
    assert all(0 < a < 2 * math.pi and 0 < b < math.pi for a, b, _ in grid)


def test_cell_matches_single_curve():
    euler = orientation_grid()[17]
    rep = helix_scan([0.7], [1.3], [euler], s_max=5.0, steps=500)
    traj = integrate_helix(sol_chart(), 0.7, 1.3, initial_state(euler=euler), 5.0, 500)
    assert rep.cells[0].residual == pytest.approx(sol_condition_residual(traj).sup_norm, rel=1e-12)


def test_single_cell_hand_substitution():
    # k = 1, tau = 0: the second condition reads 2 - 2 B3^2 and T starts horizontal
    init = initial_state(T=(SQ, -SQ, 0))
    frame = np.column_stack([init.T, init.N, init.B])
    a = math.atan2(frame[1, 2], frame[0, 2])
    b = math.acos(np.clip(frame[2, 2], -1, 1))
    c = math.atan2(frame[2, 1], -frame[2, 0])
    np.testing.assert_allclose(euler_frame(a, b, c), frame, atol=1e-12)
    rep = helix_scan([1.0], [0.0], [(a, b, c)], s_max=4.0, steps=400)
    traj = integrate_helix(sol_chart(), 1.0, 0.0, init, 4.0, 400)
    B3 = traj.B[2:-2, 2]
    assert rep.cells[0].residual >= np.max(np.abs(2 - 2 * B3**2)) - 1e-9
    assert rep.cells[0].residual > 1e-2


def test_degenerate_and_domain_flags():
    rep = helix_scan([1e-6, 1.0], [0.5], [(0.0, 0.0, 0.0)], s_max=4.0, steps=400)
    assert [c.flag for c in rep.cells] == [FLAG_DEGENERATE, FLAG_OK]
    assert rep.global_min == rep.cells[1].residual
    # starting straight down with a weak bend towards e2, the helix runs past z = -30
    down = helix_scan([0.001, 1.0], [0.0], [(0.0, math.pi / 2, 0.0)], s_max=40.0, steps=400)
    assert [c.flag for c in down.cells] == [FLAG_DOMAIN, FLAG_OK]
    assert down.global_min == down.cells[1].residual
    only = helix_scan([0.001], [0.0], [(0.0, math.pi / 2, 0.0)], s_max=40.0, steps=400)
    assert math.isnan(only.global_min) and not only.passed


def test_workers_do_not_change_output():
    args = ([0.5, 1.0, 1.5], [0.2, 0.9], orientation_grid(2))
    one = helix_scan(*args, s_max=2.0, steps=200, chunk=5, workers=1)
    many = helix_scan(*args, s_max=2.0, steps=200, chunk=5, workers=3)
    assert one.cells == many.cells


def test_scan_argument_checks():
    with pytest.raises(ValueError):
        helix_scan([], [1.0])
    with pytest.raises(ValueError):
        helix_scan([0.0], [1.0])
    with pytest.raises(WrongChart):
        helix_scan([1.0], [1.0], chart=nil_chart())


def test_scan_csv(tmp_path):
    rep = helix_scan([1.0], [1.0], [(0.0, 0.0, 0.0)], s_max=2.0, steps=200)
    path = tmp_path / "scan.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,tau,euler_a,euler_b,euler_c,min_residual,flag"
    assert len(lines) == 2 and lines[1].endswith(",ok")


def test_small_b3_cells_exceed_residual_floor():
    rep = helix_scan([0.3, 1.2], [0.1, 1.5], orientation_grid(2), s_max=3.0, steps=300)
    # with B3^2 <= 1 the second condition is at least k^2 + tau^2 - 1
    for c in rep.cells:
        assert c.residual >= c.k**2 + c.tau**2 - 1 - 1e-9

import pytest

from pdn.analyzer import (compare_schemes, influence_report, influence_set, layers_to_reach,
                          parse_report_line, theoretical_radius, write_report)
from pdn.errors import ConfigError
from pdn.network import NetworkConfig
from pdn.ring_kernels import chebyshev_ball
from pdn.trainer import init_params


def net(E, T, size=7, D=2, seed=0):
    cfg = NetworkConfig(size, size, 3, D, E, T, backbone=[(D, 3)], seed=seed)
    return cfg, init_params(cfg)


@pytest.mark.parametrize("t", [1, 2, 3])
def test_depth_only_is_singleton(t):
    cfg, p = net(0, 3)
    assert influence_set(cfg, p, (3, 2), t) == {(3, 2)}


def test_E1_t1_interior():
    cfg, p = net(1, 1)
    s = influence_set(cfg, p, (3, 3), 1)
    assert s == chebyshev_ball((3, 3), 1, (7, 7)) and len(s) == 9


def test_E2_t2_interior():
    cfg, p = net(2, 2, size=11)
    s = influence_set(cfg, p, (5, 5), 2)
    assert len(s) == 81 and s == chebyshev_ball((5, 5), 4, (11, 11))


def test_boundary_site_is_clipped():
    cfg, p = net(2, 2, size=9)
    rep = influence_report(cfg, p, (0, 1), 2)
    assert rep.match and rep.measured == chebyshev_ball((0, 1), 4, (9, 9))


def test_theoretical_radius():
    assert theoretical_radius("pdn(E=2)", 5) == 10
    assert theoretical_radius("pdn", 5, E=2) == 10
    assert theoretical_radius("lg_lstm_8", 5) == 5
    assert theoretical_radius("diagonal_bilstm", 4) == 4
    assert theoretical_radius("pdn(E=3)", 1) == 3
    assert sum(8 * e for e in range(1, 4)) == 48
    with pytest.raises(ConfigError):
        theoretical_radius("graph_lstm", 1)
    with pytest.raises(ConfigError):
        theoretical_radius("lg_lstm_8", 0)


def test_bad_site():
    cfg, p = net(1, 1)
    with pytest.raises(ConfigError):
        influence_set(cfg, p, (7, 0), 1)


def test_compare_schemes_speed_and_report(tmp_path):
    cfg2, p2 = net(2, 4, size=11)
    cfg1, p1 = net(1, 4, size=11, seed=1)
    reports = compare_schemes([("pdn(E=2)", cfg2, p2), ("lg_lstm_8", cfg1, p1)], 4)
    assert all(r.match for r in reports)
    assert layers_to_reach(reports, "pdn(E=2)", 4) == 2
    assert layers_to_reach(reports, "lg_lstm_8", 4) == 4
    again = compare_schemes([("pdn(E=2)", cfg2, p2), ("pdn(E=2)", cfg2, p2)], 2)
    assert [r.format() for r in again[:2]] == [r.format() for r in again[2:]]

    path = tmp_path / "influence.txt"
    write_report(reports, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 8
    assert lines[0] == ("scheme=pdn(E=2) t=1 site=5,5 measured_radius=2 theoretical_radius=2 "
                        "measured_count=25 match=true")
    rec = parse_report_line(lines[-1])
    assert rec["scheme"] == "lg_lstm_8" and rec["t"] == 4 and rec["measured_radius"] == 4
    assert rec["match"] is True and rec["site"] == (5, 5)


def test_param_counts_grow_with_rings():
    _, p1 = net(1, 1)
    _, p2 = net(2, 1)
    assert p2.count() > p1.count()

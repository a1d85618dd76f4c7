from byzcent.verify import SUITES, run_suites, suite_bounds, suite_geometry, suite_gradients, suite_lowerbounds


def test_geometry_suite_clean():
    rep = suite_geometry(1, 60)
    assert rep.ok, rep.lines()
    assert rep.worst["centroid_box_error"] <= 1e-12


def test_bounds_suite_clean():
    rep = suite_bounds(2, 60)
    assert rep.ok, rep.lines()
    assert rep.worst["ratio_mda"] <= 2 + 1e-6


def test_lowerbounds_suite_clean():
    rep = suite_lowerbounds(3, 20)
    assert rep.ok, rep.lines()
    assert any("d=2" in n for n in rep.notes)


def test_gradients_suite_clean():
    rep = suite_gradients(4, 20)
    assert rep.ok and rep.worst["relative_error"] <= 1e-4


def test_reports_are_deterministic():
    a = [r.lines() for r in run_suites("all", 9, 5)]
    b = [r.lines() for r in run_suites("all", 9, 5)]
    assert a == b and len(a) == len(SUITES)

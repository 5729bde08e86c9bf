import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpemba_lab.lindblad_core import ControlParams, QuenchExperiment, build_lindbladian, initial_condition
from mpemba_lab.mpemba import (
    DeltaCoefficients,
    MpembaReport,
    Multiplicity,
    Parity,
    WrongRegionError,
    _quadratic_roots,
    analyze,
    closed_form_available,
    crossing_times_region_b,
    crossing_times_region_d,
    crossing_times_region_e,
    delta_coefficients,
    find_crossings_grid,
    negative_temperature_epochs,
    observable_tracks,
    region_a1_criterion,
    scan_plane,
)
from mpemba_lab.observables import ObservableKind as K
from mpemba_lab.presets import A1_POST, D_LINE_POST, M2_LINE_POST, PRESETS
from mpemba_lab.spectrum import E_POINT, RegionTag, eigensystem, region_c_gamma

# roots of the observable difference from 40-digit expm propagation and bracketed findroot
GOLDEN_TIMES = {
    ("d-line-double", K.GroundPop): [0.31506143987512655, 1.3663239862003811],
    ("d-line-double", K.Energy): [0.25930454867157024, 0.3821384479036126],
    ("m2-line-double", K.GroundPop): [0.21782777867174316, 1.0343768782650822],
    ("e-point-double", K.GroundPop): [0.50439280210027836, 1.7763215390629642],
    ("e-point-double", K.Energy): [0.29632854710627554, 0.82968525567771549],
}

# values of the difference (copy I minus copy II) from the same oracle
GOLDEN_DELTAS = {
    ("d-line-double", K.GroundPop): [
        (0.1, 0.007470336928496047),
        (0.5, -2.7509845809171499e-5),
        (1.0, -1.156026353134155e-7),
        (2.0, 7.5806247750552357e-12),
    ],
    ("d-line-double", K.Energy): [
        (0.1, -0.005115358938773363),
        (0.5, -2.5182526914645422e-5),
        (1.0, -1.2996160019170683e-6),
        (2.0, -1.405106087816716e-10),
    ],
    ("m2-line-double", K.GroundPop): [
        (0.05, -0.014362101921210628),
        (0.2, -9.3679649937585436e-5),
        (0.5, 5.6863844539643643e-6),
    ],
    ("e-point-double", K.GroundPop): [
        (0.1, 0.029900413319535884),
        (0.5, 1.5476259861273677e-5),
        (1.0, -3.3243236662373383e-5),
    ],
    ("e-point-double", K.Energy): [
        (0.1, -0.018956437693215381),
        (0.5, 0.00055605175734478266),
        (1.0, -3.1064723655396413e-5),
    ],
}


@pytest.mark.parametrize("key", list(GOLDEN_TIMES))
def test_closed_form_times_golden(key):
    name, kind = key
    rep = analyze(PRESETS[name], kind, "closed_form")
    assert rep.method == "closed_form"
    np.testing.assert_allclose(rep.crossings, GOLDEN_TIMES[key], rtol=1e-12)


@pytest.mark.parametrize("key", list(GOLDEN_TIMES))
def test_grid_oracle_times_golden(key):
    name, kind = key
    rep = analyze(PRESETS[name], kind, "grid")
    assert rep.method == "grid_oracle"
    np.testing.assert_allclose(rep.crossings, GOLDEN_TIMES[key], rtol=1e-10)


@pytest.mark.parametrize("key", list(GOLDEN_DELTAS))
def test_delta_coefficients_golden(key):
    name, kind = key
    c = delta_coefficients(PRESETS[name], kind)
    for t, ref in GOLDEN_DELTAS[key]:
        assert c(t) == pytest.approx(ref, rel=1e-10, abs=1e-18)


def test_a1_delta_matches_expm():
    mpmath.mp.dps = 30
    exp = PRESETS["a1-multiple"]
    c = delta_coefficients(exp, K.GroundPop)
    assert c.region is RegionTag.A1
    L = mpmath.matrix(build_lindbladian(exp.post).tolist())
    dr = np.asarray(initial_condition(exp.pre_I)) - np.asarray(initial_condition(exp.pre_II))
    for t in (0.5, 3.0, 10.0):
        v = mpmath.expm(-1j * L * t) * mpmath.matrix(dr.tolist())
        assert c(t) == pytest.approx(float(mpmath.re(v[3])), abs=1e-14)


def test_region_d_labels_and_weak_second_lobe():
    rep = analyze(PRESETS["d-line-double"], K.GroundPop)
    assert rep.labels == ("Wm1", "W0")
    assert rep.classification is Multiplicity.DOUBLE and rep.parity is Parity.RESTORED


def test_delta_coefficients_region_c_rejected():
    post = ControlParams(3.0, region_c_gamma(3.0))
    with pytest.raises(WrongRegionError):
        delta_coefficients(QuenchExperiment.fixed_dissipation(1.0, 2.0, post), K.GroundPop)


def test_delta_coefficients_only_linear_observables():
    with pytest.raises(ValueError):
        delta_coefficients(PRESETS["d-line-double"], K.Entropy)


def test_wrong_region_closed_form_requests():
    with pytest.raises(WrongRegionError):
        analyze(PRESETS["a1-multiple"], K.GroundPop, "closed_form")
    c = delta_coefficients(PRESETS["e-point-double"], K.GroundPop)
    with pytest.raises(WrongRegionError):
        crossing_times_region_d(c)
    with pytest.raises(WrongRegionError):
        crossing_times_region_b(c)
    with pytest.raises(WrongRegionError):
        region_a1_criterion(c)


def test_region_b_off_the_equal_gap_line():
    exp = QuenchExperiment.fixed_dissipation(16.3, 13.4, ControlParams(6.0, 30.0))
    c = delta_coefficients(exp, K.GroundPop)
    assert c.region is RegionTag.B
    with pytest.raises(WrongRegionError):
        crossing_times_region_b(c)
    assert not closed_form_available(eigensystem(exp.post), K.GroundPop)
    assert analyze(exp, K.GroundPop).method == "grid_oracle"


@pytest.mark.parametrize("post", [D_LINE_POST, M2_LINE_POST, E_POINT])
def test_identical_copies_are_degenerate(post):
    exp = QuenchExperiment.fixed_dissipation(3.0, 3.0, post)
    for method in ("closed_form", "grid"):
        rep = analyze(exp, K.GroundPop, method)
        assert rep.degenerate and rep.count == 0 and rep.classification is Multiplicity.NONE


@given(st.floats(0.5, 25), st.floats(0.5, 25))
def test_closed_form_agrees_with_grid_on_d_line(d1, d2):
    exp = QuenchExperiment.fixed_dissipation(d1, d2, D_LINE_POST)
    for kind in (K.GroundPop, K.Energy):
        cf = analyze(exp, kind, "closed_form")
        gr = analyze(exp, kind, "grid", n=4000)
        if cf.degenerate:
            continue
        # a root beyond the grid horizon is invisible to the oracle
        horizon = 20 / eigensystem(D_LINE_POST).lambda_slow
        inside = [t for t in cf.crossings if t < horizon]
        assert len(inside) == gr.count
        np.testing.assert_allclose(inside, gr.crossings, rtol=1e-6)


@given(st.floats(0.5, 20), st.floats(0.5, 20))
def test_closed_form_agrees_with_grid_at_e_point(d1, d2):
    exp = QuenchExperiment.fixed_dissipation(d1, d2, E_POINT)
    cf = analyze(exp, K.GroundPop, "closed_form")
    gr = analyze(exp, K.GroundPop, "grid", n=4000)
    if not cf.degenerate:
        horizon = 20 / eigensystem(E_POINT).lambda_slow
        inside = [t for t in cf.crossings if t < horizon]
        assert len(inside) == gr.count
        np.testing.assert_allclose(inside, gr.crossings, rtol=1e-6)


def test_e_point_branch_labels_swap():
    def order(d1, d2):
        rep = analyze(QuenchExperiment.fixed_dissipation(d1, d2, E_POINT), K.GroundPop, "closed_form")
        assert rep.count == 2
        return rep.labels

    below = {order(5.0, 7.0), order(8.0, 10.0)}
    above = {order(7.0, 5.0), order(10.0, 8.0)}
    assert len(below) == 1 and len(above) == 1 and below != above


def test_quadratic_roots():
    r = _quadratic_roots(1.0, -3.0, 2.0)
    assert sorted(r.values()) == [1.0, 2.0] and r["+"] == 2.0
    assert _quadratic_roots(1.0, 0.0, 1.0) == {}
    assert _quadratic_roots(0.0, 2.0, -1.0) == {"lin": 0.5}
    assert _quadratic_roots(0.0, 0.0, 0.0) == {}
    # cancellation-free small root
    r = _quadratic_roots(1.0, -1e8, 1.0)
    assert r["-"] == pytest.approx(1e-8, rel=1e-15)


def test_region_d_pure_exponential_branch():
    c = DeltaCoefficients(RegionTag.D, K.GroundPop, {"alpha1": 1.0, "alpha2": 0.0, "alpha3": -0.5}, {"lam2": 1.0, "lam4": 3.0})
    rep = crossing_times_region_d(c)
    assert rep.crossings == pytest.approx((math.log(2) / 2,))


def test_double_root_is_not_a_crossing():
    # (t - 1)^2 touches zero without changing sign
    c = DeltaCoefficients(RegionTag.E, K.GroundPop, {"gamma2": 1.0, "gamma1": -2.0, "gamma0": 1.0}, {"lam": 1.0})
    assert crossing_times_region_e(c).count == 0


def test_a1_criterion():
    spec = eigensystem(A1_POST)
    c = delta_coefficients(PRESETS["a1-multiple"], K.GroundPop, spec)
    assert region_a1_criterion(c, spec)
    big = DeltaCoefficients(RegionTag.A1, K.GroundPop, {**c.values, "da2": 100.0}, c.rates)
    assert not region_a1_criterion(big)


def test_a1_grid_counts():
    exp = PRESETS["a1-multiple"]
    assert analyze(exp, K.GroundPop).count >= 3
    assert analyze(exp, K.KLDivergence).count == 0


def test_report_validation_and_labels():
    with pytest.raises(ValueError):
        MpembaReport(K.GroundPop, (2.0, 1.0), "grid_oracle")
    with pytest.raises(ValueError):
        MpembaReport(K.GroundPop, (-1.0,), "grid_oracle")
    with pytest.raises(ValueError):
        MpembaReport(K.GroundPop, (1.0,), "grid_oracle", labels=("a", "b"))
    rep = MpembaReport(K.GroundPop, (1.0, 2.0, 3.0), "grid_oracle")
    assert rep.classification is Multiplicity.MULTIPLE
    assert rep.classification_label == "multiple(3)"
    assert rep.parity is Parity.REVERSED
    assert rep.to_dict()["negative_temperature"] == [False] * 3


def test_grid_validation():
    with pytest.raises(ValueError):
        find_crossings_grid(PRESETS["d-line-double"], K.GroundPop, horizon=-1.0)
    with pytest.raises(ValueError):
        find_crossings_grid(PRESETS["d-line-double"], K.GroundPop, n=1)


def test_temperature_crossings_and_epochs():
    exp = PRESETS["d-line-thermal"]
    rep = analyze(exp, K.Temperature)
    assert rep.count >= 1 and not all(rep.flagged)
    t = np.linspace(0, 2, 2001)
    epochs = negative_temperature_epochs(t, *observable_tracks(exp, K.Temperature, t))
    assert epochs and all(a <= b for a, b in epochs)


def test_negative_temperature_epochs_runs():
    t = np.arange(6.0)
    assert negative_temperature_epochs(t, [1, -1, -1, 1, np.nan, -1], [1] * 6) == [(1.0, 2.0), (5.0, 5.0)]
    assert negative_temperature_epochs(t, [1] * 6, [1] * 6) == []


def test_scan_plane_order_and_thread_independence(monkeypatch):
    a, b = np.array([2.0, 10.0, 15.0]), np.array([3.0, 12.0])
    serial = scan_plane(D_LINE_POST, a, b, K.GroundPop, threads=1)
    monkeypatch.setenv("MPEMBA_LAB_THREADS", "4")
    parallel = scan_plane(D_LINE_POST, a, b, K.GroundPop)
    assert [(r.i, r.j) for r in serial] == [(i, j) for i in range(3) for j in range(2)]
    assert [r.report for r in serial] == [r.report for r in parallel]


def test_scan_single_cell_matches_analyze():
    row = scan_plane(D_LINE_POST, [10.0], [12.0], K.Energy)[0]
    assert row.report == analyze(PRESETS["d-line-double"], K.Energy)


def test_thread_cap_env_validation(monkeypatch):
    monkeypatch.setenv("MPEMBA_LAB_THREADS", "many")
    with pytest.raises(ValueError):
        scan_plane(D_LINE_POST, [1.0], [2.0], K.GroundPop)


def test_equal_gap_entropy_has_weak_second_crossing():
    # roots of S_I - S_II from 50-digit expm propagation; the second lobe peaks near 5e-11
    rep = analyze(PRESETS["m2-line-double"], K.Entropy)
    np.testing.assert_allclose(rep.crossings, [0.38309129555529457, 1.1308742504265433], rtol=1e-6)

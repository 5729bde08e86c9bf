"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a one-line ``[PASS]``/``[FAIL]`` verdict that is printed
in the "acceptance criteria" section of the pytest summary, then asserts.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mpemba_lab.cli import main
from mpemba_lab.evolution import default_horizon, propagate_deviations, propagate_rk4, propagate_states
from mpemba_lab.lambertw import BRANCH_POINT, WBranch, lambert_w
from mpemba_lab.lindblad_core import QuenchExperiment, initial_condition, steady_state
from mpemba_lab.mpemba import analyze, delta_coefficients, observable_tracks, region_a1_criterion, scan_plane
from mpemba_lab.observables import ObservableKind as K, evaluate
from mpemba_lab.presets import D_LINE_POST, D_LINE_SCAN, PRESETS
from mpemba_lab.selftest import REGION_POINTS, random_states
from mpemba_lab.spectrum import E_POINT, eigensystem, nonzero_eigenvalues

SQRT3 = math.sqrt(3)
TIME_BUDGET = 60.0


def verdict(n: int, title: str, ok: bool, detail: str, started: float) -> None:
    elapsed = time.perf_counter() - started
    ok = ok and elapsed < TIME_BUDGET
    line = f"[{'PASS' if ok else 'FAIL'}] AC{n:<2} {title}: {detail} ({elapsed:.2f}s)"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def golden_trajectories():
    """Both copies of every named experiment on 2000 points up to ``20/lam_slow``."""
    for name, exp in PRESETS.items():
        spec = eigensystem(exp.post)
        t = np.linspace(0.0, default_horizon(spec), 2000)
        for label, pre in (("I", exp.pre_I), ("II", exp.pre_II)):
            rho0 = initial_condition(pre)
            yield f"{name}/{label}", exp.post, spec, t, rho0


def test_ac01_propagator_fidelity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {}
    for tag, p in REGION_POINTS.items():
        spec = eigensystem(p)
        times = (0.1, 1.0, 5.0, default_horizon(spec))
        err = 0.0
        for rho0 in random_states(rng, 20):
            analytic = propagate_states(rho0, spec, times)
            for k, t in enumerate(times):
                rk4 = np.asarray(propagate_rk4(rho0, p, t, dt=1e-4))
                err = max(err, float(np.max(np.abs(analytic[k] - rk4))))
        worst[tag.value] = err
    ok = all(e <= 1e-8 for e in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(1, "analytic vs RK4 sup-norm <= 1e-8", ok, detail, t0)


def test_ac02_conservation():
    t0 = time.perf_counter()
    trace = herm = imag = 0.0
    min_eig = math.inf
    count = 0
    for _, _, spec, t, rho0 in golden_trajectories():
        s = propagate_states(rho0, spec, t)
        eg, ge, ee, gg = s.T
        trace = max(trace, float(np.max(np.abs(ee + gg - 1))))
        herm = max(herm, float(np.max(np.abs(ge - np.conj(eg)))))
        imag = max(imag, float(np.max(np.abs(ee.imag))), float(np.max(np.abs(gg.imag))))
        # smaller eigenvalue of [[ee, eg], [ge, gg]]
        r = np.sqrt(((ee - gg).real / 2) ** 2 + np.abs(eg) ** 2)
        min_eig = min(min_eig, float(np.min((ee + gg).real / 2 - r)))
        count += len(t)
    ok = trace <= 1e-10 and herm <= 1e-10 and imag <= 1e-10 and min_eig >= -1e-8
    detail = f"{count} states; trace {trace:.1e}, hermiticity {herm:.1e}, imag {imag:.1e}, min eig {min_eig:.1e}"
    verdict(2, "trace/Hermiticity/positivity", ok, detail, t0)


def test_ac03_region_d_double_crossing():
    t0 = time.perf_counter()
    exp = PRESETS["d-line-double"]
    assert exp.post.gamma_tilde == pytest.approx(math.sqrt((568 + 64 * math.sqrt(2)) / 2), rel=1e-15)
    assert (exp.pre_I.d_tilde, exp.pre_II.d_tilde) == (10.0, 12.0)
    spec = eigensystem(exp.post)
    parts, ok = [], True
    for kind in (K.GroundPop, K.Energy):
        cf = analyze(exp, kind, "closed_form", spec=spec)
        gr = analyze(exp, kind, "grid", spec=spec)
        rel = max((abs(a - b) / b for a, b in zip(cf.crossings, gr.crossings)), default=math.inf)
        ok &= cf.count == 2 and gr.count == 2 and rel <= 1e-6
        parts.append(f"{kind.value} {cf.count}/{gr.count} (rel {rel:.1e})")
    # lobe after each rho_gg crossing
    c = delta_coefficients(exp, K.GroundPop, spec)
    t1, t2 = analyze(exp, K.GroundPop, spec=spec).crossings
    lobe1 = np.max(np.abs(c(np.linspace(t1, t2, 20001))))
    lobe2 = np.max(np.abs(c(np.linspace(t2, default_horizon(spec), 20001))))
    ok &= lobe1 / lobe2 >= 10
    parts.append(f"lobe ratio {lobe1 / lobe2:.2e}")
    verdict(3, "region-D double crossing", ok, "; ".join(parts), t0)


def test_ac04_region_d_scan():
    t0 = time.perf_counter()
    a = np.linspace(*D_LINE_SCAN["d_I_range"])
    b = np.linspace(*D_LINE_SCAN["d_II_range"])
    counts = {}
    for kind in (K.GroundPop, K.Energy):
        rows = scan_plane(D_LINE_POST, a, b, kind)
        assert len(rows) == 2500
        counts[kind.value] = {m: sum(r.report.classification_label == m for r in rows) for m in ("none", "single", "double")}
    ok = counts["rho_gg"]["none"] == 0 and counts["energy"]["none"] > 0
    verdict(4, "50x50 scan: rho_gg never none, energy sometimes none", ok, str(counts), t0)


def test_ac05_thermal_crossing():
    t0 = time.perf_counter()
    exp = PRESETS["d-line-thermal"]
    assert (exp.pre_I.d_tilde, exp.pre_I.gamma_tilde, exp.pre_II.d_tilde, exp.pre_II.gamma_tilde) == (3.0, 15.0, 22.9, 2.1)
    rep = analyze(exp, K.Temperature)
    horizon = default_horizon(eigensystem(exp.post))
    good = []
    for t, flagged in zip(rep.crossings, rep.flagged):
        if flagged:
            continue
        eps = 1e-6 * horizon
        (a1, a2), (b1, b2) = (observable_tracks(exp, K.Temperature, [s]) for s in (t - eps, t + eps))
        before, after = a1[0] - a2[0], b1[0] - b2[0]
        positive = min(a1[0], a2[0], b1[0], b2[0]) > 0
        if positive and np.sign(before) == -np.sign(after) != 0:
            good.append(t)
    ok = len(good) >= 1
    detail = f"{rep.count} crossings, flagged {list(rep.flagged)}; reversal at positive T: {[f'{t:.4f}' for t in good]}"
    verdict(5, "thermal crossing with hotter->colder reversal", ok, detail, t0)


def test_ac06_region_a1_multiplicity():
    t0 = time.perf_counter()
    exp = PRESETS["a1-multiple"]
    assert (exp.post.d_tilde, exp.post.gamma_tilde, exp.pre_I.d_tilde, exp.pre_II.d_tilde) == (2.5, 0.5, 2.1, 0.51)
    spec = eigensystem(exp.post)
    counts = {k.value: analyze(exp, k, spec=spec).count for k in (K.GroundPop, K.Energy, K.Entropy)}
    crit = region_a1_criterion(delta_coefficients(exp, K.GroundPop, spec), spec)
    ok = all(c >= 3 for c in counts.values()) and crit
    verdict(6, "region-A1 multiple crossings", ok, f"counts {counts}, criterion {crit}", t0)


def test_ac07_kl_single_vs_speed_multiple():
    t0 = time.perf_counter()
    exp = PRESETS["a1-kl"]
    assert (exp.post.d_tilde, exp.post.gamma_tilde, exp.pre_I.d_tilde, exp.pre_II.d_tilde) == (2.5, 0.5, 1.0, 0.51)
    kl = analyze(exp, K.KLDivergence)
    speed = analyze(exp, K.KLSpeed)
    ok = kl.count == 1 and speed.count >= 2 and speed.crossings[0] > kl.crossings[0]
    detail = f"D_KL {kl.count} at {kl.crossings[0]:.4f}; speed {speed.count}, first at {speed.crossings[0]:.4f}"
    verdict(7, "KL crosses once, speed repeatedly and later", ok, detail, t0)


def test_ac08_equal_gap_line():
    t0 = time.perf_counter()
    exp = PRESETS["m2-line-double"]
    assert exp.post.gamma_tilde == pytest.approx(6 * math.sqrt(17), rel=1e-15)
    l2, l3, l4 = nonzero_eigenvalues(exp.post).real
    gap = abs((l4 - l3) - (l3 - l2))
    rho = analyze(exp, K.GroundPop)
    ent = analyze(exp, K.Entropy)
    ok = gap <= 1e-9 and rho.count == 2 and ent.count == 1
    detail = (
        f"gap mismatch {gap:.1e}; rho_gg {rho.count} crossings; "
        f"entropy {ent.count} crossings at {[f'{t:.4f}' for t in ent.crossings]}"
    )
    verdict(8, "equal-gap line: rho_gg double, entropy single", ok, detail, t0)


def test_ac09_third_order_point():
    t0 = time.perf_counter()
    spec = eigensystem(E_POINT)
    eig_err = float(np.max(np.abs(spec.lambdas[1:] - 4 * SQRT3)))
    exp = PRESETS["e-point-double"]
    counts = {k.value: analyze(exp, k, spec=spec).count for k in (K.GroundPop, K.Energy, K.Entropy)}

    def order(d1, d2):
        rep = analyze(QuenchExperiment.fixed_dissipation(d1, d2, E_POINT), K.GroundPop, "closed_form", spec=spec)
        return rep.labels if rep.count == 2 else None

    probe = {(5.0, 7.0): order(5.0, 7.0), (8.0, 10.0): order(8.0, 10.0), (7.0, 5.0): order(7.0, 5.0)}
    swap = probe[(5.0, 7.0)] == probe[(8.0, 10.0)] is not None and probe[(7.0, 5.0)] == probe[(5.0, 7.0)][::-1]
    ok = eig_err <= 1e-12 and spec.residual <= 1e-10 and all(c == 2 for c in counts.values()) and swap
    detail = f"eig err {eig_err:.1e}, residual {spec.residual:.1e}, counts {counts}, probe {probe}"
    verdict(9, "third-order point", ok, detail, t0)


def test_ac10_lambert_w():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    x0 = np.concatenate([10.0 ** rng.uniform(-300, 34, 700), rng.uniform(BRANCH_POINT, 0, 300)])
    xm = -(10.0 ** rng.uniform(-33, math.log10(-BRANCH_POINT), 1000))
    worst = {}
    for branch, xs in ((WBranch.W0, x0), (WBranch.Wm1, xm)):
        w = np.array([lambert_w(branch, float(x)) for x in xs])
        worst[branch.value] = float(np.max(np.abs(w * np.exp(w) - xs) / np.abs(xs)))
    bp = max(abs(lambert_w(b, BRANCH_POINT) + 1) for b in WBranch)
    ok = all(v <= 1e-14 for v in worst.values()) and bp <= 1e-7
    verdict(10, "Lambert W round trip and branch point", ok, f"round trip {worst}, branch point {bp:.1e}", t0)


def test_ac11_kl_monotone():
    t0 = time.perf_counter()
    worst, n = -math.inf, 0
    for _, post, spec, t, rho0 in golden_trajectories():
        ss = np.asarray(steady_state(post))
        kl = evaluate(K.KLDivergence, propagate_states(rho0, spec, t), post, ss, propagate_deviations(rho0, spec, t))
        worst = max(worst, float(np.max(np.diff(kl))))
        n += 1
    ok = worst <= 1e-10
    verdict(11, "KL non-increasing on golden trajectories", ok, f"{n} trajectories, max increase {worst:.1e}", t0)


def test_ac12_selftest_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    codes = [main(["selftest", "--seed", "12", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    capsys.readouterr()
    a = (tmp_path / "a" / "selftest.json").read_bytes()
    b = (tmp_path / "b" / "selftest.json").read_bytes()
    ok = codes == [0, 0] and a == b
    verdict(12, "selftest bit-identical for equal seeds", ok, f"exit codes {codes}, identical {a == b}", t0)

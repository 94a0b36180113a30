"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.  Criterion 3 is known-failing; see the project notes for
the quantitative analysis (the pinned solver constants leave the noise-free
multilayer run short of the stated abundance-angle threshold).
"""

import itertools
import math
import time

import numpy as np
import pytest

from mlunmix import (
    LayerConfig,
    MlnmfConfig,
    SceneSpec,
    add_noise,
    demo_library,
    derive_seed,
    estimate_abundances,
    frobenius_cost,
    generate_scene,
    layer_cost,
    noise_sigma,
    qnorm,
    reconstruct,
    rms_aad,
    rms_sad,
    run_layer,
    run_mlnmf,
    sad,
    sample_noise,
    vca_endmembers,
)
from mlunmix.cli import EXIT_OK, main
from mlunmix.metrics import evaluate_matrices, match_endmembers


def report(criterion, passed, detail):
    print(f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}")
    return passed


@pytest.fixture(scope="module")
def lib():
    return demo_library()


def test_c1_property_suite():
    start = time.time()
    violations = []

    # nonnegativity, zero-locking, fixed-point, plain-NMF monotonicity
    for seed in range(100):
        rng = np.random.default_rng(seed)
        b = int(rng.integers(2, 21))
        p = int(rng.integers(1, 11))
        n = int(rng.integers(2, 31))
        a0 = rng.random((b, p)) + 1e-3
        s0 = rng.random((p, n)) + 1e-3
        x = np.maximum(a0 @ s0 + rng.normal(0, 0.05, (b, n)), 0.0)

        res = run_layer(x, a0, s0, LayerConfig(alpha0=0.0, delta=0.0, t_max=10, epsilon=0.0))
        trace = np.array(res.cost_trace)
        if not ((res.A.data >= 0).all() and (res.S.data >= 0).all()):
            violations.append(f"nonnegativity seed {seed}")
        if (np.diff(trace) > 1e-10 * max(1.0, trace[0])).any():
            violations.append(f"monotonicity seed {seed}")

        a_lock = a0.copy()
        a_lock[rng.integers(0, b), rng.integers(0, p)] = 0.0
        s_lock = s0.copy()
        s_lock[rng.integers(0, p), rng.integers(0, n)] = 0.0
        locked = run_layer(x, a_lock, s_lock, LayerConfig(t_max=5))
        if (locked.A.data[a_lock == 0] != 0).any() or (locked.S.data[s_lock == 0] != 0).any():
            violations.append(f"zero-locking seed {seed}")

        exact = run_layer(a0 @ s0, a0, s0, LayerConfig(alpha0=0.0, delta=0.0, t_max=1))
        if (np.abs(exact.A.data - a0).max() > 1e-10 * a0.max()
                or np.abs(exact.S.data - s0).max() > 1e-10 * s0.max()):
            violations.append(f"fixed-point seed {seed}")

    # qnorm properties
    rng = np.random.default_rng(1000)
    for _ in range(50):
        m1 = rng.random((3, int(rng.integers(1, 6))))
        m2 = rng.random((3, int(rng.integers(1, 6))))
        q = float(rng.uniform(0.1, 3.0))
        whole = qnorm(np.hstack([m1, m2]), q)
        if abs(whole - (qnorm(m1, q) + qnorm(m2, q))) > 1e-9 * max(1.0, whole):
            violations.append("qnorm additivity")
        if qnorm(m1, q) < 0 or (qnorm(np.zeros((2, 2)), q) != 0.0):
            violations.append("qnorm nonnegativity")

    # angle metric properties
    for _ in range(50):
        v = rng.random(8) + 0.01
        w = rng.random(8) + 0.01
        c = float(rng.uniform(0.01, 100.0))
        if abs(sad(v, c * w) - sad(v, w)) > 1e-8:
            violations.append("sad scale invariance")
        if abs(sad(v, w) - sad(w, v)) > 1e-12:
            violations.append("sad symmetry")
        if not 0.0 <= sad(v, w) <= math.pi / 2 + 1e-12:
            violations.append("sad range")

    # rms aggregates
    for _ in range(20):
        vals = rng.random(int(rng.integers(1, 10))) * 1.5
        perm = rng.permutation(vals)
        if abs(rms_sad(vals) - rms_sad(perm)) > 1e-12:
            violations.append("rms permutation invariance")
        if abs(rms_aad([0.3] * 5) - 0.3) > 1e-12:
            violations.append("rms constant")

    # matching optimality on small instances
    for trial in range(10):
        a_true = rng.random((6, 3)) + 0.02
        a_est = rng.random((6, 3)) + 0.02
        assignment = match_endmembers(a_true, a_est)
        got = sum(sad(a_true[:, assignment[j]], a_est[:, j]) for j in range(3))
        best = min(
            sum(sad(a_true[:, perm[j]], a_est[:, j]) for j in range(3))
            for perm in itertools.permutations(range(3))
        )
        if got > best + 1e-10:
            violations.append(f"matching trial {trial}")

    elapsed = time.time() - start
    passed = not violations and elapsed < 30.0
    assert report(1, passed, f"{len(violations)} violations, {elapsed:.1f}s (budget 30s)"), violations
    assert elapsed < 30.0


def test_c2_oracle_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = 0
    trials = 0
    for p in range(2, 7):
        for _ in range(10):
            trials += 1
            a_true = rng.random((12, p)) + 0.02
            a_est = rng.random((12, p)) + 0.02
            assignment = match_endmembers(a_true, a_est)
            got = sum(sad(a_true[:, assignment[j]], a_est[:, j]) for j in range(p))
            best = min(
                sum(sad(a_true[:, perm[j]], a_est[:, j]) for j in range(p))
                for perm in itertools.permutations(range(p))
            )
            if got > best + 1e-10:
                mismatches += 1

    worst_rel = 0.0
    for _ in range(20):
        b, p, n = 5, 3, 8
        x = rng.random((b, n))
        a = rng.random((b, p))
        s = rng.random((p, n))
        r_oracle = np.zeros((b, n))
        for i in range(b):
            for j in range(n):
                for k in range(p):
                    r_oracle[i, j] += a[i, k] * s[k, j]
        rel = np.abs(reconstruct(a, s) - r_oracle).max() / r_oracle.max()
        worst_rel = max(worst_rel, rel)

        alpha_a, alpha_s = 0.3, 0.6
        cost_oracle = 0.0
        for i in range(b):
            for j in range(n):
                cost_oracle += 0.5 * (x[i, j] - r_oracle[i, j]) ** 2
        cost_oracle += alpha_a * sum(math.sqrt(v) for v in a.ravel())
        cost_oracle += alpha_s * sum(math.sqrt(v) for v in s.ravel())
        got_cost = layer_cost(x, a, s, alpha_a, alpha_s)
        worst_rel = max(worst_rel, abs(got_cost - cost_oracle) / cost_oracle)

    passed = mismatches == 0 and worst_rel < 1e-12
    assert report(
        2, passed,
        f"matching mismatches {mismatches}/{trials}, worst oracle deviation {worst_rel:.2e} (tol 1e-12)",
    )


def test_c3_solvable_instance_recovery(lib):
    start = time.time()
    ok = 0
    details = []
    for k in range(20):
        truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=k))
        res = run_mlnmf(
            truth.clean_cube,
            MlnmfConfig(p=3, layers=3, layer=LayerConfig(t_max=200), seed=k),
        )
        rep = evaluate_matrices(truth.A_true.data, truth.S_true.data, res.A.data, res.S.data)
        good = rep.rms_sad < 0.15 and rep.rms_aad < 0.25
        ok += good
        details.append(f"seed {k}: sad={rep.rms_sad:.3f} aad={rep.rms_aad:.3f}")
    elapsed = time.time() - start
    passed = ok >= 18 and elapsed < 120.0
    report(3, passed, f"{ok}/20 seeds within (sad<0.15, aad<0.25), {elapsed:.0f}s (budget 120s)")
    assert elapsed < 120.0
    assert ok >= 18, "known failing; see decisions ledger for the blocking analysis\n" + "\n".join(details)


def test_c4_multilayer_benefit(lib):
    start = time.time()
    m_sad, s_sad, v_sad = [], [], []
    wins_vs_slnmf = 0
    for k in range(20):
        truth = generate_scene(lib, SceneSpec(seed=k))
        noisy, _ = add_noise(truth.clean_cube, 20.0, seed=derive_seed(k, "noise"))
        at, st_ = truth.A_true.data, truth.S_true.data
        deep = run_mlnmf(noisy, MlnmfConfig(p=6, layers=10, seed=k))
        single = run_mlnmf(noisy, MlnmfConfig(p=6, layers=1, seed=k))
        init = vca_endmembers(noisy.data, 6, derive_seed(k, "init", 1))
        fit = estimate_abundances(noisy.data, init.A0, delta=25.0)
        e_deep = evaluate_matrices(at, st_, deep.A.data, deep.S.data)
        e_single = evaluate_matrices(at, st_, single.A.data, single.S.data)
        e_vca = evaluate_matrices(at, st_, fit.A.data, fit.S.data)
        m_sad.append(e_deep.rms_sad)
        s_sad.append(e_single.rms_sad)
        v_sad.append(e_vca.rms_sad)
        wins_vs_slnmf += e_deep.rms_sad <= e_single.rms_sad
    elapsed = time.time() - start
    margin_slnmf = float(np.mean(s_sad) - np.mean(m_sad))
    margin_vca = float(np.mean(v_sad) - np.mean(m_sad))
    passed = margin_slnmf >= 0.0 and margin_vca >= 0.0 and elapsed < 1800.0
    report(
        4, passed,
        f"mean rmsSAD mlnmf={np.mean(m_sad):.4f} slnmf={np.mean(s_sad):.4f} "
        f"vca_fcls={np.mean(v_sad):.4f}; margins +{margin_slnmf:.4f}/+{margin_vca:.4f}; "
        f"mlnmf<=slnmf in {wins_vs_slnmf}/20 seeds; {elapsed:.0f}s (budget 1800s)",
    )
    assert margin_slnmf >= 0.0, "multilayer must not lose to the single layer"
    assert margin_vca >= 0.0, "multilayer must not lose to the geometric baseline"
    assert wins_vs_slnmf > 10, "multilayer should win the pairing in the majority of seeds"
    assert elapsed < 1800.0


def test_c5_noise_trend(lib):
    start = time.time()
    grid = (15.0, 20.0, 25.0, 30.0)
    means_sad, stds_sad, means_aad, stds_aad = [], [], [], []
    for snr in grid:
        sads, aads = [], []
        for k in range(10):
            truth = generate_scene(
                lib, SceneSpec(seed=derive_seed(900, "scene", f"{snr:g}", k) % 2**32)
            )
            noisy, _ = add_noise(truth.clean_cube, snr,
                                 seed=derive_seed(900, "noise", f"{snr:g}", k))
            res = run_mlnmf(noisy, MlnmfConfig(p=6, layers=10,
                                               seed=derive_seed(900, "cell", f"{snr:g}", k)))
            rep = evaluate_matrices(truth.A_true.data, truth.S_true.data,
                                    res.A.data, res.S.data)
            sads.append(rep.rms_sad)
            aads.append(rep.rms_aad)
        means_sad.append(np.mean(sads))
        stds_sad.append(np.std(sads, ddof=1))
        means_aad.append(np.mean(aads))
        stds_aad.append(np.std(aads, ddof=1))

    def trend_ok(means, stds):
        for i in range(len(means) - 1):
            pooled = math.sqrt((stds[i] ** 2 + stds[i + 1] ** 2) / 2.0)
            if means[i + 1] > means[i] + pooled:
                return False
        return True

    elapsed = time.time() - start
    sad_ok = trend_ok(means_sad, stds_sad)
    aad_ok = trend_ok(means_aad, stds_aad)
    report(
        5, sad_ok and aad_ok,
        "rmsSAD means " + "/".join(f"{m:.3f}" for m in means_sad)
        + "; rmsAAD means " + "/".join(f"{m:.3f}" for m in means_aad)
        + f"; {elapsed:.0f}s",
    )
    assert sad_ok, f"rmsSAD trend broken: {means_sad} (stds {stds_sad})"
    assert aad_ok, f"rmsAAD trend broken: {means_aad} (stds {stds_aad})"


def test_c6_noise_calibration(lib):
    truth = generate_scene(lib, SceneSpec(seed=0))  # 64x64x224 scene
    x = truth.clean_cube.data
    worst = 0.0
    for snr in (15.0, 20.0, 25.0, 30.0):
        sigma = noise_sigma(truth.clean_cube, snr)
        field = sample_noise(truth.clean_cube.bands, truth.clean_cube.pixels, sigma, seed=77)
        measured = 10.0 * math.log10(
            float((x * x).sum(axis=0).mean()) / float((field.data ** 2).sum(axis=0).mean())
        )
        worst = max(worst, abs(measured - snr))
    passed = worst <= 0.2
    assert report(6, passed, f"worst pre-clamp deviation {worst:.3f} dB (tol 0.2 dB)")


def test_c7_bench_determinism(tmp_path):
    cfg_path = tmp_path / "exp.txt"
    cfg_path.write_text(
        "rows=8\ncols=8\nblock=4\nfilter=3\np=2\nlayers=2\ntmax=15\n"
        "runs=2\nsnr_grid=inf,20\nmethods=mlnmf,slnmf,vca_fcls\nseed=11\n"
    )
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert main(["bench", str(cfg_path), "--out", str(out)]) == EXIT_OK
        outs.append(out)
    agg1 = (outs[0] / "aggregate.csv").read_bytes()
    agg2 = (outs[1] / "aggregate.csv").read_bytes()
    cells_equal = all(
        (outs[0] / "cells" / p.name).read_bytes() == p.read_bytes()
        for p in (outs[1] / "cells").iterdir()
    )
    passed = agg1 == agg2 and cells_equal
    assert report(7, passed, "two bench invocations byte-identical (aggregate and cells)")


def test_c8_cuprite_scale_documented_only():
    import pathlib

    from mlunmix.fileio import read_library, read_matrix  # the loader path exists

    readme = pathlib.Path(__file__).resolve().parent.parent / "README.md"
    text = readme.read_text(encoding="utf-8")
    documented = "0.0981" in text and "0.1047" in text and "0.1138" in text
    loaders = callable(read_library) and callable(read_matrix)
    passed = documented and loaders
    assert report(
        8, passed,
        "reference table values documented in README; matrix/library loaders available; no CI assertion",
    )

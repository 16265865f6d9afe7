"""Acceptance suite: one test per release criterion, one pass/fail line each.

Each criterion gathers all of its sub-checks before asserting so a failure
in one sub-check never hides another.  Tolerances are fixed here and are not
tuned per run.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from apscast.array_model import UlaConfig, build_function_set
from apscast.bounds_analysis import compute_bounds
from apscast.conversion import build_conversion_operator, build_gram_system
from apscast.experiments import (
    OracleSpec,
    oracle_residual,
    random_aps_model,
    run_fig1,
    run_fig2,
    run_fig3,
    synthesize_r_vector,
    two_path_model,
    write_fig1_csv,
    write_fig2_csv,
    write_fig3_csv,
)
from apscast.hilbert_space import (
    AngularFunction,
    SupportSet,
    Trig,
    inner_product,
    inner_product_quadrature,
    norm_sq,
)

HALF_PI = math.pi / 2
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def _verdict(name: str, failures: list, elapsed: float | None = None) -> None:
    status = "PASS" if not failures else f"FAIL ({len(failures)} checks)"
    suffix = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    print(f"\nACCEPTANCE {name}: {status}{suffix}")
    assert not failures, f"{name}: " + "; ".join(str(f) for f in failures[:10])


@pytest.fixture(scope="module")
def si_operator(gs_ref_si):
    return build_conversion_operator(gs_ref_si)


@pytest.fixture(scope="module")
def no_si_operator(gs_ref_no_si):
    return build_conversion_operator(gs_ref_no_si)


@pytest.fixture(scope="module")
def si_report(gs_ref_si, si_operator):
    return compute_bounds(gs_ref_si, B=1.0, op=si_operator)


@pytest.fixture(scope="module")
def no_si_report(gs_ref_no_si, no_si_operator):
    return compute_bounds(gs_ref_no_si, B=1.0, op=no_si_operator)


def _draws(c_s, count, seed):
    rng = np.random.default_rng(seed)
    return [random_aps_model(rng, c_s) for _ in range(count)]


def test_criterion_1_closed_form_vs_quadrature():
    """Every unmasked Gram/Q entry: Bessel closed form vs adaptive quadrature
    within 1e-8 absolute, N = 8, under 5 seconds."""
    failures = []
    t0 = time.perf_counter()
    cfg = UlaConfig.reference(n_antennas=8)
    fs = build_function_set(cfg)
    funcs = list(fs.uplink) + list(fs.downlink)
    worst = 0.0
    for i in range(len(funcs)):
        for j in range(i, len(funcs)):
            fast = inner_product(funcs[i], funcs[j])
            slow = inner_product_quadrature(funcs[i], funcs[j])
            d = abs(fast - slow)
            worst = max(worst, d)
            if d > 1e-8:
                failures.append(f"entry ({i},{j}) closed-form vs quadrature {d:.2e}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 5.0:
        failures.append(f"runtime {elapsed:.1f}s >= 5s")
    print(f"\n  worst closed-form/quadrature gap: {worst:.2e}")
    _verdict("criterion 1 (closed form vs quadrature)", failures, elapsed)


def test_criterion_2_residual_oracle_equivalence(reference_cfg, c_s_right):
    """Residual formula vs the 4001-point grid oracle, both constraint
    regimes, 1e-4 relative (1e-6 absolute floor for exact-zero slots),
    under 60 seconds."""
    failures = []
    t0 = time.perf_counter()
    spec = OracleSpec(grid_points=4001)
    for label, c_s in [("no-SI", None), ("SI", c_s_right)]:
        fs = build_function_set(reference_cfg, c_s)
        gs = build_gram_system(fs)
        report = compute_bounds(gs)
        worst_rel = 0.0
        for idx, g in enumerate(fs.downlink):
            a = report.per_k[idx].residual
            b = oracle_residual(g, list(gs.basis), spec, gs.pinv)
            d = abs(a - b)
            rel = d / max(a, b, 1e-300)
            worst_rel = max(worst_rel, rel if d > 1e-6 else 0.0)
            if d > 1e-6 and rel > 1e-4:
                failures.append(
                    f"{label} k={idx + 1}: formula {a:.6e} vs oracle {b:.6e} "
                    f"(rel {rel:.1e})"
                )
        print(f"\n  {label}: worst relative disagreement {worst_rel:.2e}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.1f}s >= 60s")
    _verdict("criterion 2 (residual oracle equivalence)", failures, elapsed)


def test_criterion_3_bound_validity_min_norm(
    reference_cfg, c_s_right, gs_ref_si, gs_ref_no_si,
    si_operator, no_si_operator, si_report, no_si_report,
):
    """50 seeded random unit-norm spectra supported inside C_S: every realized
    error within its own certified minimum-norm bound (+1e-7 slack).  Zero
    violations allowed."""
    failures = []
    t0 = time.perf_counter()
    fs = gs_ref_si.function_set
    worst_margin = -math.inf
    for i, aps in enumerate(_draws(c_s_right, 50, seed=3001)):
        r_u = synthesize_r_vector(aps, fs.uplink)
        r_d = synthesize_r_vector(aps, fs.downlink)
        for label, op, rep in [("no-SI", no_si_operator, no_si_report),
                               ("SI", si_operator, si_report)]:
            err = np.abs(op.A @ r_u - r_d)
            excess = err - (rep.bounds_pv0 + 1e-7)
            worst_margin = max(worst_margin, float(np.max(err - rep.bounds_pv0)))
            if np.any(excess > 0):
                k = int(np.argmax(excess))
                failures.append(
                    f"draw {i} {label}: err[k={k + 1}] = {err[k]:.3e} exceeds "
                    f"bound {rep.bounds_pv0[k]:.3e}"
                )
    print(f"\n  worst (error - bound) over all draws: {worst_margin:.2e}")
    _verdict("criterion 3 (min-norm bound validity)", failures,
             time.perf_counter() - t0)


def test_criterion_4_bound_validity_generic(
    c_s_right, gs_ref_si, gs_ref_no_si, si_operator, no_si_operator,
    si_report, no_si_report,
):
    """Perturbed estimates inside the data-consistent variety with norm <= 1:
    realized errors within the generic bound 2 residual (+1e-7), 20 seeded
    perturbations per constraint regime."""
    failures = []
    t0 = time.perf_counter()
    rng = np.random.default_rng(4001)
    for label, gs, op, rep in [
        ("no-SI", gs_ref_no_si, no_si_operator, no_si_report),
        ("SI", gs_ref_si, si_operator, si_report),
    ]:
        fs = gs.function_set
        two_n = 2 * fs.n
        q_count = gs.L - two_n
        done = 0
        draws = _draws(c_s_right, 5, seed=4002)
        while done < 20:
            aps = draws[done % len(draws)]
            r_u = synthesize_r_vector(aps, fs.uplink)
            r_d = synthesize_r_vector(aps, fs.downlink)
            rbar = np.concatenate([r_u, np.zeros(q_count)])
            alpha = gs.apply_pinv(rbar)
            est_norm_sq = float(rbar @ alpha)

            # perturbation direction: w = y - P(y) for a random smooth kernel
            y = AngularFunction(
                Trig.COSINE if rng.random() < 0.5 else Trig.SINE,
                float(rng.uniform(0.0, 60.0)),
            )
            zy = np.array([inner_product(x, y, gs.quad) for x in gs.basis])
            ay = gs.apply_pinv(zy)
            w_norm_sq = norm_sq(y, gs.quad) - float(zy @ ay)
            if w_norm_sq <= 1e-10:
                continue
            Q = op.Q_mat
            ydk = np.array([inner_product(y, g, gs.quad) for g in fs.downlink])
            w_dk = ydk - Q.T @ ay

            headroom = max(0.0, 1.0 - est_norm_sq)
            t = math.sqrt(headroom / w_norm_sq) * float(rng.uniform(0.3, 1.0))
            r_tilde = Q.T @ alpha + t * w_dk
            err = np.abs(r_tilde - r_d)
            excess = err - (rep.bounds_generic + 1e-7)
            if np.any(excess > 0):
                k = int(np.argmax(excess))
                failures.append(
                    f"{label} perturbation {done}: err[k={k + 1}] = {err[k]:.3e} "
                    f"exceeds 2B bound {rep.bounds_generic[k]:.3e}"
                )
            done += 1
    _verdict("criterion 4 (generic bound validity)", failures,
             time.perf_counter() - t0)


def test_criterion_5_support_monotonicity_and_golden(
    reference_cfg, c_s_right, no_si_report, si_report,
):
    """Support information may only shrink residuals (entrywise, +1e-9);
    the worst bound must strictly decrease; values must match the committed
    golden file to 1e-9."""
    failures = []
    t0 = time.perf_counter()

    golden_path = os.path.join(GOLDEN_DIR, "fig1_reference.json")
    with open(golden_path, "r", encoding="utf-8") as fh:
        golden = json.load(fh)
    for name, rep in [("bound_no_si", no_si_report), ("bound_si", si_report)]:
        stored = np.asarray(golden[name])
        current = rep.bounds_pv0
        if stored.shape != current.shape:
            failures.append(f"golden {name}: shape mismatch")
            continue
        d = np.max(np.abs(stored - current))
        if d > 1e-9:
            failures.append(f"golden {name}: max deviation {d:.2e} > 1e-9")

    if not si_report.bounds_pv0.max() < no_si_report.bounds_pv0.max():
        failures.append(
            f"max bound did not strictly decrease: "
            f"{si_report.bounds_pv0.max():.3e} vs {no_si_report.bounds_pv0.max():.3e}"
        )

    excess = si_report.residuals - (no_si_report.residuals + 1e-9)
    bad = np.where(excess > 0)[0]
    for k in bad:
        failures.append(
            f"monotonicity violated at k={k + 1}: SI residual "
            f"{si_report.residuals[k]:.3e} > no-SI {no_si_report.residuals[k]:.3e}"
        )
    _verdict("criterion 5 (support monotonicity + golden)", failures,
             time.perf_counter() - t0)


def test_criterion_6_exact_entries(
    reference_cfg, c_s_right, gs_ref_si, gs_ref_no_si,
    si_operator, no_si_operator, si_report, no_si_report,
):
    """Slots k=1 (real diagonal) and k=N+1 (imaginary diagonal): bound and
    realized error at most 1e-9 in every configuration."""
    failures = []
    t0 = time.perf_counter()
    n = reference_cfg.n_antennas
    configs = [
        ("reference no-SI", gs_ref_no_si, no_si_operator, no_si_report),
        ("reference SI", gs_ref_si, si_operator, si_report),
    ]
    for label, gs, op, rep in configs:
        fs = gs.function_set
        for slot_name, idx in [("k=1", 0), ("k=N+1", n)]:
            b = rep.bounds_pv0[idx]
            if b > 1e-9:
                failures.append(f"{label} {slot_name}: bound {b:.3e} > 1e-9")
        for i, aps in enumerate(_draws(c_s_right, 5, seed=6001)):
            r_u = synthesize_r_vector(aps, fs.uplink)
            r_d = synthesize_r_vector(aps, fs.downlink)
            err = np.abs(op.A @ r_u - r_d)
            for slot_name, idx in [("k=1", 0), ("k=N+1", n)]:
                if err[idx] > 1e-9:
                    failures.append(
                        f"{label} draw {i} {slot_name}: realized error "
                        f"{err[idx]:.3e} > 1e-9"
                    )
    _verdict("criterion 6 (exact diagonal entries)", failures,
             time.perf_counter() - t0)


def test_criterion_7_reciprocity_identity():
    """f_up == f_down without constraints: conversion is the identity on
    synthesized covariances to 1e-6 per entry."""
    failures = []
    t0 = time.perf_counter()
    f = 1.8e9
    c = 3.0e8
    cfg = UlaConfig(n_antennas=30, spacing=1.05 * c / (2 * f), f_up=f, f_down=f,
                    wave_speed=c)
    fs = build_function_set(cfg)
    op = build_conversion_operator(build_gram_system(fs))
    for i, aps in enumerate(_draws(SupportSet.full(), 3, seed=7001)):
        r = synthesize_r_vector(aps, fs.uplink)
        d = np.max(np.abs(op.A @ r - r))
        if d > 1e-6:
            failures.append(f"draw {i}: max deviation from identity {d:.2e}")
    _verdict("criterion 7 (reciprocity identity)", failures,
             time.perf_counter() - t0)


def test_criterion_8_reference_experiment(tmp_path, reference_cfg, c_s_right):
    """Two-path reference experiment: fig2/fig3 files produced, support
    information strictly improves the worst realized error, both estimates
    satisfy the 60 uplink data constraints to 1e-6, full pipeline under 60s."""
    failures = []
    t0 = time.perf_counter()
    fig2 = run_fig2(reference_cfg, c_s_right)
    fig3 = run_fig3(reference_cfg, c_s_right)
    write_fig2_csv(str(tmp_path / "fig2.csv"), fig2)
    write_fig3_csv(str(tmp_path / "fig3.csv"), fig3)
    for name in ("fig2.csv", "fig3.csv"):
        if not (tmp_path / name).exists():
            failures.append(f"{name} not written")

    if not fig2.errors_si.max() < fig2.errors_no_si.max():
        failures.append(
            f"support information did not reduce the worst error: "
            f"{fig2.errors_si.max():.3e} vs {fig2.errors_no_si.max():.3e}"
        )
    for label, errs in [("no-SI", fig3.constraint_errors_no_si),
                        ("SI", fig3.constraint_errors_si)]:
        worst = float(errs.max())
        if worst > 1e-6:
            failures.append(
                f"{label} estimate violates uplink constraints: max "
                f"|<rho~, g_u> - r_u| = {worst:.3e} > 1e-6"
            )
    elapsed = time.perf_counter() - t0
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.1f}s >= 60s")
    print(f"\n  max realized error: no-SI {fig2.errors_no_si.max():.3e}, "
          f"SI {fig2.errors_si.max():.3e}, leakage {fig2.leakage_norm:.2e}")
    _verdict("criterion 8 (reference experiment)", failures, elapsed)


def test_criterion_9_determinism(tmp_path, reference_cfg, c_s_right):
    """Identical configuration and seed produce byte-identical CSV output."""
    failures = []
    t0 = time.perf_counter()
    rng_draw = lambda seed: random_aps_model(
        np.random.default_rng(seed), c_s_right)

    paths = []
    for run in (1, 2):
        d = tmp_path / f"run{run}"
        d.mkdir()
        fig1 = run_fig1(reference_cfg, c_s_right)
        fig2 = run_fig2(reference_cfg, c_s_right, two_path_model())
        write_fig1_csv(str(d / "fig1.csv"), fig1)
        write_fig2_csv(str(d / "fig2.csv"), fig2)
        aps = rng_draw(9001)
        fs = build_function_set(reference_cfg, c_s_right)
        r = synthesize_r_vector(aps, fs.uplink)
        np.save(d / "r.npy", r)
        paths.append(d)

    for name in ("fig1.csv", "fig2.csv"):
        b1 = (paths[0] / name).read_bytes()
        b2 = (paths[1] / name).read_bytes()
        if b1 != b2:
            failures.append(f"{name} differs between identical runs")
    r1 = np.load(paths[0] / "r.npy")
    r2 = np.load(paths[1] / "r.npy")
    if not np.array_equal(r1, r2):
        failures.append("seeded synthesis differs between identical runs")
    _verdict("criterion 9 (determinism)", failures, time.perf_counter() - t0)

import csv
import math

import numpy as np
import pytest

from apscast.array_model import build_function_set
from apscast.bounds_analysis import (
    bound_tightened_by_support,
    compute_bounds,
    write_bounds_csv,
)
from apscast.conversion import build_conversion_operator, build_gram_system
from apscast.errors import ContractError, NumericalConsistencyError

PI = math.pi
HALF_PI = math.pi / 2


class TestComputeBounds:
    def test_exact_member_slot_one(self, gs_ref_no_si):
        """g_d[1] is the constant function and sits in the uplink span."""
        report = compute_bounds(gs_ref_no_si)
        assert report.per_k[0].residual == 0.0
        assert report.per_k[0].bound_pv0 == 0.0

    def test_zero_function_slot(self, gs_ref_no_si):
        n = gs_ref_no_si.function_set.n
        e = compute_bounds(gs_ref_no_si).per_k[n]
        assert e.residual == 0.0 and e.norm_gdk_sq == 0.0

    def test_frequency_coincidence_slots_are_exact(self, gs_ref_no_si):
        """d f_d / c = 0.525 * 19/18, so downlink slot 19 equals uplink slot 20
        exactly (lag 18 * 19/18 = 19); same on the imaginary branch."""
        report = compute_bounds(gs_ref_no_si)
        n = gs_ref_no_si.function_set.n
        assert report.per_k[18].residual == 0.0
        assert report.per_k[n + 18].residual == 0.0

    def test_mixed_magnitudes_without_support_info(self, gs_ref_no_si):
        """Grating-lobe regime: some entries certified, others O(1)."""
        r = compute_bounds(gs_ref_no_si).residuals
        assert r.min() == 0.0
        assert np.sort(r)[3] < 1e-6          # a few near-exact entries
        assert r.max() > 1.0                  # and some unrecoverable ones

    def test_bound_relationships(self, gs_ref_si):
        report = compute_bounds(gs_ref_si, B=1.0)
        np.testing.assert_array_equal(report.bounds_generic, 2.0 * report.bounds_pv0)
        np.testing.assert_array_equal(report.bounds_pv0, report.residuals)

    def test_scale_covariance_in_B(self, gs_ref_si):
        r1 = compute_bounds(gs_ref_si, B=1.0)
        r2 = compute_bounds(gs_ref_si, B=2.0)
        np.testing.assert_array_equal(r2.bounds_pv0, 2.0 * r1.bounds_pv0)
        np.testing.assert_array_equal(r2.bounds_generic, 2.0 * r1.bounds_generic)

    def test_residual_never_exceeds_norm(self, gs_ref_si):
        report = compute_bounds(gs_ref_si)
        for e in report.per_k:
            assert e.residual <= math.sqrt(e.norm_gdk_sq) + 1e-9

    def test_entry_bookkeeping(self, gs_ref_no_si):
        report = compute_bounds(gs_ref_no_si)
        n = gs_ref_no_si.function_set.n
        assert report.per_k[0].entry_kind == "real" and report.per_k[0].lag == 0
        assert report.per_k[n].entry_kind == "imag" and report.per_k[n].lag == 0
        assert report.per_k[2 * n - 1].lag == n - 1

    def test_invalid_B(self, gs_ref_no_si):
        with pytest.raises(ContractError):
            compute_bounds(gs_ref_no_si, B=0.0)

    def test_reuses_precomputed_operator(self, gs_ref_si):
        op = build_conversion_operator(gs_ref_si)
        a = compute_bounds(gs_ref_si, op=op)
        b = compute_bounds(gs_ref_si)
        np.testing.assert_array_equal(a.residuals, b.residuals)

    def test_config_hash_distinguishes_support(self, gs_ref_no_si, gs_ref_si):
        a = compute_bounds(gs_ref_no_si)
        b = compute_bounds(gs_ref_si)
        assert a.config_hash != b.config_hash
        assert a.config_hash == compute_bounds(gs_ref_no_si).config_hash


class TestChainSharpness:
    def test_error_within_spectrum_residual_times_entry_residual(
        self, gs_ref_si, rng, c_s_right,
    ):
        """The realized error also respects the sharper factored bound
        ||rho - P(rho)|| * residual_k, with the first factor computed from
        the spectrum's own inner products."""
        from apscast.experiments import random_aps_model, synthesize_r_vector
        from apscast.hilbert_space import clamp_residual_sq

        fs = gs_ref_si.function_set
        op = build_conversion_operator(gs_ref_si)
        report = compute_bounds(gs_ref_si)
        for _ in range(5):
            aps = random_aps_model(rng, c_s_right)
            r_u = synthesize_r_vector(aps, fs.uplink)
            r_d = synthesize_r_vector(aps, fs.downlink)
            err = np.abs(op.A @ r_u - r_d)
            z = np.concatenate([r_u, np.zeros(len(fs.constraints))])
            rad = clamp_residual_sq(aps.norm() ** 2 - gs_ref_si.quad_form(z))
            rho_residual = math.sqrt(rad)
            assert rho_residual <= aps.norm() + 1e-9
            assert np.all(err <= rho_residual * report.residuals + 1e-7)


class TestBoundTightening:
    def test_identical_reports_zero_deltas(self, gs_ref_no_si):
        r = compute_bounds(gs_ref_no_si)
        rows = bound_tightened_by_support(r, r)
        assert all(c.delta == 0.0 for c in rows)
        assert rows[0].k == 1

    def test_clean_system_monotone(self, small_cfg, c_s_right):
        """At 4 antennas the support-information Gram keeps every genuine
        direction, so residuals shrink entrywise."""
        gs_no = build_gram_system(build_function_set(small_cfg, None))
        gs_si = build_gram_system(build_function_set(small_cfg, c_s_right))
        rows = bound_tightened_by_support(compute_bounds(gs_no), compute_bounds(gs_si))
        assert all(c.residual_with <= c.residual_without + 1e-9 for c in rows)
        assert rows[0].residual_with == 0.0  # k = 1 stays exact

    def test_mismatched_reports_rejected(self, gs_ref_no_si, gs_small_si):
        a = compute_bounds(gs_ref_no_si)
        b = compute_bounds(gs_small_si)
        with pytest.raises(ContractError):
            bound_tightened_by_support(a, b)

    def test_different_B_rejected(self, gs_ref_no_si):
        a = compute_bounds(gs_ref_no_si, B=1.0)
        b = compute_bounds(gs_ref_no_si, B=2.0)
        with pytest.raises(ContractError):
            bound_tightened_by_support(a, b)

    def test_monotonicity_violation_raises(self, gs_ref_no_si, monkeypatch):
        a = compute_bounds(gs_ref_no_si)
        # fabricate a "support" report with one inflated residual
        import dataclasses
        worse = list(a.per_k)
        worse[4] = dataclasses.replace(worse[4], residual=worse[4].residual + 1e-3)
        b = dataclasses.replace(a, per_k=tuple(worse))
        with pytest.raises(NumericalConsistencyError):
            bound_tightened_by_support(a, b)


class TestCsvEmission:
    def test_schema_and_round_trip(self, tmp_path, gs_ref_no_si):
        report = compute_bounds(gs_ref_no_si)
        path = tmp_path / "bounds.csv"
        write_bounds_csv(str(path), report)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 60
        assert set(rows[0]) == {"k", "entry_kind", "lag", "residual",
                                "bound_generic", "bound_pv0", "norm_gdk_sq"}
        # repr formatting round-trips exactly
        for row, e in zip(rows, report.per_k):
            assert float(row["residual"]) == e.residual
            assert int(row["k"]) == e.k

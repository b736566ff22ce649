import numpy as np
import pytest

from vprom.metrics import ErrorRecord, default_time_set, emit_error_map, err_q, summarize


def record(err_u, strategy="VpROM", idx=0, params=None, **kw):
    defaults = dict(err_udot=err_u, err_uddot=err_u, wall_time_fom=10.0, wall_time_rom=2.0)
    defaults.update(kw)
    return ErrorRecord(sample_index=idx, strategy=strategy, err_u=err_u,
                       parameters=params or {"a": 0.1, "b": 0.2}, **defaults)


class TestErrQ:
    def test_identical_fields_zero_error(self):
        q = np.random.default_rng(0).normal(size=(30, 5))
        assert err_q(q, q) == 0.0

    def test_zero_approximation_is_hundred_percent(self):
        q = np.random.default_rng(1).normal(size=(30, 5))
        assert err_q(q, np.zeros_like(q)) == pytest.approx(100.0)

    def test_hand_evaluated_case(self):
        # reference [3, 4], approx [3, 0] over one DOF, two steps -> 100*4/5
        ref = np.array([[3.0], [4.0]])
        app = np.array([[3.0], [0.0]])
        assert err_q(ref, app, time_set=[0, 1]) == pytest.approx(80.0)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            err_q(np.zeros((5, 2)), np.ones((5, 2)), time_set=range(5))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            err_q(np.zeros((5, 2)), np.zeros((5, 3)))

    def test_error_scale_equivariance(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=(20, 4))
        e = rng.normal(size=(20, 4))
        base = err_q(q, q - e, time_set=range(20))
        for c in (0.5, 2.0, 7.0):
            assert err_q(q, q - c * e, time_set=range(20)) == pytest.approx(c * base)

    def test_rotation_invariance_of_dof_axes(self):
        rng = np.random.default_rng(3)
        q = rng.normal(size=(20, 4))
        approx = q + 0.1 * rng.normal(size=(20, 4))
        R = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        a = err_q(q, approx, time_set=range(20))
        b = err_q(q @ R, approx @ R, time_set=range(20))
        assert a == pytest.approx(b)

    def test_dof_and_time_subsets(self):
        q = np.ones((10, 3))
        approx = q.copy()
        approx[5, 2] = 0.0  # error only at step 5, dof 2
        assert err_q(q, approx, dof_set=[0, 1], time_set=range(10)) == 0.0
        assert err_q(q, approx, dof_set=[2], time_set=[0, 1, 2]) == 0.0
        assert err_q(q, approx, dof_set=[2], time_set=[5]) == pytest.approx(100.0)

    def test_default_time_set_skips_transient(self):
        ts = default_time_set(1000)
        assert ts[0] == 10 and ts[-1] == 999


class TestSummarize:
    def test_single_record(self):
        out = summarize([record(4.2)])
        s = out["VpROM"]
        assert s.median_err_u == s.max_err_u == pytest.approx(4.2)
        assert s.n_records == 1

    def test_symmetric_values_no_outliers(self):
        recs = [record(v, idx=i) for i, v in enumerate([1.0, 2.0, 3.0, 4.0, 5.0])]
        s = summarize(recs)["VpROM"]
        assert s.median_err_u == pytest.approx(3.0)
        assert s.outliers_err_u == []

    def test_iqr_outlier_flagged(self):
        recs = [record(v, idx=i) for i, v in enumerate([1.0, 1.0, 1.0, 1.0, 100.0])]
        s = summarize(recs)["VpROM"]
        assert s.outliers_err_u == [100.0]
        assert s.median_err_u == pytest.approx(1.0)

    def test_permutation_invariant(self):
        vals = [3.0, 1.0, 8.0, 2.0, 5.0, 13.0]
        a = summarize([record(v, idx=i) for i, v in enumerate(vals)])["VpROM"]
        b = summarize([record(v, idx=i) for i, v in enumerate(reversed(vals))])["VpROM"]
        assert a.median_err_u == b.median_err_u
        assert a.q1_err_u == b.q1_err_u and a.q3_err_u == b.q3_err_u

    def test_strategies_grouped(self):
        recs = [record(1.0, strategy="CpROM"), record(2.0, strategy="VpROM")]
        out = summarize(recs)
        assert set(out) == {"CpROM", "VpROM"}

    def test_speed_up_aggregation(self):
        recs = [record(1.0, wall_time_fom=8.0, wall_time_rom=2.0),
                record(1.0, idx=1, wall_time_fom=12.0, wall_time_rom=2.0)]
        s = summarize(recs)["VpROM"]
        assert s.mean_speed_up == pytest.approx((4.0 + 6.0) / 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])


class TestErrorMap:
    def test_clipping_applies_to_color_only(self):
        rows = emit_error_map([record(35.0)])
        assert rows[0]["err_u_raw"] == pytest.approx(35.0)
        assert rows[0]["err_u_color"] == pytest.approx(20.0)

    def test_below_threshold_not_clipped(self):
        rows = emit_error_map([record(5.0)])
        assert rows[0]["err_u_color"] == pytest.approx(5.0)

    def test_default_axes_all_records_emitted(self):
        recs = [record(1.0, idx=i) for i in range(4)]
        rows = emit_error_map(recs, axis_pair=None)
        assert len(rows) == 4
        assert rows[0]["x_name"] == "a" and rows[0]["y_name"] == "b"

    def test_explicit_axes_selected(self):
        rows = emit_error_map([record(2.0, params={"alpha": 0.3, "k": 1e8, "amp": 2e6})],
                              axis_pair=("k", "amp"))
        assert rows[0]["x_name"] == "k" and rows[0]["y"] == pytest.approx(2e6)

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValueError):
            emit_error_map([record(1.0)], axis_pair=("nope", "b"))

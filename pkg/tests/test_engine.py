import math

import numpy as np
import pytest

import levyqw as L
from levyqw import analysis, engine, walk
from levyqw.engine import EnsembleAccumulator, SimConfig
from levyqw.waiting import Fixed, GaussianBaseline, Levy


def stats_close(a, b, rtol):
    for name in ("mean_sigma", "rms_sigma", "ensemble_sigma", "mean_m1"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=rtol, atol=rtol)
    assert np.array_equal(a.count, b.count)


class TestConfig:
    def test_default_checkpoints(self):
        cfg = SimConfig(Levy(1.0), t_max=10_000)
        ck = np.array(cfg.checkpoints)
        assert ck[0] == 1 and ck[-1] == 10_000
        assert 40 <= ck.size <= 60
        assert np.all(np.diff(ck) > 0)

    @pytest.mark.parametrize("kwargs", [
        dict(trajectories=0), dict(t_max=1), dict(checkpoints=()), dict(checkpoints=(5, 3)),
        dict(checkpoints=(1, 2000)), dict(checkpoints=(0, 5)), dict(master_seed=-1),
        dict(initial_qubit=walk.Qubit(1.0, 1.0)), dict(theta=float("inf")),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(Levy(1.0), **{"t_max": 100, **kwargs})


class TestTrajectory:
    def test_no_measurement_matches_free_table(self):
        t_max = 300
        table = L.build_sigma_q_table(L.DEFAULT_THETA, L.SYMMETRIC_QUBIT, t_max)
        cfg = SimConfig(Fixed(t_max + 1), t_max=t_max, trajectories=3, master_seed=2)
        summary = engine.run_trajectory(cfg)
        assert summary.collapses == []
        for t, m1, m2, var in summary.records:
            assert var == table.values[t]
        st = engine.run_ensemble(cfg)
        ck = np.array(cfg.checkpoints)
        np.testing.assert_allclose(st.ensemble_sigma**2, table.values[ck], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(st.mean_sigma, np.sqrt(table.values[ck]), rtol=1e-12)

    def test_repeatable_records(self):
        cfg = SimConfig(Levy(1.3), t_max=200, master_seed=77)
        r1 = engine.run_trajectory(cfg, index=5).records
        r2 = engine.run_trajectory(cfg, index=5).records
        assert r1 == r2
        assert engine.run_trajectory(cfg, index=6).records != r1

    def test_zig_zag(self):
        cfg = SimConfig(Levy(1.2), t_max=400, checkpoints=tuple(range(1, 401)), master_seed=3)
        trace = []
        summary = engine.run_trajectory(cfg, trace=lambda t, s: trace.append((t, walk.moments(s)[2])))
        collapse_times = [t for t, _ in summary.collapses]
        assert len(collapse_times) > 3
        last = 0
        for t, var in trace:
            assert math.sqrt(var) <= (t - last) + 1e-9
            if t in collapse_times:
                last = t
        for t, out in summary.collapses:
            assert out.chirality_sign in (1, -1)
        # the first record after a collapse has at most one step of spread
        records = {t: var for t, _, _, var in summary.records}
        for t in collapse_times:
            if t + 1 in records:
                assert records[t + 1] <= 1.0 + 1e-12

    def test_intervals_cover_horizon(self):
        cfg = SimConfig(GaussianBaseline(5.0, 2.0), t_max=100, checkpoints=(100,), master_seed=1)
        s = engine.run_trajectory(cfg)
        assert sum(s.intervals) >= 100
        assert [t for t, _ in s.collapses] == list(np.cumsum(s.intervals)[:len(s.collapses)])


class TestEnsemble:
    def test_compiled_matches_reference(self):
        for law in (Levy(1.5), Levy(0.6, "redraw"), Fixed(3), GaussianBaseline(4.0, 1.5)):
            cfg = SimConfig(law, t_max=120, trajectories=40, master_seed=9)
            fast = engine.run_ensemble(cfg)
            slow = engine.run_ensemble(cfg, compiled=False)
            stats_close(fast, slow, 1e-10)

    def test_compiled_matches_reference_other_qubit(self):
        cfg = SimConfig(Levy(1.0), theta=0.4, initial_qubit=walk.Qubit(1.0, 0.0),
                        t_max=80, trajectories=20, master_seed=4)
        stats_close(engine.run_ensemble(cfg), engine.run_ensemble(cfg, compiled=False), 1e-10)

    def test_single_trajectory(self):
        cfg = SimConfig(Levy(1.1), t_max=150, trajectories=1, master_seed=21)
        st = engine.run_ensemble(cfg)
        rec = engine.run_trajectory(cfg).records
        var = np.array([r[3] for r in rec])
        m1 = np.array([r[1] for r in rec])
        np.testing.assert_allclose(st.mean_sigma, np.sqrt(var), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(st.mean_m1, m1, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(st.ensemble_sigma, np.sqrt(var), rtol=1e-8, atol=1e-6)

    def test_seed_determinism_and_workers(self):
        cfg = SimConfig(Levy(1.4), t_max=200, trajectories=3000, master_seed=123)
        a = engine.run_ensemble(cfg, workers=1)
        b = engine.run_ensemble(cfg, workers=1)
        c = engine.run_ensemble(cfg, workers=2)
        for name in ("mean_sigma", "rms_sigma", "ensemble_sigma", "mean_m1"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
            assert np.array_equal(getattr(a, name), getattr(c, name))
        d = engine.run_ensemble(SimConfig(Levy(1.4), t_max=200, trajectories=3000, master_seed=124))
        assert not np.array_equal(a.ensemble_sigma, d.ensemble_sigma)

    def test_block_size_independence(self):
        cfg = SimConfig(Levy(1.4), t_max=150, trajectories=1000, master_seed=5)
        stats_close(engine.run_ensemble(cfg, block_size=7), engine.run_ensemble(cfg, block_size=1024), 1e-9)

    def test_fixed_one_is_diffusive(self):
        ck = (10, 50, 100)
        cfg = SimConfig(Fixed(1), t_max=100, trajectories=100_000, checkpoints=ck, master_seed=31)
        st = engine.run_ensemble(cfg)
        assert st.ensemble_sigma[-1] == pytest.approx(10.0, abs=0.1)
        z = (st.ensemble_var - np.array(ck)) / st.ensemble_var_stderr
        assert np.all(np.abs(z) < 4)

    @pytest.mark.parametrize("T", [2, 3])
    def test_segment_boundary_law(self, T):
        table = L.build_sigma_q_table(L.DEFAULT_THETA, L.SYMMETRIC_QUBIT, T)
        ck = tuple(k * T for k in range(2, 6))
        cfg = SimConfig(Fixed(T), t_max=5 * T, trajectories=50_000, checkpoints=ck, master_seed=8)
        st = engine.run_ensemble(cfg)
        expected = np.arange(2, 6) * table.values[T]
        assert np.all(np.abs(st.ensemble_var - expected) <= 3 * st.ensemble_var_stderr)

    def test_mean_position_is_zero(self):
        cfg = SimConfig(Levy(1.5), t_max=300, trajectories=5000, master_seed=12)
        st = engine.run_ensemble(cfg)
        assert np.all(np.abs(st.mean_m1) <= 3.5 * st.mean_m1_stderr + 1e-12)

    def test_stats_invariants(self):
        cfg = SimConfig(Levy(1.0), t_max=300, trajectories=2000, master_seed=13)
        st = engine.run_ensemble(cfg)
        assert np.all(st.rms_sigma >= st.mean_sigma - 1e-12)
        assert np.all(st.ensemble_sigma >= 0)
        assert np.all(st.count == 2000)
        # pooled spread includes the spread of collapse sites
        assert np.all(st.ensemble_sigma >= st.rms_sigma - 1e-9)

    def test_levy_two_exponent(self):
        cfg = SimConfig(Levy(2.0), t_max=1000, trajectories=10_000, master_seed=9)
        st = engine.run_ensemble(cfg)
        fit = analysis.fit_power_law(zip(st.time, st.ensemble_sigma), (10, 1000))
        assert fit.exponent_c == pytest.approx(0.51, abs=0.05)


class TestAccumulator:
    def make(self, seed, n):
        ck = np.array([1, 5, 9])
        acc = EnsembleAccumulator(ck)
        r = np.random.default_rng(seed)
        for _ in range(n):
            for k in range(3):
                m1 = r.normal()
                var = r.exponential()
                acc.add(k, m1, var + m1 * m1, var)
        return acc

    def test_merge_commutative_associative(self):
        a, b, c = self.make(1, 50), self.make(2, 70), self.make(3, 30)
        ab_c = a.merge(b).merge(c)
        a_bc = a.merge(b.merge(c))
        ba = b.merge(a)
        np.testing.assert_allclose(a.merge(b).sums, ba.sums, rtol=1e-12)
        np.testing.assert_allclose(ab_c.sums, a_bc.sums, rtol=1e-9)
        assert np.all(ab_c.count == 150)

    def test_merge_rejects_mismatch(self):
        with pytest.raises(ValueError):
            EnsembleAccumulator([1, 2]).merge(EnsembleAccumulator([1, 3]))

    def test_stderr_matches_bootstrap_scale(self):
        # ensemble variance of iid normal positions: stderr of sigma ~ sigma/sqrt(2n)
        ck = np.array([1])
        acc = EnsembleAccumulator(ck)
        r = np.random.default_rng(0)
        n = 40_000
        for x in r.normal(0.0, 2.0, n):
            acc.add(0, x, x * x, 0.0)
        st = acc.stats()
        assert st.ensemble_sigma[0] == pytest.approx(2.0, abs=0.05)
        assert st.ensemble_sigma_stderr[0] == pytest.approx(2.0 / math.sqrt(2 * n), rel=0.05)
        assert st.mean_m1_stderr[0] == pytest.approx(2.0 / math.sqrt(n), rel=0.05)

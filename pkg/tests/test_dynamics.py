"""Tests for hard-disk configurations and the single-particle chain."""

import math

import numpy as np
import pytest
from scipy import stats

from harddisks.dynamics import (
    CellGrid,
    ChainStats,
    Configuration,
    load_snapshot,
    move_allowed_bruteforce,
    propose,
    radius_for_density,
    random_config,
    run,
    save_snapshot,
    step,
)


class FakeRng:
    """Deterministic stand-in feeding scripted proposals to step()."""

    def __init__(self, index, point):
        self._index = index
        self._point = point

    def integers(self, n, size=None):
        return self._index

    def random(self, shape=None):
        return np.array(self._point)


class TestConfiguration:
    def test_density_identity(self):
        r = radius_for_density(16, 0.15)
        config = random_config(16, 0.15, seed=0)
        assert config.r == pytest.approx(r)
        assert config.rho == pytest.approx(0.15)

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            Configuration([[0.5, 0.5], [0.5 + 0.015, 0.5]], r=0.01)

    def test_rejects_radius_too_large_for_coupling_regime(self):
        with pytest.raises(ValueError):
            Configuration([[0.1, 0.1], [0.5, 0.5]], r=0.07)

    def test_single_disk_exempt_from_radius_cap(self):
        Configuration([[0.5, 0.5]], r=0.2)  # no pairwise geometry involved

    def test_centers_wrapped_and_read_only(self):
        config = Configuration([[1.25, -0.25]], r=0.01)
        assert config.centers[0, 0] == 0.25 and config.centers[0, 1] == 0.75
        with pytest.raises(ValueError):
            config.centers[0, 0] = 0.5

    def test_replace_keeps_original_intact(self):
        a = Configuration([[0.2, 0.2], [0.6, 0.6]], r=0.01)
        b = a.replace(0, (0.4, 0.4))
        assert a.centers[0, 0] == 0.2 and b.centers[0, 0] == 0.4


class TestRandomConfig:
    def test_single_disk(self):
        config = random_config(1, 0.1, seed=1)
        assert config.n == 1 and config.is_valid()

    def test_two_disks_respect_hard_core(self):
        config = random_config(2, 0.001, seed=2)
        d = config.centers[0] - config.centers[1]
        d -= np.round(d)
        assert np.hypot(*d) >= 2 * config.r

    def test_deterministic_and_valid(self):
        a = random_config(64, 0.15, seed=7)
        b = random_config(64, 0.15, seed=7)
        assert np.array_equal(a.centers, b.centers)
        assert a.is_valid()

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            random_config(4, 0.3, seed=0)


class TestPropose:
    def test_uniform_over_disks_and_positions(self):
        config = random_config(8, 0.05, seed=3)
        rng = np.random.default_rng(42)
        n_samples = 100_000
        idx = np.empty(n_samples, dtype=int)
        pts = np.empty((n_samples, 2))
        for k in range(n_samples):
            i, p = propose(config, rng)
            idx[k] = i
            pts[k] = (p.x, p.y)
        counts = np.bincount(idx, minlength=8)
        assert stats.chisquare(counts).pvalue > 0.01
        cells = np.bincount(
            (pts[:, 0] * 10).astype(int) * 10 + (pts[:, 1] * 10).astype(int),
            minlength=100,
        )
        assert stats.chisquare(cells).pvalue > 0.01


class TestStep:
    def test_single_disk_always_accepts(self):
        config = random_config(1, 0.1, seed=4)
        rng = np.random.default_rng(0)
        for _ in range(50):
            config, accepted = step(config, rng)
            assert accepted

    def test_blocked_proposal_rejected_and_unchanged(self):
        config = Configuration([[0.2, 0.2], [0.6, 0.6]], r=0.01)
        fake = FakeRng(0, (0.6 + 0.015, 0.6))  # within 2r of disk 1
        after, accepted = step(config, fake)
        assert not accepted
        assert np.array_equal(after.centers, config.centers)

    def test_own_old_position_never_blocks(self):
        config = Configuration([[0.2, 0.2], [0.6, 0.6]], r=0.01)
        fake = FakeRng(0, (0.2 + 0.001, 0.2))  # overlaps only its old self
        after, accepted = step(config, fake)
        assert accepted
        assert after.centers[0, 0] == pytest.approx(0.201)

    def test_validity_preserved_over_audit_run(self):
        config = random_config(16, 0.12, seed=5)
        rng = np.random.default_rng(5)
        for _ in range(2000):
            config, _ = step(config, rng)
        assert config.is_valid()


class TestCellGrid:
    def test_matches_bruteforce_on_random_proposals(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            config = random_config(48, 0.16, seed=100 + trial)
            grid = CellGrid(config)
            for _ in range(2000):
                i = int(rng.integers(48))
                x, y = rng.random(2)
                assert grid.allowed(i, x, y) == move_allowed_bruteforce(config, i, (x, y))

    def test_tracks_moves(self):
        config = random_config(16, 0.1, seed=8)
        grid = CellGrid(config)
        rng = np.random.default_rng(8)
        current = config
        for _ in range(500):
            i = int(rng.integers(16))
            x, y = rng.random(2)
            if grid.allowed(i, x, y):
                grid.move(i, x, y)
                current = current.replace(i, (x, y))
        rebuilt = CellGrid(current)
        assert sorted(map(tuple, zip(grid.xs, grid.ys))) == sorted(
            map(tuple, zip(rebuilt.xs, rebuilt.ys))
        )


class TestRun:
    def test_zero_steps_returns_input(self):
        config = random_config(4, 0.02, seed=9)
        final, stat = run(config, 0, seed=0)
        assert final is config and stat.steps == 0 and stat.accepted == 0

    def test_rejects_negative_steps(self):
        config = random_config(4, 0.02, seed=9)
        with pytest.raises(ValueError):
            run(config, -1, seed=0)

    def test_deterministic(self):
        config = random_config(32, 0.14, seed=10)
        a, stats_a = run(config, 20_000, seed=11)
        b, stats_b = run(config, 20_000, seed=11)
        assert np.array_equal(a.centers, b.centers)
        assert stats_a == stats_b

    def test_validity_and_stats_consistency(self):
        config = random_config(64, 0.15, seed=12)
        final, stat = run(config, 100_000, seed=13)
        assert final.is_valid()
        assert stat.accepted + stat.rejected == stat.steps == 100_000

    def test_acceptance_rate_at_least_union_bound(self):
        config = random_config(64, 0.15, seed=14)
        final, stat = run(config, 200_000, seed=15)
        p = stat.acceptance_rate
        sigma = math.sqrt(p * (1 - p) / stat.steps)
        assert p >= 1 - 4 * 0.15 - 3 * sigma

    def test_pair_distance_stationary_distribution(self):
        # For n = 2 the stationary pair distance t has density proportional
        # to t (the circle of radius t has perimeter 2 pi t) on (2r, 1/2).
        rho = 0.002
        config = random_config(2, rho, seed=16)
        r = config.r
        rng = np.random.default_rng(17)
        samples = []
        for _ in range(8000):
            for _ in range(6):
                config, _ = step(config, rng)
            d = config.centers[0] - config.centers[1]
            d -= np.round(d)
            samples.append(np.hypot(*d))
        samples = np.array(samples)
        keep = samples < 0.5
        edges = np.linspace(2 * r, 0.5, 11)
        counts, _ = np.histogram(samples[keep], bins=edges)
        expect = (edges[1:] ** 2 - edges[:-1] ** 2)
        expect = expect / expect.sum() * counts.sum()
        assert stats.chisquare(counts, expect).pvalue > 0.01


class TestChainStats:
    def test_rates(self):
        s = ChainStats(steps=10, accepted=7)
        assert s.rejected == 3 and s.acceptance_rate == 0.7
        assert ChainStats(steps=0, accepted=0).acceptance_rate == 0.0


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        config = random_config(16, 0.1, seed=18)
        path = tmp_path / "snap.csv"
        save_snapshot(config, path, seed=18)
        back = load_snapshot(path)
        assert back.n == 16
        assert np.allclose(back.centers, config.centers, atol=1e-11)
        assert back.r == pytest.approx(config.r, rel=1e-11)

    def test_file_shapes(self, tmp_path):
        config = random_config(3, 0.02, seed=19)
        path = tmp_path / "snap.csv"
        save_snapshot(config, path, seed=19)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y" and len(lines) == 4
        sidecar = (tmp_path / "snap.csv.json").read_text()
        assert '"seed": 19' in sidecar

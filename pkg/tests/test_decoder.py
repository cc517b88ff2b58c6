import numpy as np
import pytest

from gabor_access.channel import RngStream, draw_active_set, synthesize_frame
from gabor_access.decoder import (LikelihoodScorer, ThresholdTable,
                                  calibrate_threshold, energy_statistic,
                                  estimate_n, known_n_decode, load_tables,
                                  log_likelihood, map_decode,
                                  nearest_mean_estimate, save_tables)
from gabor_access.effective_codebook import ActiveSet, enumerate_codebook

from oracles import covariance_loglik_tables, covariance_map_argmax


def test_loglik_empty(index5_half):
    assert log_likelihood(np.ones(5), index5_half[0], 10.0) == 0.0


def test_loglik_rank_one_example(index5_half):
    cw = index5_half.lookup(ActiveSet((2,), (3,)))
    y = cw.matrix[:, 0] * np.exp(0.7j)
    # quadratic term 1/(1 + 1/(rho M)) = 50/51, log det term log(51)
    assert log_likelihood(y, cw, 10.0) == pytest.approx(50 / 51 - np.log(51), abs=1e-12)


def test_loglik_matches_dense_form(index5_full):
    rng = np.random.default_rng(0)
    rho = 3.0
    Cinv, logdet = covariance_loglik_tables(index5_full, rho)
    picks = rng.integers(1, len(index5_full), 50)
    y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    for i in picks:
        dense = -np.real(y.conj() @ Cinv[i] @ y) - logdet[i]
        # the SVD form drops the candidate-independent -||y||^2
        ours = log_likelihood(y, index5_full[i], rho) - np.vdot(y, y).real
        assert ours == pytest.approx(dense, abs=1e-9)


def test_scorer_matches_scalar(index5_full):
    rng = np.random.default_rng(1)
    y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    scorer = LikelihoodScorer.for_index(index5_full, 7.0)
    assert LikelihoodScorer.for_index(index5_full, 7.0) is scorer
    vec = scorer.log_likelihood(y)
    for i in (0, 1, 30, 300, 2000, 7775):
        assert vec[i] == pytest.approx(log_likelihood(y, index5_full[i], 7.0), abs=1e-10)


def test_loglik_differences_shift_invariant(index5_full):
    rng = np.random.default_rng(2)
    y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    ll = LikelihoodScorer.for_index(index5_full, 10.0).log_likelihood(y)
    for shift in (-1e3, 0.5, 1e4):
        assert np.argmax(ll + shift) == np.argmax(ll)
        np.testing.assert_allclose(np.diff(ll + shift), np.diff(ll), atol=1e-8)


def test_map_agrees_with_covariance_oracle(index5_full):
    rng = np.random.default_rng(3)
    for rho in (1.0, 10.0, 100.0):
        Cinv, logdet = covariance_loglik_tables(index5_full, rho)
        for _ in range(100):
            truth = draw_active_set(5, 0.4, 5, rng)
            y = synthesize_frame(index5_full.lookup(truth), rho, rng).y
            ours = map_decode(y, index5_full, rho).decoded.index
            assert ours == covariance_map_argmax(y, Cinv, logdet, index5_full.log_prior)


def test_map_with_zero_activity_prior(codebooks5):
    idx = enumerate_codebook(codebooks5, 5, 0.0, n_max=2)
    rng = np.random.default_rng(4)
    for _ in range(20):
        y = 10 * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
        assert map_decode(y, idx, 10.0).active_set == ActiveSet()


@pytest.mark.parametrize('n', [1, 2])
def test_map_noiseless_recovery(index5_half, n):
    # zero noise is the infinite-SNR limit of the likelihood
    rng = np.random.default_rng(5 + n)
    rho = 1e6
    for _ in range(100):
        users = tuple(sorted(rng.choice(5, n, replace=False)))
        truth = ActiveSet(users, tuple(rng.integers(0, 5, n)))
        y = synthesize_frame(index5_half.lookup(truth), rho, rng, noise=False).y
        assert map_decode(y, index5_half, rho).active_set == truth


@pytest.mark.parametrize('n', [1, 2])
def test_plain_noiseless_recovery_any_snr(index5_half, n):
    # the span projection captures all of a noiseless frame at every SNR
    rng = np.random.default_rng(15 + n)
    for _ in range(100):
        users = tuple(sorted(rng.choice(5, n, replace=False)))
        truth = ActiveSet(users, tuple(rng.integers(0, 5, n)))
        rho = float(rng.choice([0.01, 0.1, 1.0, 10.0, 1000.0]))
        y = synthesize_frame(index5_half.lookup(truth), rho, rng, noise=False).y
        assert known_n_decode(y, index5_half, n, rho, 'plain').active_set == truth


@pytest.mark.parametrize('n', [1, 2])
def test_corrected_noiseless_recovery_high_snr(index5_half, n):
    rng = np.random.default_rng(25 + n)
    for _ in range(100):
        users = tuple(sorted(rng.choice(5, n, replace=False)))
        truth = ActiveSet(users, tuple(rng.integers(0, 5, n)))
        y = synthesize_frame(index5_half.lookup(truth), 1e6, rng, noise=False).y
        assert known_n_decode(y, index5_half, n, 1e6, 'corrected').active_set == truth


def test_map_noiseless_low_snr_prefers_smaller_sets(index5_half):
    # at finite SNR a deep fade is indistinguishable from noise for MAP
    cw = index5_half.lookup(ActiveSet((1,), (1,)))
    y = synthesize_frame(cw, 0.1, None, noise=False, h=[0.5]).y
    assert map_decode(y, index5_half, 0.1).active_set == ActiveSet()


def test_known_n_modes_agree_for_single_user(index5_half):
    rng = np.random.default_rng(8)
    for _ in range(200):
        y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        a = known_n_decode(y, index5_half, 1, 2.0, 'corrected')
        b = known_n_decode(y, index5_half, 1, 2.0, 'plain')
        assert a.decoded.index == b.decoded.index


def test_plain_single_user_is_matched_filter(index5_half, G5):
    rng = np.random.default_rng(9)
    for _ in range(200):
        y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        corr = np.abs(np.einsum('klm,m->kl', G5.conj(), y)) ** 2
        k, l = np.unravel_index(np.argmax(corr), corr.shape)
        res = known_n_decode(y, index5_half, 1, 1.0, 'plain')
        assert res.active_set == ActiveSet((k,), (l,))


def test_known_n_noiseless_gap(index5_half):
    rng = np.random.default_rng(10)
    cw = index5_half.lookup(ActiveSet((4,), (2,)))
    y = synthesize_frame(cw, 10.0, rng, noise=False).y
    res = known_n_decode(y, index5_half, 1, 10.0, 'plain', keep_metrics=True)
    assert res.active_set == cw.active_set
    assert res.metric == pytest.approx(np.vdot(y, y).real, rel=1e-12)
    others = np.delete(res.metrics, cw.index - index5_half.of_size(1).start)
    # competitors see at most |y|^2 / M
    assert others.max() <= np.vdot(y, y).real / 5 + 1e-9


def test_known_n_rejects(index5_half):
    with pytest.raises(ValueError):
        known_n_decode(np.ones(5), index5_half, 3, 1.0)
    with pytest.raises(ValueError):
        known_n_decode(np.ones(5), index5_half, 1, 1.0, mode='fancy')
    assert known_n_decode(np.ones(5), index5_half, 0, 1.0).active_set == ActiveSet()


def test_corrected_vs_map_agreement_rate(index5_half):
    """Record how often the corrected known-size rule matches MAP restricted
    to the same size. Two-user eigenvalues are constant, so every candidate
    of that size shares the same weights and log det: agreement is total."""
    rng = RngStream(11, (0,)).generator()
    agree = {1: 0, 2: 0}
    total = {1: 0, 2: 0}
    sl_stop = index5_half.of_size(2).stop
    scorer = LikelihoodScorer.for_index(index5_half, 10.0)
    for _ in range(10_000):
        n = int(rng.integers(1, 3))
        users = tuple(sorted(rng.choice(5, n, replace=False)))
        truth = ActiveSet(users, tuple(rng.integers(0, 5, n)))
        y = synthesize_frame(index5_half.lookup(truth), 10.0, rng).y
        sl = index5_half.of_size(n)
        restricted = sl.start + int(np.argmax(scorer.log_likelihood(y, sl)))
        got = known_n_decode(y, index5_half, n, 10.0, 'corrected').decoded.index
        agree[n] += got == restricted
        total[n] += 1
    print(f"corrected/MAP agreement: n=1 {agree[1]}/{total[1]}, n=2 {agree[2]}/{total[2]}")
    assert sl_stop == 276
    assert agree == total


def test_energy_statistic():
    assert energy_statistic(np.zeros(5)) == 0.0
    y = np.array([1 + 2j, -3j, 0.5])
    assert energy_statistic(y) == pytest.approx(np.sum(np.abs(y) ** 2), rel=1e-15)


def test_energy_noise_only_mean(index5_half):
    rng = np.random.default_rng(12)
    z = np.array([energy_statistic(synthesize_frame(index5_half[0], 10.0, rng).y)
                  for _ in range(100_000)])
    assert abs(z.mean() - 5) < 3 * z.std(ddof=1) / np.sqrt(z.size)


def test_calibration_sentinel_when_no_collisions(codebooks5):
    t = calibrate_threshold(5, 2, 0.5, 10.0, samples=1000, hist_samples=500,
                            rng=np.random.default_rng(0), codebooks=codebooks5)
    assert t.t_z == np.inf and not t.collision_possible
    assert not t.collision(1e300)


def test_calibration_constraint_and_monotonicity(table5_10db, codebooks5):
    t1 = table5_10db
    assert np.isfinite(t1.t_z) and t1.collision_possible
    assert t1.error_ratio <= 1.0
    t_half = calibrate_threshold(5, 5, 0.4, 10.0, samples=20_000, max_ratio=0.5,
                                 rng=np.random.default_rng(1234),
                                 hist_samples=10_000, codebooks=codebooks5)
    assert t_half.t_z <= t1.t_z
    assert t_half.error_ratio <= 0.5


def test_calibration_deterministic(codebooks5):
    kw = dict(samples=2000, hist_samples=500, codebooks=codebooks5)
    a = calibrate_threshold(5, 5, 0.4, 10.0, rng=np.random.default_rng(5), **kw)
    b = calibrate_threshold(5, 5, 0.4, 10.0, rng=np.random.default_rng(5), **kw)
    assert a.t_z == b.t_z
    assert a.hist_counts.tobytes() == b.hist_counts.tobytes()


def test_calibration_rejects(codebooks5):
    with pytest.raises(ValueError):
        calibrate_threshold(5, 5, 0.4, 10.0, max_ratio=1.5, codebooks=codebooks5)


def test_estimate_n_noise_level_high_snr(codebooks5):
    t = calibrate_threshold(5, 5, 0.2, 1000.0, samples=2000, hist_samples=20_000,
                            rng=np.random.default_rng(6), codebooks=codebooks5)
    assert estimate_n(5.0, t).n_hat == 0


def test_estimate_n_degenerate_prior(codebooks5):
    t = calibrate_threshold(5, 5, 1.0, 10.0, samples=1000, hist_samples=2000,
                            rng=np.random.default_rng(7), codebooks=codebooks5)
    assert t.t_z == 0.0
    for z in (5.0, 60.0, 300.0):
        assert estimate_n(z, t).n_hat == 5


def test_estimate_n_fallback(table5_10db):
    t = table5_10db
    far = float(np.exp(t.hist_edges[-1]) * 10)
    est = estimate_n(far, t)
    assert est.fallback and est.n_hat == 5
    assert nearest_mean_estimate(5.0, 5, 10.0, range(6)).n_hat == 0
    assert nearest_mean_estimate(110.0, 5, 10.0, range(6)).n_hat == 2
    assert estimate_n(0.0, t).fallback


def test_estimate_n_beats_nearest_mean(codebooks5):
    rho = 100.0
    t = calibrate_threshold(5, 5, 0.2, rho, samples=2000, hist_samples=20_000,
                            rng=np.random.default_rng(8), codebooks=codebooks5)
    idx = enumerate_codebook(codebooks5, 5, 0.2)
    rng = np.random.default_rng(9)
    hits = fallback_hits = 0
    for _ in range(10_000):
        truth = draw_active_set(5, 0.2, 5, rng)
        z = energy_statistic(synthesize_frame(idx.lookup(truth), rho, rng).y)
        hits += estimate_n(z, t).n_hat == truth.size
        fallback_hits += nearest_mean_estimate(z, 5, rho, range(6)).n_hat == truth.size
    print(f"size estimate accuracy: histogram {hits / 1e4:.4f}, nearest mean {fallback_hits / 1e4:.4f}")
    assert hits >= fallback_hits


def test_tables_round_trip(tmp_path, table5_10db, codebooks5):
    sentinel = calibrate_threshold(5, 2, 0.5, 10.0, samples=100, hist_samples=100,
                                   rng=np.random.default_rng(0), codebooks=codebooks5)
    path = tmp_path / 'tables.csv'
    save_tables({table5_10db.key: table5_10db, sentinel.key: sentinel}, path)
    loaded = load_tables(path)
    assert set(loaded) == {table5_10db.key, sentinel.key}
    t = loaded[table5_10db.key]
    assert isinstance(t, ThresholdTable)
    assert t.t_z == table5_10db.t_z and t.p_miss == table5_10db.p_miss
    assert t.hist_edges.tolist() == table5_10db.hist_edges.tolist()
    assert t.hist_counts.tolist() == table5_10db.hist_counts.tolist()
    assert loaded[sentinel.key].t_z == np.inf

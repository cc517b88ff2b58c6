"""
Noncoherent decoding of one received frame.

The log-likelihood of an effective codeword with basis ``V`` and Gram
eigenvalues ``lam`` is, up to candidate-independent constants,

    sum_j g_j / (1 + g_j) * |v_j^H y|**2  -  sum_j log(1 + g_j),   g_j = rho*M*lam_j

which is the Gaussian likelihood of ``y ~ CN(0, I + rho*M X X^H)`` written
through the SVD. Writing the quadratic weight as ``g/(1+g)`` rather than
``(1 + 1/g)**-1`` makes zero eigenvalues contribute nothing.

Besides the MAP rule this module holds the energy statistic ``z = ||y||**2``,
its Monte Carlo threshold calibration and the histogram estimator of the
number of active users.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .channel import linear_to_db, simulate_energy
from .effective_codebook import active_set_size_pmf
from .gabor_frames import FrameConfig, build_codebooks, codeword_tensor

__all__ = [
    'DecodeResult', 'ThresholdTable', 'SizeEstimate', 'LikelihoodScorer',
    'log_likelihood', 'map_decode', 'known_n_decode', 'energy_statistic',
    'calibrate_threshold', 'estimate_n', 'nearest_mean_estimate',
    'table_key', 'save_tables', 'load_tables',
]

TIE_RTOL = 1e-9


@dataclass(eq=False)
class DecodeResult:
    """Winning candidate, its metric and (optionally) every candidate's metric."""
    decoded: object
    metric: float
    metrics: np.ndarray = None

    @property
    def active_set(self):
        return self.decoded.active_set


def _argmax_lowest(values):
    """Argmax where values within a relative ``TIE_RTOL`` of the best tie,
    resolved in favour of the lowest position."""
    best = np.max(values)
    if not np.isfinite(best):
        return int(np.argmax(values))
    tol = TIE_RTOL * max(1.0, abs(best))
    return int(np.argmax(values >= best - tol))


def log_likelihood(y, candidate, rho):
    """
    Log-likelihood of a single effective codeword (constants dropped).

    The empty codeword scores 0, the pure-noise reference.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    svd = candidate.svd
    if svd.dim == 0:
        return 0.0
    M = svd.V.shape[0]
    g = rho * M * svd.lam
    proj = np.abs(svd.V.conj().T @ y) ** 2
    return float(np.sum(g / (1.0 + g) * proj) - np.sum(np.log1p(g)))


class LikelihoodScorer:
    """
    Candidate weights for one effective codebook at one SNR.

    Scorers are cached on the index, so repeated decoding at the same `rho`
    reuses the weights.
    """

    def __init__(self, index, rho):
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.index = index
        self.rho = float(rho)
        g = rho * index.M * index.eigvals
        self.weights = g / (1.0 + g)
        self.logdet = np.sum(np.log1p(g), axis=1)
        lam_max = np.maximum(index.eigvals[:, :1], 1.0)
        self.span_mask = (index.eigvals > 1e-10 * lam_max).astype(float)

    @classmethod
    def for_index(cls, index, rho):
        cache = index.__dict__.setdefault('_scorers', {})
        key = float(rho)
        if key not in cache:
            cache[key] = cls(index, rho)
        return cache[key]

    def projections(self, y, sl):
        """``|v_j^H y|**2`` for every basis column of the candidates in `sl`."""
        return np.abs(np.einsum('cmj,m->cj', self.index.bases[sl].conj(), y)) ** 2

    def log_likelihood(self, y, sl=slice(None)):
        proj = self.projections(y, sl)
        return np.sum(self.weights[sl] * proj, axis=1) - self.logdet[sl]


def map_decode(y, index, rho, n_max=None, keep_metrics=False):
    """
    MAP decision over every effective codeword with at most `n_max` users.

    Parameters
    ----------
    y : ndarray, shape (M,)
    index : EffectiveCodebookIndex
    rho : float
        Linear SNR the frame was generated with.
    n_max : int, optional
        Defaults to the index's own cap.
    """
    if n_max is None:
        n_max = index.n_max
    stop = index.of_size(n_max).stop
    sl = slice(0, stop)
    scorer = LikelihoodScorer.for_index(index, rho)
    metric = scorer.log_likelihood(y, sl) + index.log_prior[sl]
    best = _argmax_lowest(metric)
    return DecodeResult(index[best], float(metric[best]),
                        metric if keep_metrics else None)


def known_n_decode(y, index, n, rho, mode='corrected', keep_metrics=False):
    """
    Decode assuming exactly `n` users are active.

    ``mode='corrected'`` weights each basis direction by ``g/(1+g)``;
    ``mode='plain'`` uses the unweighted projection energy onto the span.
    With ``n == 0`` the empty codeword is returned.
    """
    if mode not in ('corrected', 'plain'):
        raise ValueError(f"unknown mode {mode!r}")
    if not 0 <= n <= index.n_max:
        raise ValueError(f"n={n} outside 0..{index.n_max}")
    sl = index.of_size(n)
    if n == 0:
        return DecodeResult(index[sl.start], 0.0)
    scorer = LikelihoodScorer.for_index(index, rho)
    proj = scorer.projections(y, sl)
    w = scorer.weights[sl] if mode == 'corrected' else scorer.span_mask[sl]
    metric = np.sum(w * proj, axis=1)
    best = _argmax_lowest(metric)
    return DecodeResult(index[sl.start + best], float(metric[best]),
                        metric if keep_metrics else None)


def energy_statistic(y):
    """``z = tr(y y^H) = ||y||**2``."""
    y = np.asarray(y)
    return float(np.real(np.vdot(y, y)))


# Threshold calibration and size estimation

def table_key(M, N, p, rho_db):
    return (int(M), int(N), round(float(p), 12), round(float(rho_db), 9))


@dataclass(eq=False)
class ThresholdTable:
    """
    Collision threshold and per-size energy histograms for one
    ``(M, N, p, rho)`` operating point.

    `p_false_alarm` is ``P(z > t_z | n <= M//2)`` and `p_miss` is
    ``P(z <= t_z | n > M//2)``, both estimated on the calibration draws.
    `hist_counts[n]` counts ``log z`` samples for ``n`` active users in the
    bins delimited by `hist_edges`.
    """
    M: int
    N: int
    p: float
    rho_db: float
    t_z: float
    p_false_alarm: float
    p_miss: float
    samples: int
    collision_possible: bool
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    provenance: str = ''

    @property
    def rho(self):
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def key(self):
        return table_key(self.M, self.N, self.p, self.rho_db)

    @property
    def error_ratio(self):
        if self.p_false_alarm == 0:
            return 0.0 if self.p_miss == 0 else np.inf
        return self.p_miss / self.p_false_alarm

    def collision(self, z):
        return z > self.t_z


@dataclass
class SizeEstimate:
    n_hat: int
    log_posterior: np.ndarray = field(default=None, repr=False)
    fallback: bool = False


def _wilson(k, n, alpha):
    return proportion_confint(k, n, alpha=alpha, method='wilson')


def calibrate_threshold(M, N, p, rho, samples=100_000, max_ratio=1.0, rng=None,
                        hist_samples=20_000, bins=200, confidence=0.95,
                        codebooks=None, provenance=''):
    """
    Monte Carlo calibration of the collision threshold ``t_z``.

    Energies are drawn separately for frames with ``n <= M//2`` and
    ``n > M//2`` active users (``n`` from the binomial prior restricted to
    each class), `samples` frames per class. The threshold is the largest
    value at which the upper Wilson bound of the miss probability stays
    within `max_ratio` times the lower Wilson bound of the false-alarm
    probability, so the miss/false-alarm ratio holds with margin on fresh
    draws.

    When more than ``M//2`` users can never be active the threshold is
    ``+inf`` and ``collision_possible`` is False.
    """
    if samples < 1 or hist_samples < 1:
        raise ValueError("sample counts must be positive")
    if not 0 < max_ratio <= 1:
        raise ValueError("max_ratio must lie in (0, 1]")
    rng = np.random.default_rng() if rng is None else rng
    if codebooks is None:
        codebooks = build_codebooks(FrameConfig(M))
    G = codeword_tensor(codebooks[:N])
    half = M // 2
    pmf = active_set_size_pmf(N, p)

    per_n = [np.log(simulate_energy(G, np.full(hist_samples, n), rho, rng))
             for n in range(N + 1)]
    lo, hi = min(s.min() for s in per_n), max(s.max() for s in per_n)
    edges = np.linspace(lo, hi, bins + 1)
    counts = np.array([np.histogram(s, edges)[0] for s in per_n])

    p_low = float(pmf[:half + 1].sum())
    p_high = float(pmf[half + 1:].sum())
    rho_db = float(linear_to_db(rho))

    def table(t, fa, miss, possible):
        return ThresholdTable(M, N, float(p), rho_db, float(t), float(fa),
                              float(miss), int(samples), possible, edges,
                              counts, provenance)

    if N <= half or p_high <= 0.0:
        return table(np.inf, 0.0, 0.0, False)
    if p_low <= 0.0:
        return table(0.0, 1.0, 0.0, True)

    def conditioned(lo_n, hi_n):
        w = pmf[lo_n:hi_n + 1] / pmf[lo_n:hi_n + 1].sum()
        sizes = rng.choice(np.arange(lo_n, hi_n + 1), size=samples, p=w)
        return np.sort(simulate_energy(G, sizes, rho, rng))

    z_low = conditioned(0, half)
    z_high = conditioned(half + 1, N)
    cand = np.concatenate([[0.0], z_low, z_high])
    cand.sort()
    n_miss = np.searchsorted(z_high, cand, side='right')
    n_fa = samples - np.searchsorted(z_low, cand, side='right')
    alpha = 2 * (1 - confidence)
    miss_hi = _wilson(n_miss, samples, alpha)[1]
    fa_lo = _wilson(n_fa, samples, alpha)[0]
    ok = miss_hi <= max_ratio * fa_lo
    last = int(np.nonzero(ok)[0][-1]) if ok.any() else 0
    t = cand[last]
    return table(t, n_fa[last] / samples, n_miss[last] / samples, True)


def nearest_mean_estimate(z, M, rho, n_range):
    """Size whose mean energy ``M + rho*M*n`` is closest to `z`."""
    n_range = np.asarray(list(n_range))
    means = M + rho * M * n_range
    return SizeEstimate(int(n_range[np.argmin(np.abs(z - means))]), None, True)


def estimate_n(z, table, n_range=None):
    """
    MAP estimate of the number of active users from the energy `z`.

    The likelihood of each size is its add-one smoothed histogram bin of
    ``log z``; the prior is Binomial(N, p). Energies outside the calibrated
    range fall back to :func:`nearest_mean_estimate`.

    Parameters
    ----------
    n_range : iterable of int, optional
        Candidate sizes (defaults to ``0..N``).
    """
    N = table.N
    n_range = np.arange(N + 1) if n_range is None else np.asarray(list(n_range))
    edges = table.hist_edges
    lz = np.log(z) if z > 0 else -np.inf
    if not edges[0] <= lz <= edges[-1]:
        return nearest_mean_estimate(z, table.M, table.rho, n_range)
    b = min(int(np.searchsorted(edges, lz, side='right')) - 1, edges.size - 2)
    counts = table.hist_counts[n_range, b]
    totals = table.hist_counts[n_range].sum(axis=1)
    bins = edges.size - 1
    with np.errstate(divide='ignore'):
        logpost = (np.log(counts + 1.0) - np.log(totals + bins)
                   + np.log(active_set_size_pmf(N, table.p)[n_range]))
    return SizeEstimate(int(n_range[_argmax_lowest(logpost)]), logpost)


_SCALAR_FIELDS = ['M', 'N', 'p', 'rho_db', 't_z', 'p_false_alarm', 'p_miss',
                  'samples', 'collision_possible', 'provenance']


def _num(x):
    return repr(float(x))


def save_tables(tables, path):
    """
    Persist threshold tables as two CSV files: `path` with one row per
    operating point and ``<path>.hist.csv`` with the histogram bins.
    """
    tables = list(tables.values()) if isinstance(tables, dict) else list(tables)
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(_SCALAR_FIELDS)
        for t in tables:
            writer.writerow([t.M, t.N, _num(t.p), _num(t.rho_db), _num(t.t_z),
                             _num(t.p_false_alarm), _num(t.p_miss), t.samples,
                             int(t.collision_possible), t.provenance])
    with open(str(path) + '.hist.csv', 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['M', 'N', 'p', 'rho_db', 'n_active', 'bin', 'lo', 'hi', 'count'])
        for t in tables:
            for n in range(t.hist_counts.shape[0]):
                for b in range(t.hist_counts.shape[1]):
                    writer.writerow([t.M, t.N, _num(t.p), _num(t.rho_db), n, b,
                                     _num(t.hist_edges[b]), _num(t.hist_edges[b + 1]),
                                     int(t.hist_counts[n, b])])


def load_tables(path):
    """Inverse of :func:`save_tables`; returns a dict keyed by :func:`table_key`."""
    hist = {}
    with open(str(path) + '.hist.csv', newline='') as fh:
        for row in csv.DictReader(fh):
            key = table_key(row['M'], row['N'], row['p'], row['rho_db'])
            hist.setdefault(key, []).append(
                (int(row['n_active']), int(row['bin']), float(row['lo']),
                 float(row['hi']), int(row['count'])))
    out = {}
    with open(path, newline='') as fh:
        for row in csv.DictReader(fh):
            key = table_key(row['M'], row['N'], row['p'], row['rho_db'])
            rows = hist.get(key, [])
            n_sizes = max(r[0] for r in rows) + 1
            n_bins = max(r[1] for r in rows) + 1
            counts = np.zeros((n_sizes, n_bins), dtype=int)
            edges = np.zeros(n_bins + 1)
            for n, b, lo, hi, c in rows:
                counts[n, b] = c
                edges[b], edges[b + 1] = lo, hi
            out[key] = ThresholdTable(
                int(row['M']), int(row['N']), float(row['p']),
                float(row['rho_db']), float(row['t_z']),
                float(row['p_false_alarm']), float(row['p_miss']),
                int(row['samples']), bool(int(row['collision_possible'])),
                edges, counts, row['provenance'])
    return out

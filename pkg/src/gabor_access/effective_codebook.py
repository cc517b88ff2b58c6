"""
The effective codebook seen by a receiver that knows neither the active set
nor the channel: every concatenation of codewords over every active set.

Entries are ordered by active-set size, then lexicographically by user tuple,
then by message tuple, so an entry's position is stable between runs. Each
entry carries its cached SVD and prior probability, plus padded array views
used by the vectorised decoder.
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .gabor_frames import codeword_tensor
from .subspace import SvdTriple, svd_decompose

__all__ = [
    'ActiveSet', 'EffectiveCodeword', 'EffectiveCodebookIndex',
    'enumerate_codebook', 'prior_of', 'active_set_size_pmf',
    'codebook_size', 'dump_index_csv',
]


@dataclass(frozen=True)
class ActiveSet:
    """Sorted distinct user indices and the message index each one sends."""
    users: tuple = ()
    messages: tuple = ()

    def __post_init__(self):
        users = tuple(int(u) for u in self.users)
        messages = tuple(int(m) for m in self.messages)
        if len(users) != len(messages):
            raise ValueError("one message index per active user is required")
        if any(b <= a for a, b in zip(users, users[1:])):
            raise ValueError(f"user indices must be strictly increasing: {users}")
        object.__setattr__(self, 'users', users)
        object.__setattr__(self, 'messages', messages)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = sorted(pairs)
        return cls(tuple(u for u, _ in pairs), tuple(m for _, m in pairs))

    @property
    def size(self):
        return len(self.users)

    def __len__(self):
        return len(self.users)


@dataclass(frozen=True, eq=False)
class EffectiveCodeword:
    index: int
    active_set: ActiveSet
    matrix: np.ndarray
    svd: SvdTriple
    prior: float

    @property
    def size(self):
        return self.active_set.size


def prior_of(active_set, p, N, M):
    """
    Prior of an effective codeword: activity-pattern probability
    ``p**n (1-p)**(N-n)`` shared uniformly over the ``M**n`` message tuples.
    """
    n = active_set.size
    return float(p ** n * (1.0 - p) ** (N - n) / M ** n)


def active_set_size_pmf(N, p):
    """Binomial(N, p) pmf of the number of active users, ``n = 0..N``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"activation probability must lie in [0, 1], got {p}")
    return binom.pmf(np.arange(N + 1), N, p)


def codebook_size(N, M, n):
    """``|X_n| = C(N, n) M**n``."""
    return math.comb(N, n) * M ** n


class EffectiveCodebookIndex:
    """
    Immutable effective codebook for ``N`` users with ``M`` codewords each.

    Attributes
    ----------
    codewords : list of EffectiveCodeword
    N, M, p, n_max : problem dimensions
    bases : ndarray, shape (C, M, M)
        Orthonormal bases padded with zero columns to width ``M``.
    eigvals : ndarray, shape (C, M)
        Gram eigenvalues padded with zeros.
    sizes : ndarray, shape (C,)
        Active-set size of every entry.
    log_prior : ndarray, shape (C,)
    """

    def __init__(self, codewords, N, M, p, n_max):
        self.codewords = codewords
        self.N, self.M, self.p, self.n_max = N, M, p, n_max
        C = len(codewords)
        self.bases = np.zeros((C, M, M), dtype=complex)
        self.eigvals = np.zeros((C, M))
        self.sizes = np.zeros(C, dtype=int)
        for c, cw in enumerate(codewords):
            n = cw.size
            self.sizes[c] = n
            if n:
                self.bases[c, :, :n] = cw.svd.V
                self.eigvals[c, :n] = cw.svd.lam
        priors = np.array([cw.prior for cw in codewords])
        with np.errstate(divide='ignore'):
            self.log_prior = np.log(priors)
        self._slices = {}
        for n in range(n_max + 1):
            idx = np.nonzero(self.sizes == n)[0]
            self._slices[n] = slice(int(idx[0]), int(idx[-1]) + 1)
        self._lookup = {cw.active_set: cw.index for cw in codewords}

    def __len__(self):
        return len(self.codewords)

    def __getitem__(self, i):
        return self.codewords[i]

    def of_size(self, n):
        """Slice of entries with exactly `n` active users."""
        if n not in self._slices:
            raise IndexError(f"active-set size {n} not in index (n_max={self.n_max})")
        return self._slices[n]

    def sizes_per_n(self):
        return {n: s.stop - s.start for n, s in self._slices.items()}

    def lookup(self, active_set):
        """Effective codeword of a given ActiveSet."""
        return self.codewords[self._lookup[active_set]]

    def eigenvalue_spread(self):
        """Per active-set size, the min and max of each ordered Gram eigenvalue."""
        out = {}
        for n in range(1, self.n_max + 1):
            lam = self.eigvals[self.of_size(n), :n]
            out[n] = (lam.min(axis=0), lam.max(axis=0))
        return out


def enumerate_codebook(codebooks, N, p, n_max=None):
    """
    Enumerate the effective codebook for the first `N` user codebooks.

    Parameters
    ----------
    codebooks : list of Codebook
    N : int
        Number of users, at most ``len(codebooks)``.
    p : float
        Per-user activation probability.
    n_max : int, optional
        Largest active-set size to include (defaults to `N`).

    Returns
    -------
    EffectiveCodebookIndex
    """
    if N > len(codebooks) or N < 0:
        raise ValueError(f"N={N} must lie in [0, {len(codebooks)}]")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"activation probability must lie in [0, 1], got {p}")
    if n_max is None:
        n_max = N
    if not 0 <= n_max <= N:
        raise ValueError(f"n_max={n_max} must lie in [0, N={N}]")
    G = codeword_tensor(codebooks[:N])
    M = G.shape[1]
    codewords = []
    empty = ActiveSet()
    codewords.append(EffectiveCodeword(
        0, empty, np.zeros((M, 0), dtype=complex),
        SvdTriple(np.zeros((M, 0), dtype=complex), np.zeros(0), np.zeros((0, 0))),
        prior_of(empty, p, N, M)))
    for n in range(1, n_max + 1):
        for users in itertools.combinations(range(N), n):
            for msgs in itertools.product(range(M), repeat=n):
                aset = ActiveSet(users, msgs)
                X = G[list(users), list(msgs)].T.copy()
                codewords.append(EffectiveCodeword(
                    len(codewords), aset, X, svd_decompose(X),
                    prior_of(aset, p, N, M)))
    return EffectiveCodebookIndex(codewords, N, M, p, n_max)


def dump_index_csv(index, path):
    """Debug dump of ``index, n, users, messages, prior``."""
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['index', 'n_active', 'users', 'messages', 'prior'])
        for cw in index.codewords:
            writer.writerow([cw.index, cw.size,
                             ' '.join(map(str, cw.active_set.users)),
                             ' '.join(map(str, cw.active_set.messages)),
                             f'{cw.prior:.17g}'])

"""
Subspace representations of effective codewords.

An ``M x n`` effective codeword ``X`` is factored as ``X = V diag(sqrt(lam)) U``
where ``V`` is an orthonormal basis of its column span, ``lam`` are the
eigenvalues of the Gram matrix ``X^H X`` and ``U`` is unitary. Decoding only
depends on ``V`` and ``lam``; chordal distances between bases quantify how
well two codewords can be told apart without channel knowledge.
"""

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .gabor_frames import build_codebooks, codeword_tensor

__all__ = [
    'SvdTriple', 'Lemma1Report', 'orthonormal_basis', 'svd_decompose',
    'principal_angles', 'chordal_distance', 'batch_chordal_distance',
    'verify_lemma1', 'write_lemma1_csv',
]


@dataclass(frozen=True, eq=False)
class SvdTriple:
    """
    ``X = V @ diag(sqrt(lam)) @ U``.

    `V` is ``M x n`` with orthonormal columns, `lam` is sorted descending and
    `U` is ``n x n`` unitary.
    """
    V: np.ndarray
    lam: np.ndarray
    U: np.ndarray

    @property
    def dim(self):
        return self.lam.shape[0]

    def reconstruct(self):
        return (self.V * np.sqrt(self.lam)) @ self.U

    def rank(self, rtol=1e-10):
        if self.dim == 0:
            return 0
        return int(np.sum(self.lam > rtol * max(self.lam[0], 1.0)))


def orthonormal_basis(A):
    """
    Orthonormal basis of the column span of `A` via a thin SVD.

    The phase of each basis vector is fixed so that its first entry with
    non-negligible magnitude is real and positive.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape[0] == 1 and A.shape[1] > 1:
        A = A.T
    return svd_decompose(A).V


def svd_decompose(X, tol=1e-12):
    """
    SVD of an effective codeword in the ``V, lam, U`` convention.

    Parameters
    ----------
    X : ndarray, shape (M, n)
        Complex matrix with ``1 <= n <= M``. Rank deficiency is allowed;
        zero eigenvalues are kept.
    tol : float
        Entries of magnitude below `tol` are skipped when picking the
        phase reference of a basis column.

    Returns
    -------
    SvdTriple
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    M, n = X.shape
    if n < 1 or n > M:
        raise ValueError(f"need 1 <= columns <= rows, got shape {X.shape}")
    V, s, U = np.linalg.svd(X, full_matrices=False)
    # deterministic phase: first significant entry of each column real-positive
    first = np.argmax(np.abs(V) > tol, axis=0)
    ref = V[first, np.arange(n)]
    phase = np.where(np.abs(ref) > tol, ref / np.where(ref == 0, 1, np.abs(ref)), 1.0)
    V = V / phase
    U = U * phase[:, None]
    return SvdTriple(V, s ** 2, U)


def _check_pair(Phi, Psi):
    Phi = np.asarray(Phi, dtype=complex)
    Psi = np.asarray(Psi, dtype=complex)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    if Psi.ndim == 1:
        Psi = Psi[:, None]
    if Phi.shape != Psi.shape:
        raise ValueError(f"subspace dimensions differ: {Phi.shape} vs {Psi.shape}")
    if Phi.shape[1] < 1:
        raise ValueError("subspaces must have dimension >= 1")
    return Phi, Psi


def _angles(Phi, Psi):
    """Ascending principal angles for stacks of bases ``(..., M, m)``.

    Cosines lose accuracy for small angles, so angles below pi/4 are taken
    from the sines, i.e. the singular values of the part of `Phi` orthogonal
    to `Psi`.
    """
    C = np.einsum('...mi,...mj->...ij', Psi.conj(), Phi)
    cos = np.clip(np.linalg.svd(C, compute_uv=False), 0.0, 1.0)
    R = Phi - Psi @ C
    sin = np.clip(np.linalg.svd(R, compute_uv=False)[..., ::-1], 0.0, 1.0)
    # both sorted by ascending angle
    return np.where(cos ** 2 >= 0.5, np.arcsin(sin), np.arccos(cos))


def principal_angles(Phi, Psi):
    """
    Principal angles between the spans of two orthonormal bases.

    Singular values are clipped to ``[0, 1]`` before inverting the
    trigonometric function. Angles are returned in ascending order.
    """
    Phi, Psi = _check_pair(Phi, Psi)
    return _angles(Phi, Psi)


def chordal_distance(Phi, Psi):
    """``sqrt(sum(sin(theta)**2))`` over the principal angles."""
    theta = principal_angles(Phi, Psi)
    return float(np.sqrt(np.sum(np.sin(theta) ** 2)))


def batch_chordal_distance(Phi, Psi):
    """Chordal distances for stacks of bases with shape ``(..., M, m)``."""
    theta = _angles(Phi, Psi)
    return np.sqrt(np.sum(np.sin(theta) ** 2, axis=-1))


@dataclass
class Lemma1Report:
    """Per active-set size: pairs checked, minimal chordal distance, violations."""
    M: int
    mode: str
    min_gap: float
    pairs_checked: dict = field(default_factory=dict)
    min_distance: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    modes: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(not v for v in self.violations.values())


def _bases_of_size(G, n):
    """Orthonormal bases for every effective codeword with `n` active users."""
    n_users, M, _ = G.shape
    mats = []
    for users in itertools.combinations(range(n_users), n):
        for msgs in itertools.product(range(M), repeat=n):
            mats.append(G[list(users), list(msgs)].T)
    X = np.array(mats)
    V, _, _ = np.linalg.svd(X, full_matrices=False)
    return V


def verify_lemma1(cfg, n_max=None, mode='exhaustive', min_gap=1e-6,
                  n_pairs=10**6, seed=0, chunk=100_000, sizes=None,
                  max_codewords=None):
    """
    Check that distinct effective codewords with the same number of active
    users span distinct subspaces.

    Parameters
    ----------
    cfg : FrameConfig
    n_max : int, optional
        Largest active-set size to check, at most ``M // 2``. Defaults to
        ``M // 2``.
    mode : {'exhaustive', 'sampled', 'auto'}
        Compare all distinct pairs, or `n_pairs` uniformly drawn distinct
        pairs per size. ``'auto'`` is exhaustive whenever that needs at most
        `n_pairs` comparisons and samples otherwise.
    min_gap : float
        A pair whose chordal distance is not above `min_gap` is a violation.
    sizes : iterable of int, optional
        Explicit active-set sizes to check instead of ``1..n_max``.
    max_codewords : int, optional
        Skip sizes with more effective codewords than this (their count is
        recorded in ``report.skipped``).

    Returns
    -------
    Lemma1Report
    """
    M = cfg.M
    if n_max is None:
        n_max = M // 2
    if n_max > M // 2:
        raise ValueError(f"n_max={n_max} exceeds M//2={M // 2}")
    if mode not in ('exhaustive', 'sampled', 'auto'):
        raise ValueError(f"unknown mode {mode!r}")
    G = codeword_tensor(build_codebooks(cfg))
    report = Lemma1Report(M, mode, min_gap)
    rng = np.random.default_rng(seed)
    for n in (sizes if sizes is not None else range(1, n_max + 1)):
        count = math.comb(G.shape[0], n) * M ** n
        if max_codewords is not None and count > max_codewords:
            report.skipped[n] = count
            continue
        V = _bases_of_size(G, n)
        C = V.shape[0]
        min_d = np.inf
        checked = 0
        bad = []
        size_mode = mode
        if mode == 'auto':
            size_mode = 'exhaustive' if C * (C - 1) // 2 <= n_pairs else 'sampled'
        report.modes[n] = size_mode
        if size_mode == 'exhaustive':
            iu, ju = np.triu_indices(C, k=1)
            pairs = ((iu[s:s + chunk], ju[s:s + chunk])
                     for s in range(0, iu.size, chunk))
        else:
            def sampled():
                left = n_pairs
                while left > 0:
                    size = min(chunk, left)
                    i = rng.integers(0, C, size)
                    j = (i + rng.integers(1, C, size)) % C
                    left -= size
                    yield i, j
            pairs = sampled()
        for i, j in pairs:
            d = batch_chordal_distance(V[i], V[j])
            checked += d.size
            min_d = min(min_d, float(d.min()))
            hit = np.nonzero(d <= min_gap)[0]
            bad.extend((int(i[h]), int(j[h]), float(d[h])) for h in hit)
        report.pairs_checked[n] = checked
        report.min_distance[n] = min_d
        report.violations[n] = bad
    return report


def write_lemma1_csv(report, path):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['n_active', 'pairs_checked', 'min_distance', 'violations'])
        for n in sorted(report.pairs_checked):
            writer.writerow([n, report.pairs_checked[n],
                             f'{report.min_distance[n]:.17g}',
                             len(report.violations[n])])

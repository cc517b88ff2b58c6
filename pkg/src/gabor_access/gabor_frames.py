"""
Alltop-Gabor frames and the per-user codebooks built from them.

For a prime ``M >= 5`` the ``M**2`` vectors

    g_{k,l}[m] = exp(2j*pi*((m - k) mod M)**3 / M) * exp(2j*pi*l*m / M) / sqrt(M)

form a union of ``M`` orthonormal bases of ``C^M`` (one per time shift
``k``) whose cross-basis inner products all have magnitude ``1/sqrt(M)``.
User ``k`` owns the basis with shift ``k``; the message index ``l`` selects
the modulation.
"""

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    'FrameConfig', 'Codeword', 'Codebook', 'CoherenceReport',
    'is_prime', 'alltop_sequence', 'gabor_codeword', 'build_codebooks',
    'codeword_tensor', 'verify_coherence', 'export_codebooks_csv',
]


def is_prime(n):
    """Return True if the integer `n` is prime."""
    n = int(n)
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def _check_length(M):
    if int(M) != M or not is_prime(M) or M < 5:
        raise ValueError(f"frame length must be a prime >= 5, got {M!r}")
    return int(M)


@dataclass(frozen=True)
class FrameConfig:
    """
    Frame construction parameters.

    Parameters
    ----------
    M : int
        Prime frame length (slots per frame), at least 5.
    normalize : bool
        Scale codewords to unit norm. Only ``True`` is supported.
    include_standard_basis : bool
        Append the standard basis as an extra codebook (user index ``M``).
        The maximal coherence stays ``1/sqrt(M)``.
    """
    M: int
    normalize: bool = True
    include_standard_basis: bool = False

    def __post_init__(self):
        _check_length(self.M)
        if not self.normalize:
            raise ValueError("only unit-norm codewords are supported")

    @property
    def num_codebooks(self):
        return self.M + 1 if self.include_standard_basis else self.M


@dataclass(frozen=True, eq=False)
class Codeword:
    """A unit-norm frame vector owned by `user_index` carrying `message_index`."""
    entries: np.ndarray
    user_index: int
    message_index: int


@dataclass(frozen=True, eq=False)
class Codebook:
    user_index: int
    words: tuple

    @property
    def matrix(self):
        """M x M matrix whose column ``l`` is codeword ``l``."""
        return np.column_stack([w.entries for w in self.words])

    def __len__(self):
        return len(self.words)


def alltop_sequence(M):
    """
    Unnormalized Alltop sequence ``exp(2j*pi*m**3/M)``, ``m = 0..M-1``.

    Examples
    --------
    >>> np.round(alltop_sequence(5)[0], 12)
    np.complex128(1+0j)
    """
    M = _check_length(M)
    m = np.arange(M, dtype=np.int64)
    # reduce the cubic exponent before exponentiating
    return np.exp(2j * np.pi * ((m ** 3) % M) / M)


def _gabor_exponents(M, k, l):
    m = np.arange(M, dtype=np.int64)
    shifted = (m - k) % M
    return ((shifted ** 3) % M + (l * m) % M) % M


def gabor_codeword(cfg, k, l):
    """
    Codeword ``g_{k,l}`` of the frame described by `cfg`.

    With ``cfg.include_standard_basis`` the user index ``k == M`` refers to
    the standard basis vector ``e_l``.
    """
    M = cfg.M
    if not 0 <= l < M:
        raise IndexError(f"message index {l} out of range for M={M}")
    if k == M and cfg.include_standard_basis:
        entries = np.zeros(M, dtype=complex)
        entries[l] = 1.0
        return Codeword(entries, k, l)
    if not 0 <= k < M:
        raise IndexError(f"user index {k} out of range for M={M}")
    e = _gabor_exponents(M, k, l)
    entries = np.exp(2j * np.pi * e / M) / np.sqrt(M)
    return Codeword(entries, int(k), int(l))


def build_codebooks(cfg):
    """
    One codebook per user; codebook ``k`` holds ``g_{k,0} .. g_{k,M-1}``.

    Returns
    -------
    list of Codebook
        ``M`` codebooks (``M + 1`` with the standard basis extension).
    """
    return [Codebook(k, tuple(gabor_codeword(cfg, k, l) for l in range(cfg.M)))
            for k in range(cfg.num_codebooks)]


def codeword_tensor(codebooks):
    """Stack codebooks into an array ``G[user, message, :]``."""
    return np.array([[w.entries for w in cb.words] for cb in codebooks])


@dataclass
class CoherenceReport:
    max_coherence: float
    observed_values: tuple
    violations: list

    @property
    def ok(self):
        return not self.violations


def verify_coherence(codebooks, atol=1e-10):
    """
    Check that every distinct codeword pair has ``|<g, g'>|`` in ``{0, 1/sqrt(M)}``.

    Returns
    -------
    CoherenceReport
        The maximal coherence, the distinct observed magnitudes (allowed
        values within `atol` are reported exactly) and a list of ``((k, l), (k', l'), value)`` violations.
    """
    G = codeword_tensor(codebooks)
    n_users, M, _ = G.shape
    flat = G.reshape(n_users * M, M)
    mags = np.abs(flat.conj() @ flat.T)
    iu, ju = np.triu_indices(flat.shape[0], k=1)
    vals = mags[iu, ju]
    allowed = np.array([0.0, 1.0 / np.sqrt(M)])
    dist = np.min(np.abs(vals[:, None] - allowed[None, :]), axis=1)
    bad = np.nonzero(dist > atol)[0]
    violations = [(divmod(int(iu[b]), M), divmod(int(ju[b]), M), float(vals[b]))
                  for b in bad]
    # matching magnitudes are reported as the exact allowed value
    nearest = allowed[np.argmin(np.abs(vals[:, None] - allowed), axis=1)]
    snapped = np.where(dist <= atol, nearest, vals)
    observed = tuple(sorted(set(snapped.tolist())))
    return CoherenceReport(float(vals.max()), observed, violations)


def export_codebooks_csv(codebooks, path):
    """Write one row per codeword: ``k, l, re_0, im_0, re_1, im_1, ...``."""
    M = len(codebooks[0].words[0].entries)
    header = ['k', 'l'] + [f'{part}_{m}' for m in range(M) for part in ('re', 'im')]
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for cb in codebooks:
            for w in cb.words:
                row = [w.user_index, w.message_index]
                for z in w.entries:
                    row += [f'{z.real:.17g}', f'{z.imag:.17g}']
                writer.writerow(row)

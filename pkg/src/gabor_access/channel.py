"""
Block Rayleigh fading random access channel.

A frame with active set ``A`` is received as

    y = sqrt(rho * M) * X_A @ h + w

with unit-norm codewords in the columns of ``X_A`` and ``h``, ``w`` i.i.d.
CN(0, 1). The received covariance is then ``I + rho*M * X_A X_A^H``, which
is exactly the model the MAP decoder assumes.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .effective_codebook import ActiveSet

__all__ = [
    'RngStream', 'ChannelDraw', 'ReceivedFrame', 'complex_normal',
    'draw_activity', 'draw_active_set', 'synthesize_frame',
    'synthesize_active_set',
    'simulate_energy', 'snr_db_to_linear', 'linear_to_db', 'dump_frames_csv',
]


@dataclass(frozen=True)
class RngStream:
    """Seed plus stream id; equal pairs give identical draw sequences."""
    seed: int
    stream: tuple = ()

    def generator(self):
        stream = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(s) for s in stream))
        return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng, size):
    """Circular CN(0, 1) samples: real and imaginary parts have variance 1/2."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


def snr_db_to_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def linear_to_db(rho):
    return 10.0 * np.log10(rho)


def draw_activity(N, p, rng):
    """Each of `N` users is independently active with probability `p`."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"activation probability must lie in [0, 1], got {p}")
    return tuple(int(u) for u in np.nonzero(rng.random(N) < p)[0])


def draw_active_set(N, p, M, rng):
    """Activity pattern followed by uniform message indices."""
    users = draw_activity(N, p, rng)
    msgs = rng.integers(0, M, len(users))
    return ActiveSet(users, tuple(msgs))


@dataclass(frozen=True, eq=False)
class ChannelDraw:
    active_set: ActiveSet
    h: np.ndarray
    w: np.ndarray


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray
    truth: ChannelDraw
    rho: float


def _receive(X, active_set, rho, rng, noise, h):
    if rho <= 0:
        raise ValueError("rho must be positive")
    M, n = X.shape
    if h is None:
        h = complex_normal(rng, n)
    h = np.asarray(h, dtype=complex)
    w = complex_normal(rng, M) if noise else np.zeros(M, dtype=complex)
    y = np.sqrt(rho * M) * (X @ h) + w
    return ReceivedFrame(y, ChannelDraw(active_set, h, w), float(rho))


def synthesize_frame(codeword, rho, rng, noise=True, h=None):
    """
    Received vector for one effective codeword.

    Parameters
    ----------
    codeword : EffectiveCodeword
    rho : float
        Linear SNR, per-user average power over the frame.
    rng : numpy.random.Generator
    noise : bool
        With ``False`` the noise vector is zero (noiseless test mode).
    h : ndarray, optional
        Channel coefficients to reuse instead of fresh draws.
    """
    return _receive(codeword.matrix, codeword.active_set, rho, rng, noise, h)


def synthesize_active_set(G, active_set, rho, rng, noise=True, h=None):
    """Like :func:`synthesize_frame`, building ``X`` from the tensor `G`."""
    X = G[list(active_set.users), list(active_set.messages)].T.copy()
    if X.size == 0:
        X = np.zeros((G.shape[1], 0), dtype=complex)
    return _receive(X, active_set, rho, rng, noise, h)


def simulate_energy(G, sizes, rho, rng, noise=True):
    """
    Vectorised draws of ``z = ||y||^2`` for frames with given active-set sizes.

    Active users are a uniformly random subset of the requested size and send
    uniform messages; channel and noise are fresh per frame.

    Parameters
    ----------
    G : ndarray, shape (N, M, M)
        Codeword tensor ``G[user, message, :]``.
    sizes : array_like of int
        Number of active users per frame.
    """
    sizes = np.asarray(sizes, dtype=int)
    N, M, _ = G.shape
    F = sizes.size
    order = np.argsort(rng.random((F, N)), axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(N)[None, :].repeat(F, 0), axis=1)
    active = ranks < sizes[:, None]
    msgs = rng.integers(0, M, (F, N))
    h = complex_normal(rng, (F, N)) * active
    words = G[np.arange(N)[None, :], msgs]            # (F, N, M)
    y = np.sqrt(rho * M) * np.einsum('fn,fnm->fm', h, words)
    if noise:
        y = y + complex_normal(rng, (F, M))
    return np.sum(np.abs(y) ** 2, axis=1)


def dump_frames_csv(frames, path):
    """One row per frame: users, messages, then interleaved Re/Im of ``y``."""
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        M = frames[0].y.size if frames else 0
        writer.writerow(['users', 'messages', 'rho']
                        + [f'{p}_{m}' for m in range(M) for p in ('re', 'im')])
        for fr in frames:
            a = fr.truth.active_set
            row = [' '.join(map(str, a.users)), ' '.join(map(str, a.messages)),
                   f'{fr.rho:.17g}']
            for z in fr.y:
                row += [f'{z.real:.17g}', f'{z.imag:.17g}']
            writer.writerow(row)

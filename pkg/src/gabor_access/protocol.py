"""
Decoding with collision resolution.

One protocol run covers a single contention frame:

1. every user is active with probability ``p`` and transmits its codeword;
2. the receiver computes ``z = ||y||**2`` and compares it with ``t_z``;
3. if ``z <= t_z`` the frame is decoded. Otherwise a collision is announced
   together with an estimate ``n_hat`` of the number of active users; no new
   users may join and each active user retransmits with probability
   ``p_c(n_hat)``. The retransmission is tested again and either decoded or
   an error is announced.

A frame is correct when the final decode reproduces the active set and all
messages of the frame that was actually decoded.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import draw_active_set, synthesize_active_set
from .decoder import energy_statistic, estimate_n, known_n_decode, map_decode
from .effective_codebook import ActiveSet

__all__ = [
    'LABELS', 'ProtocolConfig', 'PhaseRecord', 'ProtocolOutcome',
    'default_pc', 'run_frame', 'score_outcome', 'write_outcome_log',
]

LABELS = ('correct', 'wrong_decode', 'unrecognized_collision', 'unresolved_collision')
MODES = ('known_n', 'plain', 'map')


def default_pc(n_hat, M):
    """Retransmission probability ``min(1, (M//2) / n_hat)``."""
    return min(1.0, (M // 2) / max(int(n_hat), 1))


@dataclass(frozen=True)
class ProtocolConfig:
    """
    Parameters
    ----------
    N, M : int
        Users and frame length.
    p : float
        Initial activation probability.
    rho : float
        Linear SNR.
    pc : float or None
        Fixed retransmission probability; ``None`` selects :func:`default_pc`.
    mode : {'known_n', 'plain', 'map'}
        Decoder behind the ``z <= t_z`` branch. ``known_n`` and ``plain``
        estimate the size first, ``map`` searches all sizes up to `n_max`.
    genie : bool
        Receiver is told the true number of active users: collisions are
        declared exactly when it exceeds ``M//2`` and decoding uses it.
    redraw_channel : bool
        Fresh fading in the retransmission frame (else the survivors keep
        their coefficients).
    fresh_messages : bool
        Survivors draw new messages instead of repeating their codeword.
    """
    N: int
    M: int
    p: float
    rho: float
    pc: float = None
    mode: str = 'known_n'
    n_max: int = None
    max_resolution_rounds: int = 1
    genie: bool = False
    redraw_channel: bool = True
    fresh_messages: bool = False
    noiseless: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pc is not None and not 0.0 < self.pc <= 1.0:
            raise ValueError("pc must lie in (0, 1]")
        if self.max_resolution_rounds < 0:
            raise ValueError("max_resolution_rounds must be >= 0")

    @property
    def half(self):
        return self.M // 2

    @property
    def decode_n_max(self):
        return self.half if self.n_max is None else self.n_max

    def pc_for(self, n_hat):
        return default_pc(n_hat, self.M) if self.pc is None else float(self.pc)


@dataclass
class PhaseRecord:
    phase: str
    truth: ActiveSet
    z: float
    t_z: float
    collision: bool
    n_hat: int = None
    pc: float = None


@dataclass
class ProtocolOutcome:
    phases: list = field(default_factory=list)
    decoded: ActiveSet = None
    status: str = ''
    correctness: str = ''
    rounds: int = 0
    offered: int = 0
    delivered: int = 0

    @property
    def is_error(self):
        return self.correctness != 'correct'


def score_outcome(outcome, truth_initial, truth_resolution=None, half=None):
    """
    Correctness label of a finished run.

    The decode is compared with the truth of the frame it came from: the
    initial frame when no collision was declared, the retransmission frame
    otherwise. A declared collision that is never cleared is an
    ``unresolved_collision``; an undetected frame with more than ``M//2``
    active users that is decoded wrongly is an ``unrecognized_collision``.
    """
    if outcome.status == 'error_announced':
        return 'unresolved_collision'
    truth = truth_initial if truth_resolution is None else truth_resolution
    if outcome.decoded == truth:
        return 'correct'
    if half is not None and truth.size > half:
        return 'unrecognized_collision'
    return 'wrong_decode'


def _synthesize(G, aset, rho, rng, noise, h=None):
    frame = synthesize_active_set(G, aset, rho, rng, noise, h)
    return frame.y, frame.truth.h


def run_frame(config, index, table, rng, G=None, statistic=energy_statistic,
              rng_resolution=None):
    """
    Simulate one contention frame through the collision-resolution protocol.

    Parameters
    ----------
    config : ProtocolConfig
    index : EffectiveCodebookIndex
        Candidates for decoding; must contain sizes up to
        ``config.decode_n_max`` (and ``M//2`` in genie mode).
    table : ThresholdTable
        Threshold and size-estimation histograms for this operating point.
    rng : numpy.random.Generator
    G : ndarray, optional
        Codeword tensor used for synthesis; defaults to the index's
        codewords rebuilt from its single-user entries.
    statistic : callable
        Detector statistic of ``y``; replaceable for scripted tests.
    rng_resolution : numpy.random.Generator, optional
        Separate source for thinning and retransmission draws. With it the
        initial frames drawn from `rng` do not depend on what happens in
        the resolution round.

    Returns
    -------
    ProtocolOutcome
    """
    if G is None:
        G = _tensor_from_index(index)
    rng2 = rng if rng_resolution is None else rng_resolution
    N, M, rho, half = config.N, config.M, config.rho, config.half
    noise = not config.noiseless
    out = ProtocolOutcome()

    truth0 = draw_active_set(N, config.p, M, rng)
    out.offered = truth0.size
    y, h = _synthesize(G, truth0, rho, rng, noise)

    def detect(y, truth, phase):
        z = statistic(y)
        if config.genie:
            collision = truth.size > half
        else:
            collision = bool(table.collision(z))
        rec = PhaseRecord(phase, truth, z, table.t_z, collision)
        out.phases.append(rec)
        return rec

    def decode(y, rec):
        if config.genie:
            n = rec.truth.size
            rec.n_hat = n
            return known_n_decode(y, index, n, rho, 'corrected').active_set
        if config.mode == 'map':
            return map_decode(y, index, rho, config.decode_n_max).active_set
        n = estimate_n(rec.z, table, range(config.decode_n_max + 1)).n_hat
        rec.n_hat = n
        mode = 'corrected' if config.mode == 'known_n' else 'plain'
        return known_n_decode(y, index, n, rho, mode).active_set

    rec = detect(y, truth0, 'initial')
    truth = truth0
    resolution_truth = None
    while rec.collision and out.rounds < config.max_resolution_rounds:
        if config.genie:
            n_hat = truth.size
        else:
            n_hat = estimate_n(rec.z, table, range(half + 1, N + 1)).n_hat
        rec.n_hat = n_hat
        pc = config.pc_for(n_hat)
        rec.pc = pc
        keep = rng2.random(truth.size) < pc
        users = [u for u, k in zip(truth.users, keep) if k]
        if config.fresh_messages:
            msgs = [int(m) for m in rng2.integers(0, M, len(users))]
        else:
            msgs = [m for m, k in zip(truth.messages, keep) if k]
        h_keep = None if config.redraw_channel else h[keep]
        truth = ActiveSet(tuple(users), tuple(msgs))
        y, h = _synthesize(G, truth, rho, rng2, noise, h_keep)
        out.rounds += 1
        resolution_truth = truth
        rec = detect(y, truth, 'resolution')

    if rec.collision:
        out.status = 'error_announced'
        if not config.genie:
            rec.n_hat = estimate_n(rec.z, table, range(half + 1, N + 1)).n_hat
    else:
        out.status = 'decoded'
        out.decoded = decode(y, rec)
        out.delivered = len(set(zip(out.decoded.users, out.decoded.messages))
                            & set(zip(truth.users, truth.messages)))
    out.correctness = score_outcome(out, truth0, resolution_truth, half)
    return out


def _tensor_from_index(index):
    cache = index.__dict__.get('_tensor')
    if cache is None:
        G = np.zeros((index.N, index.M, index.M), dtype=complex)
        for cw in index.codewords[index.of_size(1)]:
            (u,), (m,) = cw.active_set.users, cw.active_set.messages
            G[u, m] = cw.matrix[:, 0]
        index.__dict__['_tensor'] = cache = G
    return cache


def write_outcome_log(outcomes, path):
    """One row per frame: id, true size, z values, decisions, label, rounds."""
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['frame', 'n_true', 'z', 'collision', 'n_hat', 'pc',
                         'status', 'correctness', 'rounds', 'offered', 'delivered'])
        for i, o in enumerate(outcomes):
            writer.writerow([
                i, o.phases[0].truth.size,
                ' '.join(repr(r.z) for r in o.phases),
                ' '.join(str(int(r.collision)) for r in o.phases),
                ' '.join('' if r.n_hat is None else str(r.n_hat) for r in o.phases),
                ' '.join('' if r.pc is None else repr(r.pc) for r in o.phases),
                o.status, o.correctness, o.rounds, o.offered, o.delivered])

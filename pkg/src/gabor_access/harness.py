"""
Monte Carlo frame-error-rate experiments.

Frames of each grid point are simulated in fixed-size chunks. Each chunk
draws its initial frames from a stream derived from ``(seed, snr index,
chunk index)`` and its resolution rounds from a sibling stream. Results
therefore do not depend on the number of worker processes, and the genie and
blind receivers as well as different ``p_c`` policies see the same initial
frames.
"""

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import __version__
from .channel import RngStream, snr_db_to_linear
from .decoder import calibrate_threshold, table_key
from .effective_codebook import enumerate_codebook
from .gabor_frames import FrameConfig, build_codebooks, codeword_tensor
from .protocol import LABELS, ProtocolConfig, run_frame

__all__ = [
    'ConfigError', 'ExperimentConfig', 'FerResult', 'ResultSet',
    'load_config', 'wilson_interval', 'calibrate_grid', 'run_experiment',
    'genie_baseline', 'write_results_csv', 'read_results_csv',
    'emit_plot_data',
]

log = logging.getLogger(__name__)

# stream tags keep calibration and frame simulation draws apart
_FRAMES, _CALIBRATION = 1, 2


class ConfigError(ValueError):
    pass


def _parse_pc(value):
    if isinstance(value, str):
        items = [v.strip() for v in value.split(',') if v.strip()]
    else:
        items = list(value) if isinstance(value, (list, tuple)) else [value]
    out = []
    for v in items:
        if isinstance(v, str) and v.lower() in ('rule', 'default'):
            out.append('rule')
            continue
        try:
            f = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"p_c must be 'rule' or a number, got {v!r}") from None
        if not 0.0 < f <= 1.0:
            raise ConfigError(f"p_c must lie in (0, 1], got {f}")
        out.append(f)
    return tuple(out)


def _parse_floats(value):
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(',') if v.strip())
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return (float(value),)


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ('1', 'true', 'yes', 'on'):
        return True
    if s in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 5
    N: int = 5
    p: float = 0.2
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    pc: tuple = ('rule',)
    frames: int = 10_000
    seed: int = 0
    mode: str = 'known_n'
    n_max: int = None
    calib_samples: int = 100_000
    hist_samples: int = 20_000
    max_ratio: float = 1.0
    chunk: int = 1000
    redraw_channel: bool = True
    fresh_messages: bool = False
    noiseless: bool = False
    out: str = None

    _types = {
        'M': int, 'N': int, 'p': float, 'snr_db': _parse_floats, 'pc': _parse_pc,
        'frames': int, 'seed': int, 'mode': str, 'n_max': int,
        'calib_samples': int, 'hist_samples': int, 'max_ratio': float,
        'chunk': int, 'redraw_channel': _parse_bool,
        'fresh_messages': _parse_bool, 'noiseless': _parse_bool, 'out': str,
    }

    def __post_init__(self):
        object.__setattr__(self, 'snr_db', _parse_floats(self.snr_db))
        object.__setattr__(self, 'pc', _parse_pc(self.pc))
        try:
            FrameConfig(self.M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 1 <= self.N <= self.M:
            raise ConfigError(f"N must lie in 1..M, got {self.N}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if self.frames < 1 or self.chunk < 1:
            raise ConfigError("frames and chunk must be >= 1")
        if self.mode not in ('known_n', 'plain', 'map'):
            raise ConfigError(f"unknown decoder mode {self.mode!r}")
        if self.n_max is not None and not 0 <= self.n_max <= self.N:
            raise ConfigError(f"n_max must lie in 0..N, got {self.n_max}")
        if not self.snr_db:
            raise ConfigError("at least one SNR point is required")

    @classmethod
    def from_mapping(cls, mapping):
        kwargs = {}
        for key, value in mapping.items():
            key = key.strip().replace('-', '_')
            key = {'m': 'M', 'n_users': 'N', 'nmax': 'n_max', 'n': 'N'}.get(key, key)
            if key not in cls._types:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None or (isinstance(value, str) and value.strip().lower() == 'none'):
                kwargs[key] = None
                continue
            try:
                kwargs[key] = cls._types[key](value)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
        return cls(**kwargs)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d['snr_db'] = list(d['snr_db'])
        d['pc'] = list(d['pc'])
        return d

    def config_hash(self):
        d = self.as_dict()
        d.pop('out')
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def decode_n_max(self):
        return self.M // 2 if self.n_max is None else self.n_max


def load_config(path):
    """
    Read a flat ``key = value`` file; ``#`` starts a comment, lists are
    comma separated.
    """
    mapping = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split('=', 1)
            mapping[key.strip()] = value.strip()
    return mapping


def wilson_interval(errors, frames, confidence=0.95):
    lo, hi = proportion_confint(errors, frames, alpha=1 - confidence, method='wilson')
    return float(lo), float(hi)


def _pc_label(pc):
    return 'rule' if pc == 'rule' else repr(float(pc))


@dataclass
class FerResult:
    mode: str
    snr_db: float
    pc: str
    frames: int
    counts: dict
    offered: int
    delivered: int
    ci_low: float
    ci_high: float
    wall_time: float = field(default=0.0, compare=False)

    @property
    def errors(self):
        return self.frames - self.counts['correct']

    @property
    def fer(self):
        return self.errors / self.frames

    @property
    def sigma(self):
        """Binomial standard error of the FER estimate."""
        f = self.fer
        return math.sqrt(f * (1 - f) / self.frames)


@dataclass
class ResultSet:
    results: list
    metadata: dict

    def get(self, snr_db, pc='rule', mode=None):
        for r in self.results:
            if r.snr_db == snr_db and r.pc == _pc_label(pc) and (mode is None or r.mode == mode):
                return r
        raise KeyError((snr_db, pc, mode))


@lru_cache(maxsize=8)
def _problem(M, N, p, n_max):
    codebooks = build_codebooks(FrameConfig(M))
    index = enumerate_codebook(codebooks, N, p, n_max)
    return codebooks, index, codeword_tensor(codebooks[:N])


def calibrate_grid(config, tables=None):
    """
    Threshold tables for every SNR point of `config`, calibrating those not
    present in `tables`. Returns ``(tables, provenance)``.
    """
    tables = dict(tables or {})
    codebooks, _, _ = _problem(config.M, config.N, config.p, config.decode_n_max)
    provenance = []
    for i, snr in enumerate(config.snr_db):
        key = table_key(config.M, config.N, config.p, snr)
        if key in tables:
            provenance.append(f'{snr:g}dB:loaded')
            continue
        stream = (_CALIBRATION, i)
        log.info("calibrating t_z at %g dB with %d samples per class",
                 snr, config.calib_samples)
        prov = (f'auto seed={config.seed} stream={stream} '
                f'samples={config.calib_samples} hist={config.hist_samples}')
        t = calibrate_threshold(
            config.M, config.N, config.p, float(snr_db_to_linear(snr)),
            samples=config.calib_samples, max_ratio=config.max_ratio,
            rng=RngStream(config.seed, stream).generator(),
            hist_samples=config.hist_samples, codebooks=codebooks,
            provenance=prov)
        t.rho_db = float(snr)
        tables[key] = t
        provenance.append(f'{snr:g}dB:{prov}')
    return tables, '; '.join(provenance)


def _simulate_chunk(args):
    config, snr_index, pc, chunk_index, n_frames, table, genie = args
    _, index, G = _problem(config.M, config.N, config.p,
                           max(config.decode_n_max, config.M // 2 if genie else 0))
    pconf = ProtocolConfig(
        config.N, config.M, config.p, float(snr_db_to_linear(config.snr_db[snr_index])),
        pc=None if pc == 'rule' else pc, mode=config.mode, n_max=config.n_max,
        genie=genie, redraw_channel=config.redraw_channel,
        fresh_messages=config.fresh_messages, noiseless=config.noiseless)
    rng = RngStream(config.seed, (_FRAMES, snr_index, chunk_index, 0)).generator()
    rng_res = RngStream(config.seed, (_FRAMES, snr_index, chunk_index, 1)).generator()
    counts = dict.fromkeys(LABELS, 0)
    offered = delivered = 0
    for _ in range(n_frames):
        o = run_frame(pconf, index, table, rng, G=G, rng_resolution=rng_res)
        counts[o.correctness] += 1
        offered += o.offered
        delivered += o.delivered
    return counts, offered, delivered


def _run(config, tables, workers, genie):
    tables, provenance = calibrate_grid(config, tables)
    n_chunks = math.ceil(config.frames / config.chunk)
    results = []
    pool = ProcessPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for si, snr in enumerate(config.snr_db):
            table = tables[table_key(config.M, config.N, config.p, snr)]
            for pc in config.pc:
                t0 = time.perf_counter()
                tasks = [(config, si, pc, c,
                          min(config.chunk, config.frames - c * config.chunk),
                          table, genie) for c in range(n_chunks)]
                parts = pool.map(_simulate_chunk, tasks) if pool else map(_simulate_chunk, tasks)
                counts = dict.fromkeys(LABELS, 0)
                offered = delivered = 0
                for c, o, d in parts:
                    for k in LABELS:
                        counts[k] += c[k]
                    offered += o
                    delivered += d
                errors = config.frames - counts['correct']
                lo, hi = wilson_interval(errors, config.frames)
                results.append(FerResult(
                    'genie' if genie else config.mode, float(snr), _pc_label(pc),
                    config.frames, counts, offered, delivered, lo, hi,
                    time.perf_counter() - t0))
                log.info("%s %g dB pc=%s: FER %.4g", results[-1].mode, snr,
                         results[-1].pc, results[-1].fer)
    finally:
        if pool:
            pool.shutdown()
    metadata = {
        'config_hash': config.config_hash(),
        'code_version': f'gabor_access {__version__}',
        'calibration': provenance,
        # the output path is not part of the experiment
        'config': json.dumps({k: v for k, v in config.as_dict().items() if k != 'out'},
                             sort_keys=True, default=str),
    }
    return ResultSet(results, metadata)


def run_experiment(config, tables=None, workers=1):
    """Blind-receiver FER over the SNR x p_c grid of `config`."""
    return _run(config, tables, workers, genie=False)


def genie_baseline(config, tables=None, workers=1):
    """FER when the receiver knows the number of active users."""
    return _run(config, tables, workers, genie=True)


CSV_COLUMNS = ['mode', 'snr_db', 'pc', 'frames', 'errors', 'fer', 'ci_low',
               'ci_high', *LABELS, 'offered', 'delivered']


def _rows(results):
    for r in results:
        yield [r.mode, repr(r.snr_db), r.pc, r.frames, r.errors, repr(r.fer),
               repr(r.ci_low), repr(r.ci_high), *[r.counts[k] for k in LABELS],
               r.offered, r.delivered]


def write_results_csv(resultset, path):
    """CSV with ``# key: value`` metadata lines above the header."""
    with open(path, 'w', newline='') as fh:
        for k in sorted(resultset.metadata):
            fh.write(f'# {k}: {resultset.metadata[k]}\n')
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        writer.writerows(_rows(resultset.results))


def read_results_csv(path):
    metadata = {}
    body = []
    with open(path, newline='') as fh:
        for line in fh:
            if line.startswith('#'):
                key, _, value = line[1:].strip().partition(': ')
                metadata[key] = value
            else:
                body.append(line)
    results = []
    for row in csv.DictReader(body):
        frames = int(row['frames'])
        results.append(FerResult(
            row['mode'], float(row['snr_db']), row['pc'], frames,
            {k: int(row[k]) for k in LABELS}, int(row['offered']),
            int(row['delivered']), float(row['ci_low']), float(row['ci_high'])))
    return ResultSet(results, metadata)


def emit_plot_data(resultset, path):
    """
    Write `path` (CSV) and a whitespace-separated ``.dat`` twin for gnuplot.

    Returns the two paths.
    """
    write_results_csv(resultset, path)
    dat = str(path).rsplit('.', 1)[0] + '.dat'
    with open(dat, 'w') as fh:
        for k in sorted(resultset.metadata):
            fh.write(f'# {k}: {resultset.metadata[k]}\n')
        fh.write('# columns: ' + ' '.join(CSV_COLUMNS) + '\n')
        for row in _rows(resultset.results):
            fh.write(' '.join(str(v) for v in row) + '\n')
    return path, dat

"""
Collision resolution
====================

When the received energy says more than M//2 users are active, the receiver
announces a collision with an estimate of their number. Each active user
then retransmits with probability p_c and no newcomer may join.
"""
from collections import Counter

import numpy as np

from gabor_access import FrameConfig, build_codebooks, enumerate_codebook
from gabor_access.decoder import calibrate_threshold
from gabor_access.gabor_frames import codeword_tensor
from gabor_access.protocol import ProtocolConfig, default_pc, run_frame

N, M, p, rho = 5, 5, 0.4, 10 ** 1.5        # 15 dB
books = build_codebooks(FrameConfig(M))
index = enumerate_codebook(books, N, p, n_max=2)
G = codeword_tensor(books)

table = calibrate_threshold(M, N, p, rho, samples=50_000,
                            rng=np.random.default_rng(0), codebooks=books)
print(f"threshold t_z = {table.t_z:.1f}: false alarm {table.p_false_alarm:.3f}, "
      f"miss {table.p_miss:.3f}")
print("p_c for estimated sizes 3, 4, 5:", [round(default_pc(n, M), 3) for n in (3, 4, 5)])

# follow one busy frame that triggers the resolution round
rng = np.random.default_rng(1)
out = run_frame(ProtocolConfig(N, M, 0.9, rho), index, table, rng, G=G)
while len(out.phases) < 2:
    out = run_frame(ProtocolConfig(N, M, 0.9, rho), index, table, rng, G=G)
for rec in out.phases:
    print(f"  {rec.phase:10s} active={rec.truth.users} z={rec.z:7.1f} "
          f"collision={rec.collision} n_hat={rec.n_hat} p_c={rec.pc}")
print("  ->", out.status, out.correctness)

for label, pc in (("rule", None), ("p_c = 1", 1.0)):
    cfg = ProtocolConfig(N, M, p, rho, pc=pc)
    rng = np.random.default_rng(2)
    tally = Counter(run_frame(cfg, index, table, rng, G=G).correctness for _ in range(3000))
    print(f"{label:8s}", dict(tally), f"FER {1 - tally['correct'] / 3000:.3f}")

"""
Noncoherent decoding
====================

Draw a frame with a random active set, pass it through block Rayleigh
fading and decode it with the MAP rule over the whole effective codebook,
then with the faster rule that is told the number of active users.
"""
import numpy as np

from gabor_access import FrameConfig, build_codebooks, enumerate_codebook
from gabor_access.channel import draw_active_set, snr_db_to_linear, synthesize_frame
from gabor_access.decoder import energy_statistic, known_n_decode, map_decode

N, M, p = 5, 5, 0.4
index = enumerate_codebook(build_codebooks(FrameConfig(M)), N, p, n_max=2)
print("candidates with at most two users:", len(index))

rng = np.random.default_rng(3)
for snr_db in (0, 10, 20, 30):
    rho = float(snr_db_to_linear(snr_db))
    hits_map = hits_known = trials = 0
    for _ in range(500):
        truth = draw_active_set(N, p, M, rng)
        if truth.size > 2:
            continue
        y = synthesize_frame(index.lookup(truth), rho, rng).y
        trials += 1
        hits_map += map_decode(y, index, rho).active_set == truth
        hits_known += known_n_decode(y, index, truth.size, rho).active_set == truth
    print(f"{snr_db:2d} dB: MAP {hits_map / trials:.3f}, known size {hits_known / trials:.3f}"
          f" ({trials} frames)")

# the received energy grows linearly with the number of active users
rho = 10.0
for n in range(3):
    cw = index.codewords[index.of_size(n)][0]
    z = [energy_statistic(synthesize_frame(cw, rho, rng).y) for _ in range(4000)]
    print(f"n={n}: mean energy {np.mean(z):7.2f}, predicted {M + rho * M * n:g}")

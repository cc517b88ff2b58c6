"""
Gabor-frame codebooks
=====================

Every user owns one orthonormal basis of C^M taken from the Alltop-Gabor
frame. Two codewords of the same user are orthogonal, and codewords of
different users overlap with magnitude exactly 1/sqrt(M).
"""
import numpy as np

from gabor_access import FrameConfig, build_codebooks, verify_coherence
from gabor_access.gabor_frames import codeword_tensor

cfg = FrameConfig(M=5)
books = build_codebooks(cfg)
G = codeword_tensor(books)          # G[user, message, :]
print("codeword tensor:", G.shape)

# user 0, message 0 is the plain Alltop sequence scaled to unit norm
print("g_{0,0} phases / (2 pi):", np.round(np.angle(G[0, 0]) / (2 * np.pi) % 1, 3))

# inner products inside one codebook: the identity
inner = np.abs(G[1].conj() @ G[1].T)
print("within user 1:\n", np.round(inner, 12))

# across users: all magnitudes equal 1/sqrt(M)
cross = np.abs(G[1].conj() @ G[3].T)
print("user 1 vs user 3:\n", np.round(cross, 6), " 1/sqrt(5) =", round(1 / np.sqrt(5), 6))

for M in (5, 7, 11, 13):
    rep = verify_coherence(build_codebooks(FrameConfig(M)))
    print(f"M={M:2d}: distinct |<g,g'>| values {rep.observed_values}, ok={rep.ok}")

# the standard basis can be appended as one more codebook without raising coherence
ext = build_codebooks(FrameConfig(5, include_standard_basis=True))
print("with the standard basis:", len(ext), "codebooks, max coherence",
      round(verify_coherence(ext).max_coherence, 6))

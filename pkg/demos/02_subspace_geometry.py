"""
Subspaces of active-user sets
=============================

Without channel knowledge the receiver can only identify the subspace
spanned by the active codewords. This script measures how far apart those
subspaces are, and shows where distinctness stops: with more than M//2
active users two different sets may span the same subspace.
"""
import numpy as np

from gabor_access import FrameConfig
from gabor_access.gabor_frames import build_codebooks, codeword_tensor
from gabor_access.subspace import chordal_distance, principal_angles, verify_lemma1

cfg = FrameConfig(5)
G = codeword_tensor(build_codebooks(cfg))

A = G[[0, 2], [1, 4]].T          # users 0 and 2 sending messages 1 and 4
B = G[[0, 3], [1, 0]].T          # users 0 and 3, one codeword shared with A
print("principal angles (deg):", np.round(np.degrees(principal_angles(A, B)), 3))
print("chordal distance:", round(chordal_distance(A, B), 6))

# all sets with one and two active users are pairwise distinct
rep = verify_lemma1(cfg, n_max=2)
for n in (1, 2):
    print(f"n={n}: {rep.pairs_checked[n]} pairs, minimum distance {rep.min_distance[n]:.4f}")

# three users in a length-5 frame: the check is outside the guaranteed range
rep3 = verify_lemma1(cfg, sizes=[3])
print(f"n=3: {len(rep3.violations[3])} coincident pairs out of {rep3.pairs_checked[3]}")

# in a length-7 frame three users remain distinguishable
rep7 = verify_lemma1(FrameConfig(7), 3, mode='sampled', n_pairs=200_000, sizes=[3])
print(f"M=7, n=3: sampled {rep7.pairs_checked[3]} pairs, "
      f"minimum distance {rep7.min_distance[3]:.4f}")

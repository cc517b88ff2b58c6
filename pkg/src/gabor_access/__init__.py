"""
Gabor-frame codebooks and noncoherent decoding for random access with
collision resolution.
"""

__version__ = '0.1.0'

from .gabor_frames import (FrameConfig, Codeword, Codebook, alltop_sequence,
                           gabor_codeword, build_codebooks, verify_coherence)
from .subspace import (SvdTriple, svd_decompose, principal_angles,
                       chordal_distance, verify_lemma1)
from .effective_codebook import (ActiveSet, EffectiveCodeword,
                                 EffectiveCodebookIndex, enumerate_codebook,
                                 prior_of, active_set_size_pmf)
from .channel import (RngStream, draw_activity, draw_active_set,
                      synthesize_frame, snr_db_to_linear)
from .decoder import (DecodeResult, ThresholdTable, SizeEstimate,
                      log_likelihood, map_decode, known_n_decode,
                      energy_statistic, calibrate_threshold, estimate_n)
from .protocol import (ProtocolConfig, ProtocolOutcome, default_pc, run_frame,
                       score_outcome)
from .harness import (ExperimentConfig, FerResult, ResultSet, run_experiment,
                      genie_baseline, emit_plot_data)

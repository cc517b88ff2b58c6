"""
Frame error rate against SNR
============================

Blind receiver and known-size benchmark over 0..30 dB for five users.
Writes results to ``fer_sweep.csv`` and ``fer_sweep.dat`` and, when
matplotlib is installed, a figure ``fer_sweep.png``.
"""
from gabor_access.harness import (ExperimentConfig, ResultSet, emit_plot_data,
                                  genie_baseline, run_experiment)

cfg = ExperimentConfig(N=5, M=5, p=0.4, pc=('rule', 1.0), frames=3000, seed=5,
                       calib_samples=30_000)
blind = run_experiment(cfg, workers=2)
genie = genie_baseline(cfg.replace(pc=('rule',)), workers=2)

for r in blind.results + genie.results:
    print(f"{r.mode:8s} p_c={r.pc:5s} {r.snr_db:4.0f} dB  FER {r.fer:.4f} "
          f"[{r.ci_low:.4f}, {r.ci_high:.4f}]")

emit_plot_data(ResultSet(blind.results + genie.results, blind.metadata), 'fer_sweep.csv')

try:
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for res, pc, style in ((blind, 'rule', 'o-'), (blind, '1.0', 's--'), (genie, 'rule', 'k^:')):
        rows = [r for r in res.results if r.pc == pc]
        ax.semilogy([r.snr_db for r in rows], [r.fer for r in rows], style,
                    label=f"{rows[0].mode}, p_c={pc}")
    ax.set_xlabel('SNR [dB]')
    ax.set_ylabel('FER')
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig('fer_sweep.png', dpi=120)
    print("wrote fer_sweep.png")

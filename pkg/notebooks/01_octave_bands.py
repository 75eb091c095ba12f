# %% [markdown]
# # From a vibration snapshot to 89 octave-band levels
#
# One snapshot is 0.1 s of two-axis acceleration sampled at 25.6 kHz. Its
# power spectrum has 1281 bins at 10 Hz spacing, far more than a small
# autoencoder wants to see. The modified octave filter keeps 32 Hz wide
# bands at the low end, where fault tones sit close together, and switches to
# 1/16-octave bands once those become wider than 32 Hz.

# %%
import numpy as np

from explainrul.dsp import band_edges, filter_spectrum, hann_window, power_spectrum, to_decibel
from explainrul.ingest import SynthConfig, synth_bearing_run

spec = band_edges(m=32, n=16, f_max_hz=12800.0)
print("k =", spec.k, " constant-width edges =", spec.n_const, " bands =", spec.n_bands)
print("first edges:", spec.edges_hz[:5], "...")
print("switch-over:", spec.edges_hz[spec.n_const - 2:spec.n_const + 2].round(1))
print("last edge: %.1f Hz" % spec.edges_hz[-1])

# %% [markdown]
# Band widths: flat, then growing geometrically.

# %%
widths = np.diff(spec.edges_hz)
for i in (0, 10, 22, 23, 24, 40, 60, 88):
    print(f"band {i:2d}: {spec.edges_hz[i]:8.1f} - {spec.edges_hz[i + 1]:8.1f} Hz  (width {widths[i]:6.1f})")

# %% [markdown]
# A synthetic run: the fault tone at 168 Hz and the resonances at 3.8 and
# 7.6 kHz switch on at record 60 and then grow.

# %%
cfg = SynthConfig(fault_freqs_hz=(168.0, 236.0), resonance_centers_hz=(3800.0, 7600.0),
                  duration_records=100, degradation_onset_record=60,
                  degradation_rate=0.005, onset_amplitude_g=0.1, seed=1)
run = synth_bearing_run(cfg)
w = hann_window(cfg.record_len)
early = power_spectrum(run.records[10].horiz, cfg.sample_rate_hz, w)
late = power_spectrum(run.records[-1].horiz, cfg.sample_rate_hz, w)
print("bins:", early.psd.size, " bin width:", early.bin_width_hz, "Hz")

# %%
b_early = to_decibel(filter_spectrum(early, spec))
b_late = to_decibel(filter_spectrum(late, spec))
for f in (30.0, 168.0, 236.0, 3800.0, 7600.0, 10000.0):
    i = spec.band_of(f)
    print(f"{f:7.0f} Hz -> band {i:2d}: {b_early[i]:7.2f} dB before, {b_late[i]:7.2f} dB at the end")

# %%
print("compression: %d / %d = %.3f" % (spec.n_bands, early.psd.size, spec.n_bands / early.psd.size))

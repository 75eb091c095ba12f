import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from explainrul.dsp import band_edges, record_band_vectors
from explainrul.ingest import SynthConfig, synth_bearing_run
from explainrul.models import train_autoencoder
from explainrul.neural import CostConfig, TrainOptions
from explainrul.preprocess import apply_normalizer, assemble_matrix, band_row_labels, fit_normalizer

ONSET = 60
DURATION = 100


def synth_cfg(seed, **kw):
    base = dict(
        fault_freqs_hz=(168.0, 236.0),
        resonance_centers_hz=(3800.0, 7600.0),
        duration_records=DURATION,
        degradation_onset_record=ONSET,
        degradation_rate=0.3 / (DURATION - ONSET),
        onset_amplitude_g=0.1,
        seed=seed,
    )
    base.update(kw)
    return SynthConfig(**base)


def normalized_matrix(rs, spec):
    h, v = record_band_vectors(rs.records, rs.sample_rate_hz, spec)
    m = assemble_matrix(h, v, band_row_labels(spec))
    return apply_normalizer(m, fit_normalizer(m, 0.8))


@pytest.fixture(scope="session")
def paper_spec():
    return band_edges(32, 16, 12800.0)


@pytest.fixture(scope="session")
def synthetic_matrices(paper_spec):
    """Normalized matrices of three seeded degradation runs (onset at record 60)."""
    return [normalized_matrix(synth_bearing_run(synth_cfg(seed)), paper_spec) for seed in (11, 12, 13)]


@pytest.fixture(scope="session")
def trained_ae(synthetic_matrices):
    cols = np.hstack([m.values for m in synthetic_matrices[:2]]).T
    ae, hist = train_autoencoder(
        cols,
        cfg=CostConfig(beta=0.0),
        opt=TrainOptions(learning_rate=3e-3, epochs=600, patience=150, seed=5, validation_fraction=0.5),
    )
    return ae, hist


# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, ok, detail):
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

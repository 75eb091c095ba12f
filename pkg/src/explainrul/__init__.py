"""Octave-band spectra, sparse-autoencoder health features and RUL regression
for rolling-element bearings, with tools to explain what the features mean."""

from .dsp import OctaveBandSpec, PowerSpectrum, band_edges, filter_spectrum, hann_window, power_spectrum, to_decibel
from .errors import (
    ConfigError,
    DependencyError,
    DivergenceError,
    ExplainRulError,
    ModelFileError,
    ParseError,
    StructuralError,
)
from .explain import (
    BearingGeometry,
    FeatureTrajectory,
    annotate_bands,
    characteristic_frequencies,
    connection_weight_importance,
    inject_features,
    reactive_monitor,
)
from .ingest import FormatSpec, Record, RecordSet, SynthConfig, load_record_set, synth_bearing_run
from .models import (
    AeModel,
    FfnnModel,
    decode,
    encode,
    estimate_rul,
    load_model,
    save_model,
    train_autoencoder,
    train_ffnn,
)
from .neural import CostConfig, Network, TrainOptions, cost, forward, gradients, train
from .preprocess import FeatureMatrix, NormalizationStats, apply_normalizer, assemble_matrix, fit_normalizer
from .prognosis import (
    RulSeries,
    anomaly_onset,
    detect_change_points,
    fit_linear_baseline,
    label_rul,
    predict_linear,
    relative_error,
    rmse,
)

__all__ = [
    "AeModel",
    "BearingGeometry",
    "ConfigError",
    "CostConfig",
    "DependencyError",
    "DivergenceError",
    "ExplainRulError",
    "FeatureMatrix",
    "FeatureTrajectory",
    "FfnnModel",
    "FormatSpec",
    "ModelFileError",
    "Network",
    "NormalizationStats",
    "OctaveBandSpec",
    "ParseError",
    "PowerSpectrum",
    "Record",
    "RecordSet",
    "RulSeries",
    "StructuralError",
    "SynthConfig",
    "TrainOptions",
    "annotate_bands",
    "anomaly_onset",
    "apply_normalizer",
    "assemble_matrix",
    "band_edges",
    "characteristic_frequencies",
    "connection_weight_importance",
    "cost",
    "decode",
    "detect_change_points",
    "encode",
    "estimate_rul",
    "filter_spectrum",
    "fit_linear_baseline",
    "fit_normalizer",
    "forward",
    "gradients",
    "hann_window",
    "inject_features",
    "label_rul",
    "load_model",
    "load_record_set",
    "power_spectrum",
    "predict_linear",
    "reactive_monitor",
    "relative_error",
    "rmse",
    "save_model",
    "synth_bearing_run",
    "to_decibel",
    "train",
    "train_autoencoder",
    "train_ffnn",
]

__version__ = "0.1.0"

"""Semi-supervised anomaly detection for HPC nodes with per-node sparse autoencoders."""

from .autoencoder import AutoencoderModel, TrainConfig, forward, reconstruction_error, train
from .dataprep import NormStats, apply_norm, fit_norm, filter_valid, split
from .detector import DetectorProfile, calibrate, classify, percentile
from .synthgen import AnomalySchedule, GovernorMode, LabeledTrace, NodeProfile, fleet_generate, generate_trace

__version__ = "0.1.0"

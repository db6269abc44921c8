"""Blind inversion of saturating channels for covariance-model speaker identification."""
from .channel import FirFilter, TanhSaturation, fir_convolve, make_saturated_testset, wiener_forward
from .experiment import ExperimentConfig, ExperimentReport, report_render, run_experiment
from .inversion import HammersteinInverse, InversionConfig, estimate_inverse, marginal_entropy
from .recognition import enroll, fuse, identify
from .signal import Signal

__version__ = "0.1.0"

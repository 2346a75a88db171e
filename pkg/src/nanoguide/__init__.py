"""Simulation and inference toolkit for single emitters on a 1D nanoguide."""

from .core import (
    DriveField,
    Emitter,
    SpectralGrid,
    StarkCoefficients,
    ValidationError,
    ideal_cross_section,
    lifetime_to_linewidth,
    linewidth_to_lifetime,
)
from .dynamics import DensityMatrix, LiouvilleProblem, g2, resonant_g2, steady_state
from .inference import FitResult, extinction_to_beta, fit_g2, fit_lorentzian, fit_stark_slope
from .photostream import PhotonRecord, PhotonStream, cross_correlate, simulate_stream
from .pump_probe import PumpProbeScan, TransmissionMap, probe_response
from .scattering import GuideSegment, ScatterResponse, cascade_response, single_emitter_response
from .stark import Ensemble, align_pair, excitation_map, make_ensemble, shifted_frequency

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DriveField",
    "Emitter",
    "SpectralGrid",
    "StarkCoefficients",
    "ValidationError",
    "ideal_cross_section",
    "lifetime_to_linewidth",
    "linewidth_to_lifetime",
    "DensityMatrix",
    "LiouvilleProblem",
    "g2",
    "resonant_g2",
    "steady_state",
    "FitResult",
    "extinction_to_beta",
    "fit_g2",
    "fit_lorentzian",
    "fit_stark_slope",
    "PhotonRecord",
    "PhotonStream",
    "cross_correlate",
    "simulate_stream",
    "PumpProbeScan",
    "TransmissionMap",
    "probe_response",
    "GuideSegment",
    "ScatterResponse",
    "cascade_response",
    "single_emitter_response",
    "Ensemble",
    "align_pair",
    "excitation_map",
    "make_ensemble",
    "shifted_frequency",
]

"""Effective multi-body couplings and learning dynamics of spin models.

Modules
-------
pbf
    Fourier analysis on {-1,+1}**N: transforms, spectra, influences.
hobm
    Boltzmann machines with explicit multi-body couplings; exact convex
    maximum-likelihood fitting.
rbm
    Restricted Boltzmann machines over spins, their exact effective
    couplings, and parallel-tempering sampling.
dynamics
    Gradient-flow training, fixed-point classification, stability, and
    order-by-order learning diagnostics.
ridge
    L2 regularization in effective-coupling space via the Parseval
    identity.
datasets
    Synthetic spin models, exact and Markov-chain sampling, dataset files.
cli
    The ``fourspin`` command-line interface.
"""

from . import cli, datasets, dynamics, hobm, pbf, rbm, ridge
from .datasets import DatasetConfig, three_body_chain
from .dynamics import TrainConfig, classify_fixed_point, dsb_report, train
from .hobm import (
    EmpiricalSamples,
    FitConfig,
    HigherOrderModel,
    ProbabilityTable,
    fit,
)
from .pbf import (
    FourierSpectrum,
    SubsetVector,
    fast_transform,
    fwht,
    influence,
    inverse_transform,
    total_influence,
)
from .rbm import SpinRbm, BinaryRbm, extract_couplings_exact, initialize
from .ridge import RidgeConfig, penalty, ridge_nll

__version__ = "0.1.0"

__all__ = [
    "BinaryRbm",
    "DatasetConfig",
    "EmpiricalSamples",
    "FitConfig",
    "FourierSpectrum",
    "HigherOrderModel",
    "ProbabilityTable",
    "RidgeConfig",
    "SpinRbm",
    "SubsetVector",
    "TrainConfig",
    "classify_fixed_point",
    "cli",
    "datasets",
    "dsb_report",
    "dynamics",
    "extract_couplings_exact",
    "fast_transform",
    "fit",
    "fwht",
    "hobm",
    "influence",
    "initialize",
    "inverse_transform",
    "pbf",
    "penalty",
    "rbm",
    "ridge",
    "ridge_nll",
    "three_body_chain",
    "total_influence",
    "train",
    "__version__",
]

"""GP-based Bayesian optimization over discrete spaces, with median-rule early stopping."""

from .acq import AcqParams, expected_improvement, optimize_acquisition
from .errors import (
    GPBOError,
    InvalidConfigurationError,
    InvalidInputError,
    NotReadyError,
    NumericalFailureError,
    ParseError,
    ProtocolViolationError,
)
from .fidelity import FidelityParams, impute_stopped, run_final, should_stop
from .gp import GPModel, KernelParams, fit, predict
from .history import History, Observation, Source
from .initdesign import InitDesignParams, random_explore_first
from .loop import Controller, LoopParams, run_preliminary
from .space import Configuration, HyperparameterDef, Space

__version__ = "0.1.0"

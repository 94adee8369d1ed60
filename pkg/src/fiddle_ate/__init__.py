"""Factor-informed double deep learning for average treatment effects."""
from .ate import AteResult, aipw, fit_fiddle, oracle_aipw, oracle_ipw, plugin_variance, truncate_propensity
from .config import PipelineConfig, preset
from .data import Dataset, load_csv, write_csv
from .dgp import DgpSpec, generate

__all__ = [
    "AteResult", "Dataset", "DgpSpec", "PipelineConfig", "aipw", "fit_fiddle", "generate",
    "load_csv", "oracle_aipw", "oracle_ipw", "plugin_variance", "preset", "truncate_propensity",
    "write_csv",
]
__version__ = "0.1.0"

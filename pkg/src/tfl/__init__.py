"""tfl: univariate traffic forecasting with seq2seq LSTMs, wavelet-based
data augmentation, and two-phase transfer learning."""

__version__ = "0.1.0"

from . import dataset, evaluation, model_io, network, numeric, training, wavelet
from .errors import DataError, NumericError, TflError, UsageError

__all__ = [
    "dataset",
    "evaluation",
    "model_io",
    "network",
    "numeric",
    "training",
    "wavelet",
    "DataError",
    "NumericError",
    "TflError",
    "UsageError",
]

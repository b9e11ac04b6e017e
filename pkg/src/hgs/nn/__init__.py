from . import ad
from .ad import NonFiniteError, Var, value_and_grad
from .gradcheck import GradCheckResult, finite_diff_check
from .layers import EncoderSpec, MlpSpec, encode, init_lstm, init_mlp, lstm_cell, mlp_forward
from .params import ParamVector, grad

__all__ = [
    "ad", "EncoderSpec", "GradCheckResult", "MlpSpec", "NonFiniteError", "ParamVector", "Var",
    "encode", "finite_diff_check", "grad", "init_lstm", "init_mlp", "lstm_cell", "mlp_forward",
    "value_and_grad",
]

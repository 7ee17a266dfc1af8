from .gradcheck import GradCheckReport, ParamCheckRow, grad_check
from .linalg import check_finite, dense, linear, softmax, uniform_init
from .params import ParamStore
from .tape import Var

__all__ = [
    "GradCheckReport",
    "ParamCheckRow",
    "ParamStore",
    "Var",
    "check_finite",
    "dense",
    "grad_check",
    "linear",
    "softmax",
    "uniform_init",
]

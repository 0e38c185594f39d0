from .precision import Precision, precision, get_precision, check_same_precision
from .ops import (
    add,
    sub,
    mul,
    matmul,
    broadcast_to,
    conv2d,
    conv_transpose2d,
    pool2d,
    relu,
    tanh,
    sigmoid,
    leaky_relu,
    reduce,
    backward,
    zero_grad,
    REDUCE_KINDS,
    LOG_EPS,
)
from .gradcheck import CheckReport, GradEntry, finite_difference_check, relative_error

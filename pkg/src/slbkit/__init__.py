"""Numerical toolkit for Shannon-type lower bounds on lossy compression rates."""

from .model import (Alphabet, DistortionSpec, WindowFunction, abs_error, square_error, hamming,
                    make_iwf, negcorr, table_function, eval_distortion, SLBError, DomainError,
                    LengthError, DivergenceError)
from .phi import phi, phi_real_line, log_partition, maxent_check, distortion_rate_bound

__version__ = "0.1.0"

"""Anisotropic tensor brushlet bases in the frequency domain."""
from .anisotropy import Anisotropy, bracket, dilate, quasi_norm, quasi_norm_inf
from .brushlet1d import Bell, RampProfile, bell_eval, brushlet_freq_eval, ramp_eval
from .covering import CoveringSpec, CutInterval, FreqRect, build_layer, locate
from .grid import CoverageError, GridFunction
from .quadrature import QuadratureError
from .tensor_basis import BrushIndex, enumerate_active, gram_matrix, layer_box, projection_identities
from .transform import CoefficientSet, analyze, basis_element, gaussian, parseval_report, synthesize
from .seqnorm import NormParams, f_norm, lorentz_norm, m_norm
from .approx import (bernstein_experiment, counting_bound_check, greedy_m_term,
                     jackson_experiment, sigma_m_curve)

__version__ = "0.1.0"

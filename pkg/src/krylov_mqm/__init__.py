"""Lanczos coefficients and Krylov complexity for finite spectral measures.

Built-in measures cover decoupled harmonic oscillators and the planar
one-matrix model in quadratic and quartic wells, in the ground state and at
finite temperature.
"""

__version__ = "0.1.0"

from .convergence import ConvergenceReport, convergence_report, first_peak, ratio_radius
from .evolution import KrylovEvolution, check_norm, complexity, evolve
from .lanczos import (HankelReport, LanczosData, branch_fits, hankel_check, lanczos_coefficients,
                      lanczos_direct, lanczos_even, lanczos_general, linear_fit)
from .models import (MQMQuarticSpec, OscillatorChainSpec, mqm_free_spectrum, mqm_quartic_spectrum,
                     mqm_quartic_spectrum_numeric, mqm_quartic_thermal, oscillator_ground,
                     oscillator_thermal, quartic_coefficients, quartic_mode_amplitudes)
from .special import elliptic_K, nome, quartic_params
from .spectral import (GROUND, InnerProduct, MomentSequence, PrecisionError, SpectralLine,
                       SpectralMeasure, correlator, kms, moments, normalize, thermalize)

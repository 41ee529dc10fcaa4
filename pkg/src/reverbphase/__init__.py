"""Generalized Polack reverberation statistics and phase-invariant losses."""
from .errors import ConfigurationError
from .kernels import BACKEND
from .losses import LossMode, loss, loss_phase_sensitivity, phase_substitution_demo, sisdr
from .profiles import (ArProfileSpec, FrequencyProfile, constant_profile, rt60_to_alpha,
                       sample_ar_profile, tabulated_profile)
from .spectral import StftConfig, istft, stft
from .synth import (FilterBank, GeneralizedSampler, ImpulseResponse, Signal, default_bank,
                    generalized_polack, simple_polack, synth_test_signal)
from .theory import (SpectralMoment, bandlimited_sigma, closed_form_sigma,
                     fourier_autocorrelation, quadrature_sigma)

__version__ = "0.1.0"

"""
2D Fourier transforms and the amplitude-mixing style generator.
"""

from .transforms import (
    AmpPhase,
    Spectrum,
    decompose,
    dft2,
    fft,
    idft2,
    is_power_of_two,
    recompose,
)
from .generator import (
    alpha_grad_f,
    alpha_grads_f,
    combine_directions,
    fourier_directions,
    generate_f,
    mix_amplitudes,
)

__all__ = [
    # Transforms
    "Spectrum",
    "AmpPhase",
    "fft",
    "dft2",
    "idft2",
    "decompose",
    "recompose",
    "is_power_of_two",

    # Generator
    "mix_amplitudes",
    "generate_f",
    "fourier_directions",
    "combine_directions",
    "alpha_grads_f",
    "alpha_grad_f",
]

"""
Radix-2 fast Fourier transforms and the amplitude/phase split of image spectra.

Transforms act on the last two axes, so a single image ``[c, h, w]`` and a
batch ``[n, c, h, w]`` (or ``[n, m, c, h, w]``) go through the same code.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from modedg.utils.errors import AmplitudeError, ShapeError, SizeError


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    indices = np.arange(n)
    reversed_ = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        reversed_ |= ((indices >> b) & 1) << (bits - 1 - b)
    return reversed_


def fft(x: np.ndarray, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """
    Iterative decimation-in-time FFT along one axis.

    Args:
        x: Real or complex array
        axis: Axis to transform
        inverse: Use the conjugate kernel; no 1/n scaling is applied

    Returns:
        Complex array of the same shape

    Raises:
        SizeError: If the transformed extent is not a power of two
    """
    data = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    n = data.shape[-1]
    if not is_power_of_two(n):
        raise SizeError(f"FFT extent must be a power of two, got {n}")

    out = data[..., _bit_reversal(n)]
    lead = out.shape[:-1]
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        size *= 2
    return np.moveaxis(out, -1, axis)


@dataclass
class Spectrum:
    """Real and imaginary planes of a 2D spectrum."""
    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        self.real = _values(self.real)
        self.imag = _values(self.imag)
        if self.real.shape != self.imag.shape:
            raise ShapeError(f"spectrum planes differ: {self.real.shape} vs {self.imag.shape}")

    @classmethod
    def from_complex(cls, values: np.ndarray) -> "Spectrum":
        return cls(values.real.copy(), values.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.real.shape


@dataclass
class AmpPhase:
    """Amplitude (non-negative) and phase (radians in (-pi, pi]) planes."""
    amplitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        self.amplitude = _values(self.amplitude)
        self.phase = _values(self.phase)
        if self.amplitude.shape != self.phase.shape:
            raise ShapeError(f"amplitude {self.amplitude.shape} and phase {self.phase.shape} differ")


def _check_extents(shape: Tuple[int, ...]) -> None:
    if len(shape) < 2:
        raise ShapeError(f"2D transforms need at least 2 axes, got shape {shape}")
    h, w = shape[-2:]
    if not (is_power_of_two(h) and is_power_of_two(w)):
        raise SizeError(f"spatial extents must be powers of two, got {h}x{w}")


def dft2(image) -> Spectrum:
    """Forward 2D DFT over the last two axes."""
    values = _values(image)
    _check_extents(values.shape)
    return Spectrum.from_complex(fft(fft(values, axis=-1), axis=-2))


def idft2(spec: Spectrum, return_residue: bool = False) -> Union[np.ndarray, Tuple[np.ndarray, float]]:
    """
    Inverse 2D DFT with 1/(h*w) normalization.

    Args:
        spec: Spectrum to invert
        return_residue: Also return the largest absolute imaginary part

    Returns:
        Real part of the inverse transform, optionally with the residue
    """
    if spec.real.shape != spec.imag.shape:
        raise ShapeError(f"spectrum planes differ: {spec.real.shape} vs {spec.imag.shape}")
    _check_extents(spec.shape)
    h, w = spec.shape[-2:]
    values = fft(fft(spec.to_complex(), axis=-1, inverse=True), axis=-2, inverse=True) / (h * w)
    real = values.real.copy()
    if return_residue:
        residue = float(np.abs(values.imag).max()) if values.size else 0.0
        return real, residue
    return real


def decompose(spec: Spectrum) -> AmpPhase:
    """Polar form of a spectrum; the phase uses the two-argument arctangent."""
    amplitude = np.hypot(spec.real, spec.imag)
    phase = np.arctan2(spec.imag, spec.real)
    # Principal range is half-open at -pi
    phase[phase == -np.pi] = np.pi
    return AmpPhase(amplitude, phase)


def recompose(ap: AmpPhase) -> Spectrum:
    """
    Cartesian form ``A * exp(+j P)``.

    Raises:
        AmplitudeError: If any amplitude entry is negative
    """
    if np.any(ap.amplitude < 0):
        raise AmplitudeError(f"amplitude has negative entries (min {ap.amplitude.min():.3g})")
    return Spectrum(ap.amplitude * np.cos(ap.phase), ap.amplitude * np.sin(ap.phase))

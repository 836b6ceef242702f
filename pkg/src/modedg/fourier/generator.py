"""
Fourier-based generation of style-shifted images.

An image's amplitude spectrum is treated as style and its phase as content.
New images keep the phase of ``x`` and take an amplitude mixed from ``x`` and
M style providers:

    A_hat = gamma * (alpha_0 * A(x) + sum_l alpha_l * A(p_l)) + (1 - gamma) * A(x)
    x_hat = Re idft2(A_hat * exp(j * P(x)))

Because the inverse transform is linear, ``x_hat`` is affine in ``alpha``:
``x_hat = x + gamma * (sum_l alpha_l * d_l - x)`` with ``d_0 = x`` and
``d_l = Re idft2(A(p_l) * exp(j * P(x)))``. :func:`fourier_directions`
precomputes the ``d_l`` so exploration never re-runs the transforms.
"""
from typing import Sequence, Tuple

import numpy as np
from loguru import logger

from modedg.autodiff import Tensor, grad, softmax_cross_entropy
from modedg.utils.errors import AmplitudeError, ShapeError
from modedg.utils.validation import check_gamma, simplex_weights

from .transforms import AmpPhase, decompose, dft2, idft2, recompose

RESIDUE_TOLERANCE = 1e-9


def mix_amplitudes(alpha, gamma: float, a_self, providers: Sequence) -> np.ndarray:
    """
    Mix amplitude planes with simplex weights.

    Args:
        alpha: Weights over [self, provider_1, ..., provider_M]
        gamma: Mixing strength in [0, 1]
        a_self: Amplitude of the explored image
        providers: M provider amplitudes shaped like ``a_self``

    Returns:
        Mixed amplitude, entrywise inside the range of the inputs

    Raises:
        SimplexError: If alpha is off the simplex
        ShapeError: On a provider count or shape mismatch
        AmplitudeError: If an amplitude is negative
    """
    weights = simplex_weights(alpha)
    gamma = check_gamma(gamma)
    a_self = np.asarray(a_self, dtype=np.float64)
    planes = [np.asarray(p, dtype=np.float64) for p in providers]
    if weights.ndim != 1 or len(planes) != len(weights) - 1:
        raise ShapeError(f"{len(weights)} weights given for {len(planes)} providers")
    for plane in [a_self] + planes:
        if plane.shape != a_self.shape:
            raise ShapeError(f"amplitude shapes differ: {plane.shape} vs {a_self.shape}")
        if np.any(plane < 0):
            raise AmplitudeError("amplitude planes must be non-negative")

    mixed = weights[0] * a_self
    for weight, plane in zip(weights[1:], planes):
        mixed = mixed + weight * plane
    # a_self + gamma * (mixed - a_self) is exact for gamma = 0 and for alpha = e_0
    return a_self + gamma * (mixed - a_self)


def generate_f(alpha, gamma: float, x, providers: Sequence, clamp: bool = True) -> np.ndarray:
    """
    Generate one image with the amplitude of ``x`` mixed toward its providers.

    Args:
        alpha: Weights over [self, provider_1, ..., provider_M]
        gamma: Mixing strength in [0, 1]
        x: Image ``[c, h, w]`` with pixels in [0, 1] and power-of-two extents
        providers: M images shaped like ``x``
        clamp: Clip the result to [0, 1]

    Returns:
        Generated image ``[c, h, w]``
    """
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    for p in providers:
        if np.shape(p) != x.shape:
            raise ShapeError(f"provider shape {np.shape(p)} does not match image {x.shape}")
    own = decompose(dft2(x))
    provider_amps = [decompose(dft2(p)).amplitude for p in providers]
    mixed = mix_amplitudes(alpha, gamma, own.amplitude, provider_amps)
    image, residue = idft2(recompose(AmpPhase(mixed, own.phase)), return_residue=True)
    if residue > RESIDUE_TOLERANCE:
        logger.warning(f"Generated image has imaginary residue {residue:.3g}")
    return np.clip(image, 0.0, 1.0) if clamp else image


def fourier_directions(x: np.ndarray, providers: np.ndarray) -> np.ndarray:
    """
    Images spanned by the Fourier generator.

    Args:
        x: Images ``[n, c, h, w]``
        providers: Provider images ``[n, M, c, h, w]``

    Returns:
        Array ``[n, M + 1, c, h, w]`` whose slot 0 is ``x`` and slot l is the
        phase of ``x`` recombined with the amplitude of provider l
    """
    x = np.asarray(x, dtype=np.float64)
    providers = np.asarray(providers, dtype=np.float64)
    if x.ndim != 4 or providers.ndim != 5 or providers.shape[0] != x.shape[0] \
            or providers.shape[2:] != x.shape[1:]:
        raise ShapeError(f"images {x.shape} and providers {providers.shape} are incompatible")
    own_phase = decompose(dft2(x)).phase[:, None]
    provider_amp = decompose(dft2(providers)).amplitude
    directions = idft2(recompose(AmpPhase(provider_amp, np.broadcast_to(own_phase, provider_amp.shape))))
    return np.concatenate((x[:, None], directions), axis=1)


def combine_directions(weights, gamma: float, directions: np.ndarray, clamp: bool = True) -> np.ndarray:
    """
    Evaluate the generator from precomputed directions.

    Args:
        weights: Simplex weights ``[n, M + 1]``
        gamma: Mixing strength in [0, 1]
        directions: Output of :func:`fourier_directions`
        clamp: Clip the result to [0, 1]

    Returns:
        Generated images ``[n, c, h, w]``
    """
    weights = simplex_weights(weights)
    gamma = check_gamma(gamma)
    x = directions[:, 0]
    n, m = directions.shape[:2]
    mixed = np.einsum("nm,nmk->nk", weights, directions.reshape(n, m, -1)).reshape(x.shape)
    image = x + gamma * (mixed - x)
    return np.clip(image, 0.0, 1.0) if clamp else image


def alpha_grads_f(
    model,
    weights: np.ndarray,
    gamma: float,
    directions: np.ndarray,
    labels: np.ndarray,
    clamp: bool = True
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-sample loss gradients with respect to the mixing weights.

    The model sees the (optionally clamped) generated batch; the gradient
    passes the clamp straight through, so component l equals
    ``gamma * <dloss/dx_hat, d_l>``.

    Args:
        model: Classifier exposing ``forward(Tensor) -> Tensor``
        weights: Simplex weights ``[n, M + 1]``
        gamma: Mixing strength in [0, 1]
        directions: Output of :func:`fourier_directions`
        labels: Class index per sample
        clamp: Clip generated images before the forward pass

    Returns:
        Tuple of (per-sample losses ``[n]``, gradients ``[n, M + 1]``,
        generated images ``[n, c, h, w]``)
    """
    x_hat = combine_directions(weights, gamma, directions, clamp=clamp)
    leaf = Tensor(x_hat, requires_grad=True)
    losses = softmax_cross_entropy(model.forward(leaf), labels, reduction="none")
    # No cross-sample coupling in the model, so the summed loss yields per-sample gradients
    image_grad = grad(losses.sum(), [leaf])[leaf]
    n, m = directions.shape[:2]
    alpha_grad = gamma * np.einsum("nk,nmk->nm", image_grad.reshape(n, -1), directions.reshape(n, m, -1))
    return losses.data.copy(), alpha_grad, x_hat


def alpha_grad_f(model, x, y: int, alpha, gamma: float, providers: Sequence, clamp: bool = True) -> np.ndarray:
    """
    Gradient of one sample's loss with respect to its mixing weights.

    Args:
        model: Classifier exposing ``forward(Tensor) -> Tensor``
        x: Image ``[c, h, w]``
        y: Class index of ``x``
        alpha: Weights over [self, provider_1, ..., provider_M]
        gamma: Mixing strength in [0, 1]
        providers: M images shaped like ``x``
        clamp: Clip the generated image before the forward pass

    Returns:
        Gradient vector of length M + 1
    """
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    weights = simplex_weights(alpha)
    directions = fourier_directions(x[None], np.stack([np.asarray(p, dtype=np.float64) for p in providers])[None])
    _, grads, _ = alpha_grads_f(model, weights[None], gamma, directions, np.array([y]), clamp=clamp)
    return grads[0]

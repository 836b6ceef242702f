"""Tests for the convolutional classifier and its checkpoints."""
from __future__ import annotations

import numpy as np
import pytest

from modedg.autodiff import Tensor, grad, softmax_cross_entropy
from modedg.featstyle import ChannelStats
from modedg.models import ConvNet, ModelConfig, build_model, load_checkpoint, save_checkpoint
from modedg.utils.errors import ConfigurationError, ShapeError


@pytest.fixture
def images():
    return np.random.default_rng(0).uniform(size=(5, 3, 16, 16))


def provider_stats_for(model: ConvNet, images: np.ndarray, M: int = 2) -> ChannelStats:
    rng = np.random.default_rng(1)
    picks = np.stack([rng.permutation(len(images))[:M] for _ in range(len(images))])
    flat = model.hook_stats(images[picks].reshape((-1,) + images.shape[1:]))
    c = flat.mu.shape[-1]
    return ChannelStats(flat.mu.data.reshape(len(images), M, c), flat.sigma.data.reshape(len(images), M, c))


def test_default_architecture() -> None:
    config = ModelConfig()
    model = build_model(config)
    assert config.channels == (32, 64, 128)
    assert model.num_parameters() == config.parameter_count() == 113738


def test_parameter_count_matches_closed_form(small_model_config) -> None:
    model = build_model(small_model_config)
    expected = (4 * 3 * 9 + 4) + (8 * 4 * 9 + 8) + (8 * 4 * 4 * 3 + 3)
    assert model.num_parameters() == small_model_config.parameter_count() == expected


def test_same_seed_same_checksum(small_model_config) -> None:
    assert build_model(small_model_config).checksum() == build_model(small_model_config).checksum()
    other = ModelConfig(**{**small_model_config.to_dict(), "init_seed": 4})
    assert build_model(other).checksum() != build_model(small_model_config).checksum()


def test_invalid_config_rejected() -> None:
    with pytest.raises(ConfigurationError):
        build_model(ModelConfig(image_size=12))
    with pytest.raises(ConfigurationError):
        build_model(ModelConfig(mix_block=3))


def test_zero_input_through_zero_head() -> None:
    model = build_model(ModelConfig(channels=(4,), classes=3, image_size=8, zero_head=True))
    assert np.array_equal(model.forward(np.zeros((2, 3, 8, 8))).data, np.zeros((2, 3)))


def test_forward_shape_and_input_check(small_model, images) -> None:
    assert small_model.forward(images).shape == (5, 3)
    with pytest.raises(ShapeError):
        small_model.forward(np.zeros((2, 3, 8, 8)))


def test_forward_is_permutation_equivariant_and_deterministic(small_model, images) -> None:
    order = np.array([3, 0, 4, 1, 2])
    logits = small_model.forward(images).data
    np.testing.assert_allclose(small_model.forward(images[order]).data, logits[order], atol=1e-12)
    assert np.array_equal(small_model.forward(images).data, logits)


def test_forward_with_mix_identities(small_model, images) -> None:
    stats = provider_stats_for(small_model, images)
    plain = small_model.forward(images).data
    own = np.tile([1.0, 0.0, 0.0], (5, 1))
    np.testing.assert_allclose(small_model.forward_with_mix(images, own, stats, 0.8).data, plain, atol=1e-5)
    mixed_weights = np.tile([0.2, 0.5, 0.3], (5, 1))
    assert np.array_equal(small_model.forward_with_mix(images, mixed_weights, stats, 0.0).data, plain)


def test_forward_with_mix_weight_gradient(small_model, images) -> None:
    stats = provider_stats_for(small_model, images)
    labels = np.array([0, 1, 2, 0, 1])
    weights = np.tile([0.5, 0.3, 0.2], (5, 1))

    def loss(w):
        return softmax_cross_entropy(small_model.forward_with_mix(images, w, stats, 1.0), labels, reduction="sum").item()

    leaf = Tensor(weights, requires_grad=True)
    total = softmax_cross_entropy(small_model.forward_with_mix(images, leaf, stats, 1.0), labels, reduction="sum")
    g = grad(total, [leaf])[leaf]

    h = 1e-6
    direction = np.zeros_like(weights)
    direction[2, 0], direction[2, 1] = 1.0, -1.0
    numeric = (loss(weights + h * direction) - loss(weights - h * direction)) / (2 * h)
    analytic = g[2, 0] - g[2, 1]
    assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric) + abs(analytic), 1e-8)


@pytest.mark.parametrize("trial", range(20))
def test_forward_with_mix_random_directions(small_model, images, trial) -> None:
    rng = np.random.default_rng(300 + trial)
    M = int(rng.integers(1, 4))
    stats = provider_stats_for(small_model, images, M=M)
    labels = rng.integers(3, size=5)
    gamma = float(rng.uniform(0.3, 1.0))
    weights = 0.1 / (M + 1) + 0.9 * rng.dirichlet(np.ones(M + 1), size=5)

    def loss(w):
        logits = small_model.forward_with_mix(images, w, stats, gamma)
        return softmax_cross_entropy(logits, labels, reduction="sum").item()

    leaf = Tensor(weights, requires_grad=True)
    total = softmax_cross_entropy(small_model.forward_with_mix(images, leaf, stats, gamma), labels, reduction="sum")
    g = grad(total, [leaf])[leaf]

    direction = rng.normal(size=weights.shape)
    direction -= direction.mean(axis=1, keepdims=True)
    h = 1e-6
    numeric = (loss(weights + h * direction) - loss(weights - h * direction)) / (2 * h)
    analytic = float(np.sum(g * direction))
    assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric) + abs(analytic), 1e-8)


def test_forward_with_mix_needs_hook(images) -> None:
    model = build_model(ModelConfig(channels=(4, 8), classes=3, image_size=16, mix_block=None))
    with pytest.raises(ConfigurationError):
        model.hook_stats(images)


def test_checkpoint_roundtrip_is_bit_exact(small_model, images, tmp_path) -> None:
    for param in small_model.parameters():
        param.data = param.data + 1e-3 * np.random.default_rng(2).normal(size=param.shape)
    root = save_checkpoint(small_model, tmp_path / "ckpt", epoch=3, extra={"note": "x"})
    model, index = load_checkpoint(root)
    assert index["epoch"] == 3 and index["note"] == "x"
    assert model.checksum() == small_model.checksum() == index["checksum"]
    assert np.array_equal(model.forward(images).data, small_model.forward(images).data)


def test_load_state_dict_rejects_wrong_shape(small_model) -> None:
    state = small_model.state_dict()
    state["head.bias"] = np.zeros(7)
    with pytest.raises(ShapeError):
        small_model.load_state_dict(state)

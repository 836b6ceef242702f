"""Tests for the training configuration, the step function and the trainer."""
from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from modedg.autodiff import SGD
from modedg.data import DatasetRequest, DomainDataset, SampleSet, generate_dataset, load_request
from modedg.models import ModelConfig, build_model, load_checkpoint
from modedg.training import (
    TrainConfig,
    Trainer,
    combined_loss,
    evaluate,
    evaluate_target,
    load_config,
    save_config,
    train,
    train_step,
)
from modedg.utils.errors import ConfigurationError, DivergenceError
from modedg.utils.types import Mechanism, Method, ProviderPolicy, Split

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TrackingDataset(DomainDataset):
    """Records every domain whose samples are requested."""

    def __init__(self, base: DomainDataset):
        super().__init__(base.name, base.classes, base.image_shape, base.seed, base.domains, base.parts)
        self.touched = set()

    def split(self, domain_id, split):
        self.touched.add(int(domain_id))
        return super().split(domain_id, split)


def test_combined_loss_weights() -> None:
    assert combined_loss(1.0, 2.0, 0.0) == 1.0
    assert combined_loss(1.0, 2.0, 1.0) == 2.0
    assert combined_loss(1.0, 2.0, 0.3) == pytest.approx(1.3)
    with pytest.raises(ConfigurationError):
        combined_loss(1.0, 2.0, 1.5)


def test_method_defaults() -> None:
    mode_f = TrainConfig.for_method("mode_f")
    assert (mode_f.explore.K, mode_f.explore.mu, mode_f.explore.M, mode_f.explore.gamma) == (10, 0.05, 3, 1.0)
    assert mode_f.beta == 0.3 and mode_f.explore.mechanism is Mechanism.FOURIER
    mode_a = TrainConfig.for_method(Method.MODE_A)
    assert mode_a.beta == 0.4 and mode_a.explore.provider_policy is ProviderPolicy.ONE_PER_DOMAIN
    assert TrainConfig.for_method("random_aug").explore_config.K == 0
    erm = TrainConfig.for_method("erm")
    assert (erm.lr, erm.momentum, erm.weight_decay, erm.batch_size) == (0.05, 0.9, 5e-4, 128)


def test_learning_rate_schedule() -> None:
    config = TrainConfig(lr=0.05, lr_decay=0.1, lr_decay_period=5)
    assert config.lr_at(0) == 0.05
    assert config.lr_at(4) == 0.05
    assert config.lr_at(5) == pytest.approx(0.005)


def test_config_validation_and_unknown_fields() -> None:
    with pytest.raises(ConfigurationError):
        TrainConfig(beta=1.2).validate()
    with pytest.raises(ConfigurationError):
        TrainConfig.for_method("mode_f", explore={"mechanism": "featstats"}).validate()
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"method": "erm", "learning_rate": 0.1})


def test_config_file_roundtrip(tmp_path) -> None:
    config = TrainConfig.for_method("mode_f", epochs=3, target_domain=2)
    for name in ("run.json", "run.yaml"):
        path = save_config(config, tmp_path / name)
        loaded = load_config(path)
        assert loaded.to_dict() == config.to_dict()
        assert loaded.config_hash() == config.config_hash()


def test_partial_config_uses_method_defaults(tmp_path) -> None:
    path = tmp_path / "partial.json"
    path.write_text('{"method": "mode_f", "explore": {"K": 4}}')
    config = load_config(path)
    assert config.explore.K == 4 and config.explore.mu == 0.05 and config.beta == 0.3
    assert load_config(path, method="random_aug").method is Method.RANDOM_AUG


def test_erm_step_does_not_explore(tiny_dataset, tiny_train_config, small_model) -> None:
    config = tiny_train_config("erm")
    images, labels, domains = tiny_dataset.select([0, 1, 2], Split.TRAIN).batch(np.arange(8))
    optimizer = SGD(small_model.params, lr=0.05)
    metrics, result = train_step(small_model, optimizer, images, labels, domains, config, np.random.default_rng(0))
    assert result is None
    assert metrics.forwards == 1 and metrics.aug_loss is None
    assert optimizer.state.steps == 1


def test_mode_f_step_accounts_forwards(tiny_dataset, tiny_train_config, small_model) -> None:
    config = tiny_train_config("mode_f")
    config = replace(config, explore=replace(config.explore, K=3))
    images, labels, domains = tiny_dataset.select([0, 1, 2], Split.TRAIN).batch(np.arange(0, 72, 9))
    optimizer = SGD(small_model.params, lr=0.05)
    metrics, result = train_step(small_model, optimizer, images, labels, domains, config, np.random.default_rng(0))
    assert result.losses.shape == (4, 8)
    # clean + (K + 1) exploration + augmented; K + 2 with the two training passes counted once
    assert metrics.forwards == 1 + (3 + 1) + 1 == 3 + 3
    assert metrics.loss == pytest.approx(0.7 * metrics.clean_loss + 0.3 * metrics.aug_loss)


def test_small_batch_takes_clean_step(tiny_dataset, tiny_train_config, small_model) -> None:
    config = tiny_train_config("mode_f")
    images, labels, domains = tiny_dataset.select([0, 1, 2], Split.TRAIN).batch(np.arange(3))
    metrics, result = train_step(
        small_model, SGD(small_model.params, lr=0.05), images, labels, domains, config, np.random.default_rng(0)
    )
    assert result is None and metrics.forwards == 1


def test_non_finite_loss_aborts(tiny_dataset, tiny_train_config, small_model) -> None:
    small_model.params["head.bias"].data = np.array([np.nan, 0.0, 0.0])
    images, labels, domains = tiny_dataset.select([0], Split.TRAIN).batch(np.arange(4))
    with pytest.raises(DivergenceError) as excinfo:
        train_step(
            small_model, SGD(small_model.params, lr=0.05), images, labels, domains,
            tiny_train_config("erm"), np.random.default_rng(0)
        )
    assert "lr" in excinfo.value.diagnostics


def test_zero_epochs_returns_initial_model(tiny_dataset, tiny_train_config, small_model_config) -> None:
    config = tiny_train_config("erm", epochs=0, target_domain=3)
    model, record = train(config, tiny_dataset)
    assert model.checksum() == build_model(replace(small_model_config, init_seed=config.init_seed)).checksum()
    assert record.epochs == [] and record.to_frame().empty


def test_identical_seeds_identical_runs(tiny_dataset, tiny_train_config) -> None:
    config = tiny_train_config("mode_f", epochs=1, target_domain=3)
    config = replace(config, explore=replace(config.explore, K=2))
    first, _ = train(config, tiny_dataset)
    second, _ = train(config, tiny_dataset)
    assert first.checksum() == second.checksum()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_beta_zero_and_gamma_zero_reduce_to_erm(tiny_dataset, tiny_train_config, seed) -> None:
    erm = tiny_train_config("erm", epochs=3, target_domain=0).with_seed(seed)
    mode_f = tiny_train_config("mode_f", epochs=3, target_domain=0).with_seed(seed)
    mode_f = replace(mode_f, explore=replace(mode_f.explore, K=2))
    reference, _ = train(erm, tiny_dataset)

    no_beta, _ = train(replace(mode_f, beta=0.0), tiny_dataset)
    no_gamma, _ = train(replace(mode_f, explore=replace(mode_f.explore, gamma=0.0)), tiny_dataset)
    assert no_beta.checksum() == reference.checksum()
    assert no_gamma.checksum() == reference.checksum()


def test_target_domain_is_never_read(tiny_dataset, tiny_train_config) -> None:
    tracked = TrackingDataset(tiny_dataset)
    config = tiny_train_config("mode_a", epochs=1, target_domain=2)
    config = replace(config, explore=replace(config.explore, K=1))
    model, _ = Trainer(config, tracked).train()
    assert 2 not in tracked.touched
    assert tracked.touched == {0, 1, 3}

    score = evaluate_target(model, tracked, 2)
    assert score.domain == "checker"
    assert 2 in tracked.touched


def test_evaluate_contracts(tiny_dataset, small_model) -> None:
    samples = tiny_dataset.split(1, Split.VAL)
    predictions = small_model.forward(samples.images.astype(np.float64)).data.argmax(axis=1)
    perfect = SampleSet(samples.images, predictions.astype(np.uint32), samples.domain_ids)
    assert evaluate(small_model, perfect)[0] == 1.0

    accuracy, loss = evaluate(small_model, samples, batch_size=4)
    order = np.random.default_rng(0).permutation(len(samples))
    shuffled = SampleSet(samples.images[order], samples.labels[order], samples.domain_ids[order])
    shuffled_accuracy, shuffled_loss = evaluate(small_model, shuffled, batch_size=4)
    assert shuffled_accuracy == accuracy
    assert shuffled_loss == pytest.approx(loss, abs=1e-12)

    empty = SampleSet(samples.images[:0], samples.labels[:0], samples.domain_ids[:0])
    with pytest.raises(ConfigurationError):
        evaluate(small_model, empty)


def test_trainer_save_writes_run_directory(tiny_dataset, tiny_train_config, tmp_path) -> None:
    config = tiny_train_config("mode_f", epochs=2, target_domain=3, trace_limit=5)
    config = replace(config, explore=replace(config.explore, K=2))
    trainer = Trainer(config, tiny_dataset)
    model, record = trainer.train()
    record.target = evaluate_target(model, tiny_dataset, 3)
    out = trainer.save(tmp_path / "run")

    metrics = pd.read_csv(out / "metrics.csv")
    assert list(metrics.columns) == ["epoch", "split", "domain", "loss", "accuracy", "seconds"]
    assert set(metrics["split"]) == {"train", "val", "target"}
    traces = pd.read_csv(out / "traces.csv")
    assert list(traces.columns) == ["epoch", "sample_id", "step_k", "loss"]
    assert len(traces) == 2 * 5 * 3
    assert record.epochs[0].forwards == 9 * (1 + 3 + 1)

    restored, index = load_checkpoint(out / "checkpoint")
    assert restored.checksum() == model.checksum()
    assert index["config_hash"] == config.config_hash()
    assert (out / "summary.json").is_file() and (out / "config.json").is_file()


def test_mode_a_requires_hook(tiny_train_config, small_model_config) -> None:
    config = tiny_train_config("mode_a", model=replace(small_model_config, mix_block=None))
    with pytest.raises(ConfigurationError):
        config.validate()


def test_untrained_model_scores_near_chance() -> None:
    request = DatasetRequest(name="chance", classes=10, images_per_class=20, image_size=16, seed=5)
    dataset = generate_dataset(request)
    samples = dataset.select(dataset.domain_ids, Split.TRAIN)
    accuracies = []
    for seed in range(5):
        model = build_model(ModelConfig(channels=(4, 8), classes=10, image_size=16, init_seed=seed))
        accuracies.append(evaluate(model, samples)[0])
    assert 0.05 <= np.mean(accuracies) <= 0.2


@pytest.fixture(scope="module")
def small_benchmark():
    """The shipped small benchmark at 16 pixels."""
    return generate_dataset(replace(load_request(CONFIGS / "dataset_small.json"), image_size=16))


def benchmark_config(method: str, **overrides) -> TrainConfig:
    model = ModelConfig(channels=(8, 16), classes=10, image_size=16)
    return TrainConfig.for_method(method, model=model, batch_size=128, target_domain=3, **overrides)


@pytest.mark.slow
def test_inner_steps_raise_the_loss(small_benchmark) -> None:
    final_steps = []
    for seed in range(3):
        config = benchmark_config("mode_f", epochs=5, trace_limit=256).with_seed(seed)
        _, record = Trainer(config, small_benchmark).train()
        traces = record.trace_frame()
        last = traces[traces["epoch"] == 4]
        assert last["sample_id"].nunique() >= 256
        final_steps.append(last.groupby("step_k")["loss"].mean())
    curve = pd.concat(final_steps, axis=1).mean(axis=1)
    assert curve[10] >= 1.05 * curve[0]


@pytest.mark.slow
def test_exploration_overhead_per_epoch(small_benchmark) -> None:
    train_set = small_benchmark.select([0, 1, 2], Split.TRAIN)
    seconds = {}
    for method in ("erm", "mode_f"):
        config = benchmark_config(method)
        trainer = Trainer(config, small_benchmark)
        rng = np.random.default_rng(0)
        start = time.perf_counter()
        for begin in range(0, len(train_set), config.batch_size):
            images, labels, domains = train_set.batch(np.arange(begin, min(begin + config.batch_size, len(train_set))))
            train_step(trainer.model, trainer.optimizer, images, labels, domains, config, rng, domains=[0, 1, 2])
        seconds[method] = time.perf_counter() - start
    assert 5.0 <= seconds["mode_f"] / seconds["erm"] <= 15.0

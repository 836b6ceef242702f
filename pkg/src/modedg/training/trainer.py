"""
Training loop: per-batch style exploration followed by one SGD step on the
beta-weighted clean and augmented risks.
"""
import json
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from tqdm import tqdm

from modedg.autodiff import SGD, Tensor, grad, softmax_cross_entropy
from modedg.data import DomainDataset, SampleSet
from modedg.explore import ExploreResult, draw_fixed_pool, explore_batch
from modedg.models import ConvNet, build_model, save_checkpoint
from modedg.utils.errors import ConfigurationError, DivergenceError
from modedg.utils.rng import DATA_ORDER_STREAM, EXPLORE_STREAM, derive_rng
from modedg.utils.types import Mechanism, ProviderPolicy, SampleID, Split

from .config import TrainConfig
from .metrics import DomainScore, EpochMetrics, MetricsRecord, StepMetrics

EVAL_BATCH_SIZE = 256


def combined_loss(clean_loss, aug_loss, beta: float):
    """
    ``(1 - beta) * clean + beta * aug``; the end points return one term unchanged.

    Works on tensors (for differentiation) and on plain floats.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"beta must be in [0, 1], got {beta}")
    if beta == 0.0:
        return clean_loss
    if beta == 1.0:
        return aug_loss
    return (1.0 - beta) * clean_loss + beta * aug_loss


def _can_explore(config: TrainConfig, domain_ids: np.ndarray, domains: Sequence[int]) -> bool:
    explore = config.explore_config
    if explore.provider_policy is ProviderPolicy.BATCH_UNIFORM:
        return len(domain_ids) > explore.M
    if explore.provider_policy is ProviderPolicy.ONE_PER_DOMAIN:
        return set(int(d) for d in domains) <= set(int(d) for d in domain_ids)
    return True


def train_step(
    model: ConvNet,
    optimizer: SGD,
    images: np.ndarray,
    labels: np.ndarray,
    domain_ids: np.ndarray,
    config: TrainConfig,
    explore_rng: np.random.Generator,
    domains: Optional[Sequence[int]] = None,
    pool: Optional[np.ndarray] = None
) -> Tuple[StepMetrics, Optional[ExploreResult]]:
    """
    One optimizer step.

    Exploring methods first search worst-case styles with the parameters held
    fixed, then minimize the combined risk. With ``gamma = 0`` the generator is
    the identity, so the step uses the clean risk alone.

    ``StepMetrics.forwards`` counts batch forward passes with the clean and
    augmented training passes as two: ERM spends 1, an exploring step spends
    1 clean + (K + 1) exploration + 1 augmented = K + 3. Counting the clean
    and augmented passes as one training pass gives the (K + 2) x ERM ratio.

    Args:
        model: Model to update in place
        optimizer: Optimizer over the model parameters
        images: Batch ``[n, c, h, w]``
        labels: Class per sample
        domain_ids: Domain per sample
        config: Run configuration
        explore_rng: Exploration stream (provider draws only)
        domains: Training domains
        pool: Fixed provider images

    Returns:
        Step metrics and the exploration result (None when nothing was explored)

    Raises:
        DivergenceError: If the loss is not finite
    """
    explore = config.explore_config
    result = None
    explore_seconds = 0.0
    if config.method.explores and _can_explore(config, domain_ids, domains or []):
        start = time.time()
        result = explore_batch(
            model, images, labels, explore, explore_rng,
            domain_ids=domain_ids, domains=domains, pool=pool
        )
        explore_seconds = time.time() - start
    elif config.method.explores:
        logger.debug(f"Batch of {len(labels)} cannot supply providers; taking a clean step")

    clean_logits = model.forward(Tensor(images))
    clean = softmax_cross_entropy(clean_logits, labels)
    forwards = 1 + (result.forwards if result else 0)

    aug = None
    loss = clean
    if result is not None and explore.gamma > 0:
        if explore.mechanism is Mechanism.FOURIER:
            aug_logits = model.forward(Tensor(result.augmented))
        else:
            aug_logits = model.forward_with_mix(Tensor(images), result.alphas, result.provider_stats, explore.gamma)
        aug = softmax_cross_entropy(aug_logits, labels)
        forwards += 1
        loss = combined_loss(clean, aug, config.beta)

    if not np.isfinite(loss.item()):
        raise DivergenceError("non-finite training loss", {
            'lr': optimizer.lr,
            'step': optimizer.state.steps,
            'clean_loss': clean.item(),
            'aug_loss': aug.item() if aug is not None else None,
        })

    optimizer.step(grad(loss, model.parameters()))
    correct = int((clean_logits.data.argmax(axis=1) == labels).sum())
    metrics = StepMetrics(
        loss=loss.item(),
        clean_loss=clean.item(),
        aug_loss=aug.item() if aug is not None else None,
        correct=correct,
        samples=len(labels),
        forwards=forwards,
        explore_seconds=explore_seconds,
    )
    return metrics, result


def evaluate(model: ConvNet, samples: SampleSet, batch_size: int = EVAL_BATCH_SIZE) -> Tuple[float, float]:
    """
    Accuracy and mean cross-entropy over a sample set.

    Raises:
        ConfigurationError: If the set is empty
    """
    if len(samples) == 0:
        raise ConfigurationError("cannot evaluate an empty split")
    correct = 0
    total_loss = 0.0
    for start in range(0, len(samples), batch_size):
        images, labels, _ = samples.batch(np.arange(start, min(start + batch_size, len(samples))))
        logits = model.forward(images)
        total_loss += softmax_cross_entropy(logits, labels, reduction="sum").item()
        correct += int((logits.data.argmax(axis=1) == labels).sum())
    return correct / len(samples), total_loss / len(samples)


class Trainer:
    """
    Runs one training configuration on the non-held-out domains of a dataset.

    The held-out domain (``config.target_domain``) is never read here; score
    it afterwards with :func:`evaluate_target`.
    """

    def __init__(self, config: TrainConfig, dataset: DomainDataset):
        config.validate()
        self.config = config
        self.dataset = dataset
        self.train_domains = [int(d) for d in dataset.domain_ids if int(d) != config.target_domain]
        if not self.train_domains:
            raise ConfigurationError("no training domains left after holding out the target")

        c, h, _ = dataset.image_shape
        model_config = replace(
            config.model, init_seed=config.init_seed, classes=dataset.classes, in_channels=c, image_size=h
        )
        self.model = build_model(model_config)
        self.optimizer = SGD(
            self.model.params, lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay
        )
        self.record = MetricsRecord()
        self.order_rng = derive_rng(config.data_seed, DATA_ORDER_STREAM)
        self.explore_rng = derive_rng(config.explore_seed, EXPLORE_STREAM)
        self.pool: Optional[np.ndarray] = None

    def train(self) -> Tuple[ConvNet, MetricsRecord]:
        """Run every epoch; returns the trained model and its metrics."""
        cfg = self.config
        train_set = self.dataset.select(self.train_domains, Split.TRAIN)
        val_sets = {d: self.dataset.split(d, Split.VAL) for d in self.train_domains}
        logger.info(
            f"Training {cfg.method.value} on domains {self.train_domains} "
            f"({len(train_set)} samples, {cfg.epochs} epochs)"
        )

        if cfg.method.explores and cfg.explore.provider_policy is ProviderPolicy.FIXED:
            positions = draw_fixed_pool(len(train_set), cfg.explore.M, self.explore_rng)
            self.pool = train_set.images[positions].astype(np.float64)

        for epoch in tqdm(range(cfg.epochs), desc=cfg.method.value, disable=not cfg.progress):
            metrics = self._run_epoch(epoch, train_set, val_sets)
            self.record.epochs.append(metrics)
            logger.info(
                f"Epoch {epoch + 1}/{cfg.epochs}: loss {metrics.train_loss:.4f}, "
                f"train acc {metrics.train_accuracy:.3f}, val acc {metrics.mean_val_accuracy:.3f}, "
                f"{metrics.seconds:.1f}s"
            )
        return self.model, self.record

    def _run_epoch(self, epoch: int, train_set: SampleSet, val_sets) -> EpochMetrics:
        cfg = self.config
        self.optimizer.set_lr(cfg.lr_at(epoch))
        start = time.time()
        order = self.order_rng.permutation(len(train_set))
        steps: List[StepMetrics] = []
        traced = 0

        for begin in range(0, len(order), cfg.batch_size):
            indices = order[begin:begin + cfg.batch_size]
            images, labels, domain_ids = train_set.batch(indices)
            step, result = train_step(
                self.model, self.optimizer, images, labels, domain_ids, cfg,
                self.explore_rng, domains=self.train_domains, pool=self.pool
            )
            steps.append(step)
            if result is not None and traced < cfg.trace_limit:
                for i in range(min(len(indices), cfg.trace_limit - traced)):
                    self.record.add_trace(epoch, SampleID(int(indices[i])), result.losses[:, i])
                    traced += 1

        samples = sum(s.samples for s in steps)
        aug_losses = [s.aug_loss for s in steps if s.aug_loss is not None]
        validation = []
        for domain_id, val_set in val_sets.items():
            accuracy, loss = evaluate(self.model, val_set)
            validation.append(DomainScore(self.dataset.domain(domain_id).name, loss, accuracy))

        return EpochMetrics(
            epoch=epoch + 1,
            lr=self.optimizer.lr,
            train_loss=float(np.mean([s.loss for s in steps])) if steps else float("nan"),
            train_clean_loss=float(np.mean([s.clean_loss for s in steps])) if steps else float("nan"),
            train_aug_loss=float(np.mean(aug_losses)) if aug_losses else None,
            train_accuracy=sum(s.correct for s in steps) / samples if samples else 0.0,
            forwards=sum(s.forwards for s in steps),
            seconds=time.time() - start,
            validation=validation,
        )

    def save(self, out_dir: Union[str, Path]) -> Path:
        """Write checkpoint, metrics, traces and a JSON summary into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.model, out / "checkpoint", epoch=len(self.record.epochs),
                        extra={'config_hash': self.config.config_hash()})
        self.record.write_csv(out / "metrics.csv")
        self.record.write_traces(out / "traces.csv")
        with open(out / "config.json", 'w', encoding='utf-8') as f:
            json.dump(self.config.to_dict(), f, indent=2)
        summary = {'config_hash': self.config.config_hash(), **self.record.summary()}
        with open(out / "summary.json", 'w', encoding='utf-8') as f:
            json.dump(summary, f, indent=2)
        return out


def train(config: TrainConfig, dataset: DomainDataset) -> Tuple[ConvNet, MetricsRecord]:
    """Train a fresh model; see :class:`Trainer`."""
    return Trainer(config, dataset).train()


def evaluate_target(model: ConvNet, dataset: DomainDataset, domain_id: int) -> DomainScore:
    """Score a held-out domain on all of its samples."""
    samples = SampleSet.concatenate(dataset.split(domain_id, split) for split in Split)
    accuracy, loss = evaluate(model, samples)
    return DomainScore(dataset.domain(domain_id).name, loss, accuracy)

"""
Leave-one-domain-out benchmarks, one- and two-axis sweeps and consolidation of
finished run directories into tables.
"""
import itertools
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from modedg.data import DomainDataset
from modedg.training import MetricsRecord, Trainer, TrainConfig, evaluate_target
from modedg.utils.errors import ConfigurationError
from modedg.utils.types import Method

from .exporters import CSVExporter, JSONExporter

LODO_COLUMNS = [
    "method", "domain", "domain_id", "seed", "accuracy", "loss",
    "mean_val_accuracy", "forwards_per_epoch", "seconds",
]
SWEEP_AXES = ("beta", "gamma", "K", "M", "mu")
_INTEGER_AXES = ("K", "M")


@dataclass
class RunResult:
    """Outcome of one training run scored on its held-out domain."""
    method: str
    domain: str
    domain_id: int
    seed: int
    accuracy: float
    loss: float
    mean_val_accuracy: float
    forwards_per_epoch: int
    seconds: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def run_once(
    config: TrainConfig,
    dataset: DomainDataset,
    out_dir: Optional[Union[str, Path]] = None
) -> Tuple[RunResult, MetricsRecord]:
    """
    Train one configuration and score its target domain.

    Args:
        config: Run configuration; ``target_domain`` must be set
        dataset: Dataset holding every domain
        out_dir: When given, the run artifacts are saved there

    Returns:
        The scored run and its full metrics record
    """
    if config.target_domain is None:
        raise ConfigurationError("a held-out run needs config.target_domain")

    start = time.time()
    trainer = Trainer(config, dataset)
    model, record = trainer.train()
    record.target = evaluate_target(model, dataset, config.target_domain)
    seconds = time.time() - start
    if out_dir is not None:
        trainer.save(out_dir)

    summary = record.summary()
    result = RunResult(
        method=config.method.value,
        domain=record.target.domain,
        domain_id=int(config.target_domain),
        seed=config.init_seed,
        accuracy=record.target.accuracy,
        loss=record.target.loss,
        mean_val_accuracy=summary['mean_val_accuracy'] if summary['mean_val_accuracy'] is not None else float("nan"),
        forwards_per_epoch=summary['forwards_per_epoch'] or 0,
        seconds=seconds,
    )
    logger.info(
        f"{result.method} held out {result.domain} (seed {result.seed}): "
        f"accuracy {result.accuracy:.4f} in {seconds:.1f}s"
    )
    return result, record


@dataclass
class LodoReport:
    """
    Held-out accuracy for every (method, domain, seed).

    ``summary_frame`` aggregates the rows per (method, domain) and over all
    domains (``domain == "average"``); the population standard deviation is
    used so a single seed gives 0 instead of NaN.
    """
    rows: List[RunResult] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=LODO_COLUMNS)

    def summary_frame(self) -> pd.DataFrame:
        frame = self.to_frame()
        records = []
        for method, by_method in frame.groupby("method", sort=False):
            for domain, group in by_method.groupby("domain", sort=False):
                records.append(self._aggregate(method, domain, group))
            # per-seed average over domains, then spread across seeds
            per_seed = by_method.groupby("seed")["accuracy"].mean()
            average = self._aggregate(method, "average", by_method)
            average['std'] = float(np.std(per_seed.to_numpy())) if len(per_seed) else float("nan")
            records.append(average)

        summary = pd.DataFrame(records, columns=["method", "domain", "runs", "mean", "std", "seconds"])
        erm = summary[summary["method"] == Method.ERM.value].set_index("domain")["mean"]
        summary["delta_vs_erm"] = [
            row["mean"] - erm[row["domain"]] if row["domain"] in erm.index else float("nan")
            for _, row in summary.iterrows()
        ]
        return summary

    @staticmethod
    def _aggregate(method: str, domain: str, group: pd.DataFrame) -> Dict[str, Any]:
        accuracy = group["accuracy"].to_numpy(dtype=np.float64)
        return {
            'method': method,
            'domain': domain,
            'runs': len(group),
            'mean': float(np.mean(accuracy)),
            'std': float(np.std(accuracy)),
            'seconds': float(group["seconds"].sum()),
        }

    def delta_frame(self) -> pd.DataFrame:
        """Per-domain MODE-F minus ERM mean accuracy (NaN when either is absent)."""
        erm, mode_f = Method.ERM.value, Method.MODE_F.value
        means = (
            self.summary_frame()
            .pivot(index="domain", columns="method", values="mean")
            .reindex(columns=[erm, mode_f])
        )
        delta = pd.DataFrame({
            'domain': list(means.index),
            'erm': means[erm].to_numpy(dtype=np.float64),
            'mode_f': means[mode_f].to_numpy(dtype=np.float64),
        })
        delta['delta'] = delta['mode_f'] - delta['erm']
        return delta

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rows': [r.to_dict() for r in self.rows],
            'summary': self.summary_frame().to_dict(orient='records'),
            'delta': self.delta_frame().to_dict(orient='records'),
            'total_seconds': float(sum(r.seconds for r in self.rows)),
        }

    def write(self, out_dir: Union[str, Path]) -> List[Path]:
        """Write ``lodo.csv``, ``lodo_summary.csv`` and ``lodo.json``."""
        csv = CSVExporter(out_dir)
        return [
            csv.export(self.to_frame(), "lodo"),
            csv.export(self.summary_frame(), "lodo_summary"),
            JSONExporter(out_dir).export(self, "lodo"),
        ]


def run_lodo(
    configs: Sequence[TrainConfig],
    dataset: DomainDataset,
    seeds: Sequence[int],
    out_dir: Optional[Union[str, Path]] = None
) -> LodoReport:
    """
    Leave-one-domain-out benchmark.

    Every configuration is trained once per (held-out domain, seed) on the
    remaining domains and scored on the held-out one. Runs sharing a seed see
    the same batch order.

    Raises:
        ConfigurationError: If the dataset has fewer than three domains
    """
    domains = dataset.domain_ids
    if len(domains) < 3:
        raise ConfigurationError(f"leave-one-domain-out needs at least 3 domains, got {len(domains)}")
    if not seeds:
        raise ConfigurationError("at least one seed is required")

    report = LodoReport()
    total = len(configs) * len(domains) * len(seeds)
    logger.info(f"LODO: {len(configs)} method(s) x {len(domains)} domains x {len(seeds)} seed(s) = {total} runs")
    for config in configs:
        for domain_id in domains:
            for seed in seeds:
                run_config = replace(config.with_seed(seed), target_domain=int(domain_id))
                run_dir = None
                if out_dir is not None:
                    name = dataset.domain(domain_id).name
                    run_dir = Path(out_dir) / "runs" / config.method.value / name / f"seed{seed}"
                result, _ = run_once(run_config, dataset, run_dir)
                report.rows.append(result)
                logger.info(f"LODO progress: {len(report.rows)}/{total}")

    if out_dir is not None:
        report.write(out_dir)
    return report


def apply_axis(config: TrainConfig, axis: str, value: float) -> TrainConfig:
    """Copy of ``config`` with one sweep axis set."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; expected one of {list(SWEEP_AXES)}")
    if axis in _INTEGER_AXES:
        if float(value) != int(value):
            raise ConfigurationError(f"{axis} takes integer values, got {value}")
        value = int(value)
    if axis == "beta":
        return replace(config, beta=float(value))
    return replace(config, explore=replace(config.explore, **{axis: value}))


def _sweep_target(config: TrainConfig, dataset: DomainDataset) -> TrainConfig:
    if config.target_domain is not None:
        return config
    target = int(dataset.domain_ids[0])
    logger.info(f"Sweep holds out domain {dataset.domain(target).name}")
    return replace(config, target_domain=target)


def _sweep_row(config: TrainConfig, dataset: DomainDataset, seed: int,
               run_dir: Optional[Path]) -> Dict[str, Any]:
    result, record = run_once(config.with_seed(seed), dataset, run_dir)
    return {
        'seed': seed,
        'method': result.method,
        'domain': result.domain,
        'target_accuracy': result.accuracy,
        'target_loss': result.loss,
        'mean_val_accuracy': result.mean_val_accuracy,
        'final_train_loss': record.summary()['final_train_loss'],
        'seconds': result.seconds,
    }


def run_sweep(
    config: TrainConfig,
    axis: str,
    values: Sequence[float],
    dataset: DomainDataset,
    seeds: Sequence[int],
    out_dir: Optional[Union[str, Path]] = None
) -> pd.DataFrame:
    """
    Train one run per (value, seed) along a single axis, others fixed.

    The held-out domain is ``config.target_domain``, or the first domain
    when the config leaves it unset.

    Returns:
        One row per (value, seed) with held-out and mean validation accuracy
    """
    if not values:
        raise ConfigurationError("a sweep needs at least one value")
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    config = _sweep_target(config, dataset)

    rows = []
    for value in values:
        swept = apply_axis(config, axis, value)
        swept.validate()
        for seed in seeds:
            run_dir = Path(out_dir) / "runs" / f"{axis}={value}" / f"seed{seed}" if out_dir is not None else None
            rows.append({'axis': axis, 'value': value, **_sweep_row(swept, dataset, seed, run_dir)})

    frame = pd.DataFrame(rows)
    if out_dir is not None:
        CSVExporter(out_dir).export(frame, f"sweep_{axis}")
    return frame


def run_grid(
    config: TrainConfig,
    grid: Mapping[str, Sequence[float]],
    dataset: DomainDataset,
    seeds: Sequence[int],
    out_dir: Optional[Union[str, Path]] = None
) -> pd.DataFrame:
    """
    Train one run per seed at every point of a two-axis grid.

    Args:
        config: Base configuration; the target follows :func:`run_sweep`
        grid: Exactly two sweep axes mapped to their values, e.g.
            ``{'beta': [0.1, 0.5], 'gamma': [0.5, 1.0]}``
        dataset: Dataset holding every domain
        seeds: Seeds per grid point
        out_dir: Writes ``grid_{a}_{b}.csv`` and the seed-mean pivot
            ``grid_{a}_{b}_mean.csv`` (rows ``a``, columns ``b``)

    Returns:
        One row per (a, b, seed), with a column per axis
    """
    if len(grid) != 2:
        raise ConfigurationError(f"a grid takes exactly two axes, got {list(grid)}")
    (first, first_values), (second, second_values) = grid.items()
    if not first_values or not second_values:
        raise ConfigurationError("every grid axis needs at least one value")
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    config = _sweep_target(config, dataset)

    rows = []
    for a, b in itertools.product(first_values, second_values):
        point = apply_axis(apply_axis(config, first, a), second, b)
        point.validate()
        for seed in seeds:
            run_dir = None
            if out_dir is not None:
                run_dir = Path(out_dir) / "runs" / f"{first}={a}_{second}={b}" / f"seed{seed}"
            rows.append({first: a, second: b, **_sweep_row(point, dataset, seed, run_dir)})

    frame = pd.DataFrame(rows)
    if out_dir is not None:
        exporter = CSVExporter(out_dir)
        exporter.export(frame, f"grid_{first}_{second}")
        means = frame.pivot_table(index=first, columns=second, values="target_accuracy", aggfunc="mean")
        exporter.export(means.reset_index(), f"grid_{first}_{second}_mean")
    logger.info(f"Grid over {first} x {second}: {len(rows)} runs")
    return frame


def _read_run(run_dir: Path) -> Tuple[pd.DataFrame, Optional[pd.DataFrame]]:
    metrics_path = run_dir / "metrics.csv"
    if not metrics_path.is_file():
        raise FileNotFoundError(f"missing metrics file: {metrics_path}")
    metrics = pd.read_csv(metrics_path)
    traces_path = run_dir / "traces.csv"
    traces = pd.read_csv(traces_path) if traces_path.is_file() else None
    return metrics, traces


def loss_curves(traces: pd.DataFrame) -> pd.DataFrame:
    """Epoch by inner-step matrix of mean exploration loss."""
    if traces.empty:
        return pd.DataFrame()
    curves = traces.pivot_table(index="epoch", columns="step_k", values="loss", aggfunc="mean")
    curves.columns = [f"step_{int(k)}" for k in curves.columns]
    return curves.reset_index()


def consolidate_runs(run_dirs: Sequence[Union[str, Path]]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Merge finished runs.

    Returns:
        The concatenated metrics tables with a ``run`` column, and the loss
        curve matrix computed over the raw trace rows of all runs

    Raises:
        FileNotFoundError: If a run directory has no ``metrics.csv``
    """
    if not run_dirs:
        raise ConfigurationError("no run directories given")
    metrics_parts = []
    trace_parts = []
    for run_dir in map(Path, run_dirs):
        metrics, traces = _read_run(run_dir)
        metrics.insert(0, "run", str(run_dir))
        metrics_parts.append(metrics)
        if traces is None:
            logger.warning(f"No traces.csv in {run_dir}; it contributes no loss curves")
        elif not traces.empty:
            traces.insert(0, "run", str(run_dir))
            trace_parts.append(traces)

    merged = pd.concat(metrics_parts, ignore_index=True)
    traces = pd.concat(trace_parts, ignore_index=True) if trace_parts else pd.DataFrame(
        columns=["run", "epoch", "sample_id", "step_k", "loss"]
    )
    return merged, loss_curves(traces)


def write_report(run_dirs: Sequence[Union[str, Path]], out_dir: Union[str, Path]) -> List[Path]:
    """Write ``runs.csv`` and ``loss_curves.csv`` for the given runs."""
    merged, curves = consolidate_runs(run_dirs)
    csv = CSVExporter(out_dir)
    paths = [csv.export(merged, "runs"), csv.export(curves, "loss_curves")]
    logger.info(f"Consolidated {len(run_dirs)} run(s) into {out_dir}")
    return paths

"""
Command-line interface: ``modedg <command> [options]``.

Commands:
    generate  render a synthetic multi-domain dataset
    train     train one configuration (one run per seed)
    eval      score a checkpoint on one domain
    lodo      leave-one-domain-out benchmark
    sweep     one- or two-axis hyperparameter sweep
    explore   render the generated image of every inner exploration step
    report    consolidate finished run directories
"""
import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from loguru import logger

from modedg.analytics import SWEEP_AXES, CSVExporter, run_grid, run_lodo, run_once, run_sweep, write_report
from modedg.data import (
    DatasetRequest,
    DomainDataset,
    SampleSet,
    export_samples,
    generate_dataset,
    load_dataset,
    load_request,
    save_dataset,
    write_ppm_grid,
)
from modedg.explore import ExploreConfig, explore_batch
from modedg.models import ModelConfig, build_model, load_checkpoint
from modedg.training import Trainer, TrainConfig, evaluate, load_config
from modedg.utils.errors import ConfigurationError, ModeError
from modedg.utils.logging import configure_logging
from modedg.utils.rng import DATA_ORDER_STREAM, EXPLORE_STREAM, derive_rng
from modedg.utils.types import Method, Split

LOG_LEVEL_ENV = "MODEDG_LOG_LEVEL"


def _parse_list(text: Optional[str], cast) -> List:
    if not text:
        return []
    try:
        return [cast(item.strip()) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse list {text!r}") from None


def _resolve_domain(dataset: DomainDataset, value: Optional[str]) -> Optional[int]:
    """Domain given by id or by name."""
    if value is None:
        return None
    for domain_id in dataset.domain_ids:
        if value == dataset.domain(domain_id).name or value == str(int(domain_id)):
            return int(domain_id)
    names = [dataset.domain(d).name for d in dataset.domain_ids]
    raise ConfigurationError(f"unknown domain {value!r}; dataset has {names}")


def _train_configs(args: argparse.Namespace) -> List[TrainConfig]:
    """One config per requested method; ``--config`` supplies the shared settings."""
    methods = _parse_list(args.method, Method)
    if args.config:
        if not methods:
            return [load_config(args.config)]
        return [load_config(args.config, method=m) for m in methods]
    return [TrainConfig.for_method(m) for m in (methods or [Method.ERM])]


def _apply_common(config: TrainConfig, args: argparse.Namespace) -> TrainConfig:
    if getattr(args, 'epochs', None) is not None:
        config = replace(config, epochs=args.epochs)
    if getattr(args, 'progress', False):
        config = replace(config, progress=True)
    return config


def cmd_generate(args: argparse.Namespace) -> int:
    request = load_request(args.config) if args.config else DatasetRequest.create_default()
    dataset = generate_dataset(request, num_workers=args.workers, progress=args.progress)
    out = save_dataset(dataset, args.out)
    if args.export_ppm:
        paths = export_samples(dataset, out / "ppm")
        logger.info(f"Exported {len(paths)} PPM images to {out / 'ppm'}")
    print(f"dataset written to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    configs = _train_configs(args)
    if len(configs) != 1:
        raise ConfigurationError("train takes a single method")
    config = _apply_common(configs[0], args)
    target = _resolve_domain(dataset, args.domain)
    if target is not None:
        config = replace(config, target_domain=target)
    seeds = _parse_list(args.seeds, int) or [config.init_seed]
    out = Path(args.out)

    for seed in seeds:
        run_config = config.with_seed(seed) if args.seeds else config
        run_dir = out / f"seed{seed}" if len(seeds) > 1 else out
        if run_config.target_domain is not None:
            result, _ = run_once(run_config, dataset, run_dir)
            print(f"seed {seed}: {result.domain} accuracy {result.accuracy:.4f}")
        else:
            trainer = Trainer(run_config, dataset)
            _, record = trainer.train()
            trainer.save(run_dir)
            print(f"seed {seed}: mean val accuracy {record.summary()['mean_val_accuracy']:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model, index = load_checkpoint(args.checkpoint)
    domain_ids = [_resolve_domain(dataset, args.domain)] if args.domain else dataset.domain_ids
    splits = list(Split) if args.split == "all" else [Split(args.split)]
    for domain_id in domain_ids:
        samples = SampleSet.concatenate(dataset.split(domain_id, s) for s in splits)
        accuracy, loss = evaluate(model, samples)
        print(f"{dataset.domain(domain_id).name} [{args.split}]: accuracy {accuracy:.4f}, loss {loss:.4f}")
    logger.debug(f"Checkpoint checksum {index.get('checksum')}")
    return 0


def cmd_lodo(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    configs = [_apply_common(c, args) for c in _train_configs(args)]
    seeds = _parse_list(args.seeds, int) or [0]
    report = run_lodo(configs, dataset, seeds, args.out)
    summary = report.summary_frame()
    for _, row in summary[summary["domain"] == "average"].iterrows():
        print(f"{row['method']}: mean held-out accuracy {row['mean']:.4f} (std {row['std']:.4f})")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    configs = _train_configs(args)
    if len(configs) != 1:
        raise ConfigurationError("sweep takes a single method")
    config = _apply_common(configs[0], args)
    target = _resolve_domain(dataset, args.domain)
    if target is not None:
        config = replace(config, target_domain=target)
    values = _parse_list(args.values, float)
    seeds = _parse_list(args.seeds, int) or [0]
    if args.axis2:
        if args.axis2 == args.axis:
            raise ConfigurationError("--axis2 must differ from --axis")
        grid = {args.axis: values, args.axis2: _parse_list(args.values2, float)}
        frame = run_grid(config, grid, dataset, seeds, args.out)
        means = frame.groupby([args.axis, args.axis2])["target_accuracy"].mean()
        for (a, b), accuracy in means.items():
            print(f"{args.axis}={a} {args.axis2}={b}: mean held-out accuracy {accuracy:.4f}")
        return 0
    frame = run_sweep(config, args.axis, values, dataset, seeds, args.out)
    means = frame.groupby("value")["target_accuracy"].mean()
    for value, accuracy in means.items():
        print(f"{args.axis}={value}: mean held-out accuracy {accuracy:.4f}")
    return 0


def cmd_explore(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
    else:
        c, h, _ = dataset.image_shape
        model_config = ModelConfig(classes=dataset.classes, in_channels=c, image_size=h, init_seed=args.seed)
        if args.channels:
            model_config = replace(model_config, channels=tuple(_parse_list(args.channels, int)))
        model_config.validate()
        model = build_model(model_config)

    domain = _resolve_domain(dataset, args.domain)
    pool = dataset.split(domain, Split.TRAIN) if domain is not None else dataset.select(dataset.domain_ids, Split.TRAIN)
    if args.samples > len(pool):
        raise ConfigurationError(f"asked for {args.samples} samples, the split has {len(pool)}")
    positions = derive_rng(args.seed, DATA_ORDER_STREAM).choice(len(pool), size=args.samples, replace=False)
    images, labels, _ = pool.batch(positions)
    config = ExploreConfig(K=args.K, mu=args.mu, M=args.M, gamma=args.gamma)
    result = explore_batch(
        model, images, labels, config, derive_rng(args.seed, EXPLORE_STREAM), record_frames=True
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # Rows are samples; columns the original then every inner step
    columns = np.concatenate([images[None], result.frames]).transpose(1, 0, 2, 3, 4)
    grid_path = write_ppm_grid(out / "exploration.ppm", columns)
    losses = pd.DataFrame([
        {'sample': int(positions[i]), 'step': k, 'loss': float(result.losses[k, i])}
        for i in range(len(positions)) for k in range(result.losses.shape[0])
    ])
    CSVExporter(out).export(losses, "exploration")
    logger.info(
        f"Mean loss over {len(positions)} samples: {result.losses[0].mean():.4f} -> {result.losses[-1].mean():.4f}"
    )
    print(f"exploration written to {grid_path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    paths = write_report(args.runs, args.out)
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modedg",
        description="Worst-case style exploration for domain generalization on synthetic digits."
    )
    parser.add_argument("--log-level", default=None, help=f"Log level (default: ${LOG_LEVEL_ENV} or INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Render a synthetic dataset")
    generate.add_argument("--config", help="Dataset request (JSON or YAML); default benchmark if omitted")
    generate.add_argument("--out", required=True, help="Dataset directory")
    generate.add_argument("--export-ppm", action="store_true", help="Also write one PPM per (domain, class)")
    generate.add_argument("--workers", type=int, default=1, help="Rendering threads")
    generate.add_argument("--progress", action="store_true", help="Show a progress bar")
    generate.set_defaults(handler=cmd_generate)

    def add_run_options(sub: argparse.ArgumentParser, methods: str) -> None:
        sub.add_argument("--config", help="Training config (JSON or YAML)")
        sub.add_argument("--method", help=methods)
        sub.add_argument("--data", required=True, help="Dataset directory")
        sub.add_argument("--out", required=True, help="Output directory")
        sub.add_argument("--seeds", help="Comma-separated seeds, e.g. 0,1,2")
        sub.add_argument("--epochs", type=int, help="Override the number of epochs")
        sub.add_argument("--progress", action="store_true", help="Show a progress bar")

    train = commands.add_parser("train", help="Train one configuration")
    add_run_options(train, "Method: erm, mode_f, mode_a or random_aug")
    train.add_argument("--domain", help="Held-out domain (name or id)")
    train.set_defaults(handler=cmd_train)

    evaluate_cmd = commands.add_parser("eval", help="Score a checkpoint")
    evaluate_cmd.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    evaluate_cmd.add_argument("--data", required=True, help="Dataset directory")
    evaluate_cmd.add_argument("--domain", help="Domain name or id (default: every domain)")
    evaluate_cmd.add_argument("--split", default="all", choices=["train", "val", "all"])
    evaluate_cmd.set_defaults(handler=cmd_eval)

    lodo = commands.add_parser("lodo", help="Leave-one-domain-out benchmark")
    add_run_options(lodo, "Comma-separated methods, e.g. erm,mode_f")
    lodo.set_defaults(handler=cmd_lodo)

    sweep = commands.add_parser("sweep", help="One- or two-axis hyperparameter sweep")
    add_run_options(sweep, "Method to sweep")
    sweep.add_argument("--axis", required=True, choices=list(SWEEP_AXES))
    sweep.add_argument("--values", required=True, help="Comma-separated axis values")
    sweep.add_argument("--axis2", choices=list(SWEEP_AXES), help="Second axis; sweeps the full grid")
    sweep.add_argument("--values2", help="Comma-separated values of the second axis")
    sweep.add_argument("--domain", help="Held-out domain (default: first domain)")
    sweep.set_defaults(handler=cmd_sweep)

    explore = commands.add_parser("explore", help="Render every inner exploration step as a PPM grid")
    explore.add_argument("--data", required=True, help="Dataset directory")
    explore.add_argument("--out", required=True, help="Output directory")
    explore.add_argument("--checkpoint", help="Checkpoint directory (default: a freshly initialized model)")
    explore.add_argument("--channels", help="Block widths of the fresh model, e.g. 32,64,128")
    explore.add_argument("--domain", help="Draw samples from this domain only (name or id)")
    explore.add_argument("--samples", type=int, default=8, help="Number of samples (grid rows)")
    explore.add_argument("--K", type=int, default=10, help="Inner steps")
    explore.add_argument("--mu", type=float, default=0.05, help="Inner step size")
    explore.add_argument("--M", type=int, default=3, help="Providers per sample")
    explore.add_argument("--gamma", type=float, default=1.0, help="Style strength")
    explore.add_argument("--seed", type=int, default=0, help="Seed for samples, providers and the fresh model")
    explore.set_defaults(handler=cmd_explore)

    report = commands.add_parser("report", help="Consolidate run directories")
    report.add_argument("runs", nargs="+", help="Run directories holding metrics.csv")
    report.add_argument("--out", required=True, help="Report directory")
    report.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    level = args.log_level or os.environ.get(LOG_LEVEL_ENV, "INFO")
    log_file = None
    if getattr(args, 'out', None) and args.command != "generate":
        Path(args.out).mkdir(parents=True, exist_ok=True)
        log_file = Path(args.out) / "run.log"
    configure_logging(level, log_file=log_file)

    try:
        return args.handler(args)
    except (ModeError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

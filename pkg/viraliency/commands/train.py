"""
`train`: fit a siamese model from a run config and write its artifacts.

Outputs in paths.output_dir:
    <paths.checkpoint>   LENACKPT checkpoint
    loss.csv             iteration,lr,loss
    eta.csv              iteration,eta_0,...,eta_{L-1}
    run_config.json      the fully resolved config
"""
import argparse
from pathlib import Path
from typing import Optional

from viraliency.commands.common import (
    add_run_config_flags,
    ensure_dir,
    resolve_run_config,
    resolve_threads,
    write_json,
)
from viraliency.core.logging import get_run_logger
from viraliency.schemas.model import ModelConfig
from viraliency.schemas.run import RunConfig
from viraliency.services.checkpoint import save_checkpoint
from viraliency.services.csv_io import write_eta_csv, write_loss_csv
from viraliency.services.dataset import PairDataset
from viraliency.services.siamese import ViralityNet
from viraliency.services.trainer import train

logger = get_run_logger(__name__)

LOSS_FILE = "loss.csv"
ETA_FILE = "eta.csv"
RESOLVED_CONFIG_FILE = "run_config.json"


def side_maps_dir(config: RunConfig) -> Optional[Path]:
    if config.paths.side_maps_dir is None:
        return None
    return config.paths.dataset_path(config.paths.side_maps_dir)


def image_shape(model: ModelConfig):
    return model.input_channels, model.input_height, model.input_width


def load_pairs(config: RunConfig, pairs_file: str) -> PairDataset:
    return PairDataset.from_csv(
        config.paths.dataset_path(pairs_file),
        config.paths.dataset_dir,
        side_maps_dir(config),
        expected_shape=image_shape(config.model),
    )


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Train a siamese virality model",
        description="Train on paths.train_pairs; write checkpoint, loss.csv and eta.csv.",
    )
    add_run_config_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_run_config(args)
    threads = resolve_threads(config.threads)
    dataset = load_pairs(config, config.paths.train_pairs)

    model = ViralityNet.initialize(config.model, seed=config.train.seed)
    result = train(dataset, model, config.train, threads=threads)

    out_dir = ensure_dir(Path(config.paths.output_dir))
    checkpoint_path = save_checkpoint(out_dir / config.paths.checkpoint, result.model)
    write_loss_csv(out_dir / LOSS_FILE, result.iterations, result.lrs, result.losses)
    write_eta_csv(out_dir / ETA_FILE, result.eta_trace.iterations, result.eta_trace.snapshots)
    write_json(out_dir / RESOLVED_CONFIG_FILE, config.model_dump(mode="json"))

    logger.info(
        "Training artifacts written",
        checkpoint=str(checkpoint_path),
        iterations=len(result.iterations),
        eta_moved_fraction=result.eta_trace.moved_fraction(),
    )
    return 0

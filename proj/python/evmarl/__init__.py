"""Python bindings for the evidential multi-agent moment localization library."""

import json
import sys

from ._evmarl import (
    acc_at,
    boundary_distance,
    calibrate_threshold,
    conflict,
    detect_oos,
    dirichlet_log_density,
    eta,
    evidential_loss,
    f_dis,
    make_evidence,
    oos_metrics,
    recall_at_k,
    rel_loc_class,
    render_2dstb,
    run_cli,
    scanner_window,
    tiou,
)
from . import _evmarl

__all__ = [
    "acc_at",
    "boundary_distance",
    "calibrate_threshold",
    "conflict",
    "default_config",
    "detect_oos",
    "dirichlet_log_density",
    "eta",
    "evidential_loss",
    "f_dis",
    "generate_dataset",
    "main",
    "make_evidence",
    "normalize_config",
    "oos_metrics",
    "recall_at_k",
    "rel_loc_class",
    "render_2dstb",
    "run_cli",
    "scanner_window",
    "tiou",
]


def default_config():
    """Default run configuration as a dict (honours EVMARL_SEED)."""
    return json.loads(_evmarl.default_config_json())


def normalize_config(config):
    """Validates a (partial) config dict and returns it with defaults filled in."""
    return json.loads(_evmarl.normalize_config_json(json.dumps(config)))


def generate_dataset(config=None):
    """Generates the synthetic splits; returns {split: [episode dict, ...]}."""
    text = _evmarl.generate_dataset_jsonl(json.dumps(config) if config is not None else "")
    return {split: [json.loads(line) for line in jsonl.splitlines()] for split, jsonl in text.items()}


def main():
    sys.exit(run_cli(sys.argv[1:]))

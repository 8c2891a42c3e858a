"""Hierarchical contrastive pretraining for skeleton sequences.

Configs are plain dicts with the same layout as the YAML files read by the
`hiclr` command-line tool. Missing keys take their defaults, unknown keys are
rejected.
"""

import json
import os

from . import _hiclr
from ._hiclr import HiclrError, conditional_distribution, hierarchical_loss, info_nce

__all__ = [
    "HiclrError",
    "benchmark_config",
    "conditional_distribution",
    "default_config",
    "evaluate",
    "hierarchical_loss",
    "info_nce",
    "load_data",
    "plot",
    "pretrain",
    "resolve_config",
    "synth",
]


def default_config():
    return json.loads(_hiclr.default_config())


def benchmark_config():
    """Settings of the small synthetic benchmark (8 classes, 800/200 split)."""
    return json.loads(_hiclr.benchmark_config())


def resolve_config(config):
    """Fill defaults and validate."""
    return json.loads(_hiclr.resolve_config(json.dumps(config)))


def load_data(config):
    """((train_x, train_y), (test_x, test_y)); x has shape (N, C, T, V, P)."""
    return _hiclr.load_data(json.dumps(config))


def synth(out, spec=None, seed=7, test_fraction=0.2, split_seed=1):
    paths = _hiclr.synth(json.dumps(spec or {}), seed, test_fraction, split_seed, os.fspath(out))
    return [str(p) for p in paths]


def pretrain(config, resume=False):
    return _hiclr.pretrain(json.dumps(config), resume)


def evaluate(config, run_dir=None, checkpoint=None):
    """Runs the configured protocols; returns one report dict per stream (plus fused)."""
    reports = _hiclr.evaluate(
        json.dumps(config),
        os.fspath(run_dir) if run_dir else "",
        os.fspath(checkpoint) if checkpoint else "",
    )
    return [json.loads(r) for r in reports]


def plot(run_dirs, out):
    return str(_hiclr.plot([os.fspath(d) for d in run_dirs], os.fspath(out)))

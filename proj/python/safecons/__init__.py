"""Python interface to the safecons consensus simulator."""

import json
import os

from . import _core
from ._core import (
    SafeconsError,
    adaptive_sample_count,
    attenuation_factor,
    certified_radius,
    clopper_pearson,
    consensus_error,
    estimate_variance,
    improvement_pct,
    network_call_count,
    normal_cdf,
    normal_quantile,
    path_attenuation,
    tolerance_index,
    trim_mean,
)

__all__ = [
    "SafeconsError",
    "adaptive_sample_count",
    "attenuation_factor",
    "certified_radius",
    "certify",
    "clopper_pearson",
    "consensus_error",
    "estimate_variance",
    "formation",
    "improvement_pct",
    "load_config",
    "network_call_count",
    "normal_cdf",
    "normal_quantile",
    "parse_config",
    "path_attenuation",
    "run",
    "simulate",
    "tolerance_index",
    "trim_mean",
]


def _text(config):
    """Accept a config dict, a JSON string, or a path to a JSON file."""
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, os.PathLike) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        with open(config, encoding="utf-8") as f:
            return f.read()
    return config


def parse_config(config):
    """Validate a config and return it with every default filled in."""
    return json.loads(_core.parse_config(_text(config)))


def load_config(path):
    return json.loads(_core.load_config(os.fspath(path)))


def simulate(config, scenario="baseline", seed=0, parallel=False, reverse_order=False):
    """Run one scenario and return its trajectory as plain lists."""
    return _core.simulate(_text(config), scenario, seed, parallel, reverse_order)


def _command(fn, config, out_dir, force, defense, seeds, parallel):
    code, summary = fn(_text(config), os.fspath(out_dir), force, defense, seeds, parallel)
    return code, json.loads(summary)


def run(config, out_dir, force=False, defense="both", seeds=None, parallel=False):
    """Write per-seed trajectories and summary.json; returns (exit_code, summary)."""
    return _command(_core.run, config, out_dir, force, defense, seeds, parallel)


def certify(config, out_dir, force=False, defense="both", seeds=None, parallel=False):
    return _command(_core.certify, config, out_dir, force, defense, seeds, parallel)


def formation(config, out_dir, force=False, defense="both", seeds=None, parallel=False):
    return _command(_core.formation, config, out_dir, force, defense, seeds, parallel)

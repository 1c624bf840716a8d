"""Python bindings for the eegtl EEG motor-imagery toolkit."""

import json
import os

from ._core import (
    EpochSet,
    Error,
    FormatError,
    ValidationError,
    __version__,
    accuracy,
    confusion_matrix,
    highpass_filter,
    kappa,
    load_checkpoint,
    load_datasets,
    load_epochset,
    save_epochset,
    select_channels,
    synth_generate,
)
from ._core import run as _run


def run(command, config, **overrides):
    """Run a CLI subcommand. `config` is a dict or a path to a JSON file."""
    if isinstance(config, (str, os.PathLike)):
        with open(config) as f:
            config = json.load(f)
    _run(command, json.dumps(config), **{k: str(v) if k == "out" else v for k, v in overrides.items()})


__all__ = [
    "EpochSet",
    "Error",
    "FormatError",
    "ValidationError",
    "__version__",
    "accuracy",
    "confusion_matrix",
    "highpass_filter",
    "kappa",
    "load_checkpoint",
    "load_datasets",
    "load_epochset",
    "run",
    "save_epochset",
    "select_channels",
    "synth_generate",
]

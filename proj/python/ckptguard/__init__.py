"""Python bindings for the ckptguard checkpoint integrity library."""

import json as _json

from . import _core
from ._core import (
    IoError,
    NoValidCheckpoint,
    binomial_ci,
    decode_container,
    encode_container,
    make_report,
    percentile,
    read_latest_ok,
    run_corruption_trials,
    run_crash_trials,
    tensor_digest,
    write_group,
)

__all__ = [
    "IoError",
    "NoValidCheckpoint",
    "binomial_ci",
    "decode_container",
    "encode_container",
    "inject_file",
    "make_report",
    "percentile",
    "read_latest_ok",
    "recover_latest",
    "run_corruption_trials",
    "run_crash_trials",
    "tensor_digest",
    "validate_group",
    "write_group",
]


def validate_group(path):
    """Validation report for one group directory, as a dict."""
    return _json.loads(_core.validate_group_json(str(path)))


def recover_latest(root):
    """Quarantine invalid groups newest-first and return the newest valid one."""
    return _json.loads(_core.recover_latest_json(str(root)))


def inject_file(path, kind, seed, verify_changed=False):
    """Apply one fault to a file in place and return the injection record."""
    return _json.loads(_core.inject_file_json(str(path), kind, seed, verify_changed))

"""Numerical tolerances shared by every module.

The defaults can be overridden process-wide through the ``ECHAIN_TOL``
environment variable, which must hold a JSON object mapping field names to
numbers, e.g. ``ECHAIN_TOL='{"bound_slack": 1e-8}'``.
"""
from __future__ import annotations

import dataclasses
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass


class DimensionError(ValueError):
    """Raised when matrix or subsystem dimensions are inconsistent."""


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not, beyond tolerance."""


class NotPositiveError(ValueError):
    """Raised when a matrix has an eigenvalue below the negativity threshold."""


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    clip: float = 1e-10
    negative: float = 1e-8
    trace: float = 1e-10
    norm: float = 1e-10
    kraus_drop: float = 1e-12
    schmidt_cutoff: float = 1e-12
    bound_slack: float = 1e-9
    kl_certify: float = 1e-8
    recovery_verify: float = 1e-7
    ensemble_match: float = 1e-8
    max_dim: int = 64
    parallel_kraus_limit: int = 100_000
    ensemble_limit: int = 1_000_000

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)


def check_overrides(data, source: str = "ECHAIN_TOL") -> dict:
    """Reject non-objects, unknown fields and non-positive values."""
    if not isinstance(data, dict):
        raise ValueError(f"{source} must be a JSON object")
    known = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown tolerance fields in {source}: {sorted(unknown)}")
    for key, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            raise ValueError(f"tolerance {key} must be a positive number, got {value!r}")
    return data


def _parse_overrides(text: str) -> dict:
    return check_overrides(json.loads(text))


def load_tolerances(env: dict | None = None) -> Tolerances:
    env = os.environ if env is None else env
    text = env.get("ECHAIN_TOL")
    if not text:
        return Tolerances()
    return Tolerances(**_parse_overrides(text))


TOL: Tolerances | None = None  # loaded from the environment on first use


def set_tolerances(tol: Tolerances) -> None:
    global TOL
    TOL = tol


@contextmanager
def override_tolerances(**changes):
    """Temporarily replace fields of the active tolerance record."""
    global TOL
    saved = TOL
    TOL = tol().replace(**changes)
    try:
        yield TOL
    finally:
        TOL = saved


def tol() -> Tolerances:
    global TOL
    if TOL is None:
        TOL = load_tolerances()
    return TOL

"""Numerical tolerances shared by all modules.

Defaults are module constants; ``use_tolerances`` overrides them for the
current context only (a ``contextvars`` slot), so concurrent callers never
see each other's settings.
"""
from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-12
    psd: float = 1e-10
    trace: float = 1e-10
    # relative-entropy support test
    support_tau: float = 1e-12
    support_sigma: float = 1e-10
    # smallest eigenvalue treated as strictly positive for thermal matching
    eigenvalue_floor: float = 1e-12
    # eigenvalue clamp used by the opt-in near-pure mode
    clamp_floor: float = 1e-6


DEFAULT_TOLERANCES = Tolerances()

_current: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "usitir_tolerances", default=DEFAULT_TOLERANCES
)


def get_tolerances() -> Tolerances:
    return _current.get()


@contextlib.contextmanager
def use_tolerances(**overrides: float):
    """Temporarily override tolerance fields, e.g. ``use_tolerances(psd=1e-8)``."""
    unknown = set(overrides) - {f.name for f in dataclasses.fields(Tolerances)}
    if unknown:
        raise KeyError(f"unknown tolerance fields: {sorted(unknown)}")
    token = _current.set(dataclasses.replace(_current.get(), **overrides))
    try:
        yield _current.get()
    finally:
        _current.reset(token)

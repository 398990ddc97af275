"""Reduced scalar models for the resolved coordinate.

Three closures of the same underlying dynamics are provided, named by how they
treat the history (memory) contribution:

* ``memory-corrected`` -- drift -mu h / (1 + tau^2 omega^2 cos^2(omega h)),
  obtained by collapsing the exponentially decaying memory kernel onto its
  instantaneous limit; the matching noise multiplier follows from the
  fluctuation-dissipation relation.
* ``memory-free``      -- drift -mu h, the bare free-energy descent with unit
  noise multiplier (memory and fluctuating force discarded).
* ``naive-memory``     -- drift (lam tau^2 omega^2 cos^2(omega h) - 1) mu h
  + (lam/beta) tau^2 omega^3 sin(2 omega h), from approximating the kernel by
  its lag-zero value times a delta.  Deliberately wrong at strong coupling and
  defined without a noise closure, so it can only be run unthermostatted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmark import BenchmarkParams

MEMORY_CORRECTED = "memory-corrected"
MEMORY_FREE = "memory-free"
NAIVE_MEMORY = "naive-memory"
MODEL_KINDS = (MEMORY_CORRECTED, MEMORY_FREE, NAIVE_MEMORY)


class UnsupportedModelError(ValueError):
    """The requested operation is undefined for this model kind."""


@dataclass(frozen=True)
class EffectiveModel:
    kind: str
    params: BenchmarkParams

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise UnsupportedModelError(
                f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}"
            )


def drift(model: EffectiveModel, h):
    """Deterministic drift b(h) of the reduced model; pure in ``h``."""
    p = model.params
    h = np.asarray(h, dtype=float)
    if model.kind == MEMORY_FREE:
        return -p.mu * h
    c2 = np.square(np.cos(p.omega * h))
    t2w2 = p.tau * p.tau * p.omega * p.omega
    if model.kind == MEMORY_CORRECTED:
        return -p.mu * h / (1.0 + t2w2 * c2)
    return (p.lam * t2w2 * c2 - 1.0) * (p.mu * h) + (
        p.lam / p.beta
    ) * t2w2 * p.omega * np.sin(2.0 * p.omega * h)


def diffusion(model: EffectiveModel, h):
    """Noise multiplier sigma(h): the SDE noise term is
    sigma(h) * sqrt(2 dt / beta) * xi."""
    p = model.params
    if model.kind == MEMORY_FREE:
        return np.ones_like(np.asarray(h, dtype=float))
    if model.kind == NAIVE_MEMORY:
        raise UnsupportedModelError(
            "naive-memory has no noise closure and cannot be thermostatted"
        )
    c2 = np.square(np.cos(p.omega * np.asarray(h, dtype=float)))
    return np.sqrt(1.0 / (1.0 + p.tau * p.tau * p.omega * p.omega * c2))

"""Atomless base distributions used as sampling models for P0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class UniformBase:
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise InputError("uniform base needs a < b")

    @property
    def text(self) -> str:
        return f"uniform:a={self.a:g},b={self.b:g}"

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=n)

    def sample_one(self, rng) -> float:
        return float(rng.uniform(self.a, self.b))


@dataclass(frozen=True)
class NormalBase:
    mu: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if self.var <= 0:
            raise InputError("normal base needs var > 0")

    @property
    def text(self) -> str:
        return f"normal:mu={self.mu:g},var={self.var:g}"

    def sample(self, rng, n: int) -> np.ndarray:
        return self.mu + np.sqrt(self.var) * rng.standard_normal(n)

    def sample_one(self, rng) -> float:
        return float(self.mu + np.sqrt(self.var) * rng.standard_normal())


def parse_base(text: str):
    """Parse ``uniform:a=0,b=1`` or ``normal:mu=0,var=2``."""
    name, _, body = text.strip().partition(":")
    kv = {}
    if body:
        for part in body.split(","):
            key, _, val = part.partition("=")
            if not val:
                raise InputError(f"malformed base-measure parameter {part!r}")
            kv[key.strip()] = float(val)
    if name == "uniform":
        return UniformBase(a=kv.get("a", 0.0), b=kv.get("b", 1.0))
    if name == "normal":
        return NormalBase(mu=kv.get("mu", 0.0), var=kv.get("var", 1.0))
    raise InputError(f"unknown base measure {name!r}")

"""Counter-based random number streams.

Every stochastic routine takes a SimulationConfig and derives its generator from
the Philox counter-based bit generator keyed by (seed, stream).  Parallel workers
get disjoint streams by construction, so results never depend on scheduling, and
identical (seed, stream) input reproduces identical output bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SimulationConfig:
    """Reproducibility contract for Monte-Carlo runs.

    seed / stream key the counter-based generator; n_samples is the default
    sample count for estimators; horizon, when set, caps trajectory length.
    """

    seed: int
    stream: int = 0
    n_samples: int = 100_000
    horizon: float | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive when given")

    def with_stream(self, stream: int) -> "SimulationConfig":
        return replace(self, stream=stream)

    def substream(self, offset: int) -> "SimulationConfig":
        """Disjoint child stream; use one per independent worker or cell."""
        return replace(self, stream=self.stream + offset)


def generator(cfg: SimulationConfig) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    key = (np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF),
           np.uint64(cfg.stream & 0xFFFFFFFFFFFFFFFF))
    return np.random.Generator(np.random.Philox(key=key))

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStreams:
    """independent PCG64 streams for initialization, data sampling, dropout and random summaries."""

    init: np.random.Generator
    data: np.random.Generator
    dropout: np.random.Generator
    summary: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        init, data, dropout, summary = np.random.SeedSequence(seed).spawn(4)
        return cls(
            init=np.random.Generator(np.random.PCG64(init)),
            data=np.random.Generator(np.random.PCG64(data)),
            dropout=np.random.Generator(np.random.PCG64(dropout)),
            summary=np.random.Generator(np.random.PCG64(summary)),
        )


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))

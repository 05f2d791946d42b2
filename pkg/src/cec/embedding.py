"""Observation embeddings: identity or a fixed Gaussian random projection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractViolation

IDENTITY = "identity"
RANDOM_PROJECTION = "random_projection"


@dataclass(frozen=True)
class EmbedderSpec:
    """Serializable description of an embedder; the matrix is rebuilt from the seed."""

    kind: str = IDENTITY
    input_dim: Optional[int] = None
    output_dim: Optional[int] = None
    rng_seed: int = 0
    unit_variance: bool = False

    def build(self, input_dim: int) -> "Embedder":
        if self.input_dim is not None and self.input_dim != input_dim:
            raise ConfigError(
                f"embedder input_dim={self.input_dim} does not match observation dim {input_dim}"
            )
        if self.kind == IDENTITY:
            return identity(input_dim)
        if self.kind == RANDOM_PROJECTION:
            if self.output_dim is None:
                raise ConfigError("random_projection needs output_dim")
            return new_random_projection(
                input_dim, self.output_dim, self.rng_seed, unit_variance=self.unit_variance
            )
        raise ConfigError(f"unknown embedder kind {self.kind!r}")


@dataclass(frozen=True)
class Embedder:
    kind: str
    input_dim: int
    output_dim: int
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == IDENTITY:
            if self.output_dim != self.input_dim:
                raise ConfigError("identity embedder must keep the dimension")
        elif self.kind == RANDOM_PROJECTION:
            if self.matrix is None or self.matrix.shape != (self.output_dim, self.input_dim):
                raise ConfigError("projection matrix must have shape (output_dim, input_dim)")
            self.matrix.flags.writeable = False
        else:
            raise ConfigError(f"unknown embedder kind {self.kind!r}")

    def __call__(self, s_ori) -> np.ndarray:
        return embed(self, s_ori)


def identity(dim: int) -> Embedder:
    return Embedder(IDENTITY, dim, dim)


def from_matrix(matrix) -> Embedder:
    m = np.array(matrix, dtype=np.float64, ndmin=2)
    return Embedder(RANDOM_PROJECTION, m.shape[1], m.shape[0], m)


def new_random_projection(
    input_dim: int, output_dim: int, rng_seed: int, unit_variance: bool = False
) -> Embedder:
    """Gaussian projection matrix of shape (output_dim, input_dim).

    Entries have variance ``1/output_dim`` so squared norms are preserved in
    expectation; ``unit_variance=True`` draws standard normal entries instead.
    """
    if output_dim < 1:
        raise ConfigError("output_dim must be >= 1")
    if output_dim > input_dim:
        raise ConfigError(
            f"projection must reduce dimension (output_dim={output_dim} > input_dim={input_dim})"
        )
    scale = 1.0 if unit_variance else 1.0 / np.sqrt(output_dim)
    rng = np.random.default_rng(rng_seed)
    matrix = rng.normal(0.0, scale, size=(output_dim, input_dim))
    return Embedder(RANDOM_PROJECTION, input_dim, output_dim, matrix)


def embed(e: Embedder, s_ori) -> np.ndarray:
    s = np.asarray(s_ori, dtype=np.float64)
    if s.ndim == 0:
        s = s.reshape(1)
    if s.shape != (e.input_dim,):
        raise ContractViolation(f"observation shape {s.shape}, embedder expects ({e.input_dim},)")
    if e.kind == IDENTITY:
        return s.copy()
    return e.matrix @ s

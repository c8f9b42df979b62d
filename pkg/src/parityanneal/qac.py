"""Replica-matrix encoding with penalty stabilizers.

A logical state Z of N spins is replicated across K columns of an N x K
bipolar matrix.  Row-wise ferromagnetic stabilizers penalize disagreement
between replicas; two equivalent stabilizer sets are supported:

- star:  S_ik = z_i1 * z_{i,k+1}   (every replica tied to the first)
- chain: S_ik = z_ik * z_{i,k+1}   (consecutive replicas tied)

Both vanish-penalty exactly on row-aligned matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from parityanneal.ising import ProblemInstance, as_spins, logical_energy

__all__ = [
    "ReplicaMatrix",
    "QacWeights",
    "encode_qac",
    "qac_penalty",
    "qac_energy",
    "strategy_energies",
]

STAR = "star"
CHAIN = "chain"


@dataclass(frozen=True)
class QacWeights:
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class ReplicaMatrix:
    """N x K bipolar matrix: N logical spins (rows) by K replicas (columns)."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=np.int8)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError("entries must be a nonempty 2-d matrix")
        if not np.all(np.abs(m) == 1):
            raise ValueError("entries must be +1 or -1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def num_logical(self) -> int:
        return self.entries.shape[0]

    @property
    def num_replicas(self) -> int:
        return self.entries.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.num_logical,
                "K": self.num_replicas,
                "rows": [[int(v) for v in row] for row in self.entries],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ReplicaMatrix":
        doc = json.loads(text)
        m = np.array(doc["rows"], dtype=np.int8)
        if m.shape != (int(doc["N"]), int(doc["K"])):
            raise ValueError("rows do not match declared shape")
        return cls(entries=m)


def encode_qac(Z, K: int) -> ReplicaMatrix:
    """Replicate a logical state across K columns."""
    z = as_spins(Z)
    if K < 1:
        raise ValueError("K must be positive")
    return ReplicaMatrix(entries=np.tile(z[:, None], (1, K)))


def qac_penalty(z: ReplicaMatrix, chain_style: str = STAR) -> int:
    """Number of violated row stabilizers under the chosen style."""
    m = z.entries
    if z.num_replicas < 2:
        raise ValueError("penalty requires at least 2 replicas")
    if chain_style == STAR:
        S = m[:, :1] * m[:, 1:]
    elif chain_style == CHAIN:
        S = m[:, :-1] * m[:, 1:]
    else:
        raise ValueError(f"unknown stabilizer style {chain_style!r}")
    return int(np.count_nonzero(S == -1))


def qac_energy(
    z: ReplicaMatrix, inst: ProblemInstance, w: QacWeights, chain_style: str = STAR
) -> float:
    """beta * (sum of per-column logical energies) + gamma * penalty."""
    if inst.size != z.num_logical:
        raise ValueError("instance size does not match replica matrix rows")
    enc = sum(logical_energy(z.entries[:, k], inst) for k in range(z.num_replicas))
    pen = qac_penalty(z, chain_style) if z.num_replicas >= 2 else 0
    return w.beta * enc + w.gamma * pen


def strategy_energies(r: ReplicaMatrix, inst: ProblemInstance):
    """Per-column logical energies and the best (lowest-energy) column index.

    Ties resolve to the lowest index.
    """
    if inst.size != r.num_logical:
        raise ValueError("instance size does not match replica matrix rows")
    energies = np.array(
        [logical_energy(r.entries[:, k], inst) for k in range(r.num_replicas)]
    )
    return energies, int(np.argmin(energies))

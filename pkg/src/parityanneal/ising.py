"""Logical Ising model: energies, instance generation, gauge transforms,
and a brute-force ground-state oracle.

The energy of a logical state Z in {+1,-1}^K is

    H(Z) = sum_{i<j} J_ij Z_i Z_j + sum_i h_i Z_i

with each unordered pair counted once (J symmetric, zero diagonal).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProblemInstance",
    "GroundStateCertificate",
    "as_spins",
    "logical_energy",
    "generate_instance",
    "gauge_transform",
    "brute_force_ground_state",
]

#: Largest system size accepted by the exhaustive oracle (2^K states).
ORACLE_SIZE_CAP = 24


def as_spins(values) -> np.ndarray:
    """Validate and return a bipolar (+1/-1) integer vector."""
    z = np.asarray(values, dtype=np.int64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("spin vector must be one-dimensional and nonempty")
    if not np.all(np.abs(z) == 1):
        raise ValueError("spin entries must be exactly +1 or -1")
    return z


@dataclass(frozen=True)
class ProblemInstance:
    """Couplings J (symmetric, zero diagonal) and local fields h.

    Immutable after construction; arrays are defensive copies with the
    writeable flag cleared.
    """

    size: int
    couplings: np.ndarray
    fields: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        J = np.array(self.couplings, dtype=float)
        h = np.array(self.fields, dtype=float)
        K = int(self.size)
        if K < 1:
            raise ValueError("size must be positive")
        if J.shape != (K, K):
            raise ValueError(f"couplings must be {K}x{K}, got {J.shape}")
        if h.shape != (K,):
            raise ValueError(f"fields must have length {K}, got {h.shape}")
        if not (np.isfinite(J).all() and np.isfinite(h).all()):
            raise ValueError("couplings and fields must be finite")
        if not np.array_equal(J, J.T):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diagonal(J) != 0.0):
            raise ValueError("coupling diagonal must be zero")
        J.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "size", K)
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", h)

    def to_json(self) -> str:
        """Serialize to JSON with round-trip-exact floats."""
        doc = {
            "K": self.size,
            "J": [list(row) for row in self.couplings],
            "h": list(self.fields),
            "seed": self.seed,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        return cls(
            size=int(doc["K"]),
            couplings=np.array(doc["J"], dtype=float),
            fields=np.array(doc["h"], dtype=float),
            seed=doc.get("seed"),
        )


@dataclass(frozen=True)
class GroundStateCertificate:
    """Exhaustively verified minimum-energy state with its degeneracy."""

    state: np.ndarray
    energy: float
    degeneracy: int


def logical_energy(Z, inst: ProblemInstance) -> float:
    """Energy of a logical state: sum_{i<j} J_ij Z_i Z_j + sum_i h_i Z_i."""
    z = as_spins(Z)
    if z.size != inst.size:
        raise ValueError("state length does not match instance size")
    # J symmetric with zero diagonal, so the pair sum is half the quadratic form
    return float(0.5 * z @ inst.couplings @ z + inst.fields @ z)


def generate_instance(K: int, seed: int, half_width: float) -> ProblemInstance:
    """Random instance with J_ij ~ Uniform[-half_width, half_width] (i<j), h = 0."""
    if K < 2:
        raise ValueError("K must be at least 2")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    rng = np.random.default_rng(seed)
    J = np.zeros((K, K))
    iu = np.triu_indices(K, k=1)
    J[iu] = rng.uniform(-half_width, half_width, size=len(iu[0]))
    J = J + J.T
    return ProblemInstance(size=K, couplings=J, fields=np.zeros(K), seed=seed)


def gauge_transform(inst: ProblemInstance, reference) -> ProblemInstance:
    """Sign relabeling J'_ij = J_ij ref_i ref_j, h'_i = h_i ref_i.

    Preserves the energy spectrum and maps the reference state to all +1.
    """
    ref = as_spins(reference)
    if ref.size != inst.size:
        raise ValueError("reference length does not match instance size")
    J = inst.couplings * np.outer(ref, ref)
    h = inst.fields * ref
    return ProblemInstance(size=inst.size, couplings=J, fields=h, seed=None)


def all_states(K: int) -> np.ndarray:
    """All 2^K bipolar states as a (2^K, K) array, lexicographically ordered
    with -1 sorting before +1."""
    bits = (np.arange(2**K)[:, None] >> np.arange(K - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(np.int8)


def brute_force_ground_state(inst: ProblemInstance) -> GroundStateCertificate:
    """Exhaustive 2^K scan; returns the lexicographically smallest minimizer."""
    K = inst.size
    if K > ORACLE_SIZE_CAP:
        raise ValueError(f"exhaustive oracle capped at K <= {ORACLE_SIZE_CAP}")
    best_energy = np.inf
    best_state = None
    degeneracy = 0
    chunk = 1 << min(K, 16)
    total = 1 << K
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        bits = (idx[:, None] >> np.arange(K - 1, -1, -1)) & 1
        S = (2 * bits - 1).astype(float)
        E = 0.5 * np.einsum("si,ij,sj->s", S, inst.couplings, S) + S @ inst.fields
        lo = E.min()
        if lo < best_energy:
            best_energy = lo
            degeneracy = int(np.count_nonzero(E == lo))
            best_state = S[int(np.argmax(E == lo))].astype(np.int64)
        elif lo == best_energy:
            degeneracy += int(np.count_nonzero(E == lo))
    return GroundStateCertificate(
        state=best_state, energy=float(best_energy), degeneracy=degeneracy
    )

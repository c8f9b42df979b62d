"""Parity-encoded physical spin systems.

A logical state Z of K spins is encoded into the symmetric bipolar matrix
z = Z (x) Z with z_ij = Z_i Z_j and unit diagonal.  Constraints come in two
flavors:

- weight-four plaquettes S4_ij = z_ij z_{i,j+1} z_{i+1,j} z_{i+1,j+1} for
  1 <= i < j <= K-1 (original layout);
- weight-three checks S3_ij = z_0i z_0j z_ij for 1 <= i < j <= K on the
  extended layout, whose extra row 0 carries the logical spins (z_0i = Z_i).

Indices in this module are 1-based labels matching the matrix rows/columns
of the encoding; the extended layout adds label 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from parityanneal.ising import ProblemInstance, as_spins

__all__ = [
    "PhysicalSpinMatrix",
    "SyndromePattern",
    "WeightParameters",
    "encode_pe",
    "plaquette_syndromes",
    "weight3_syndromes",
    "is_code_state",
    "penalty_energy",
    "physical_energy",
    "error_pattern",
    "triangle_syndrome_product",
    "entries_penalty",
    "entries_is_code",
]

ORIGINAL = "original"
EXTENDED = "extended"


@dataclass(frozen=True)
class WeightParameters:
    """Weights of the physical Hamiltonian: beta scales the embedded problem,
    gamma scales the constraint penalty."""

    beta: float
    gamma: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class PhysicalSpinMatrix:
    """Symmetric bipolar matrix with unit diagonal.

    For the original layout the stored matrix is K x K and row/column labels
    are 1..K (label m maps to index m-1).  For the extended layout it is
    (K+1) x (K+1) with labels 0..K equal to indices; row 0 holds the logical
    spins directly.
    """

    entries: np.ndarray
    layout_kind: str = ORIGINAL

    def __post_init__(self):
        m = np.array(self.entries, dtype=np.int8)
        if self.layout_kind not in (ORIGINAL, EXTENDED):
            raise ValueError(f"unknown layout {self.layout_kind!r}")
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError("entries must be a square matrix of size >= 2")
        if not np.all(np.abs(m) == 1):
            raise ValueError("entries must be +1 or -1")
        if not np.array_equal(m, m.T):
            raise ValueError("entries must be symmetric")
        if not np.all(np.diagonal(m) == 1):
            raise ValueError("diagonal must be all +1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def logical_size(self) -> int:
        """Number of logical spins K."""
        n = self.entries.shape[0]
        return n if self.layout_kind == ORIGINAL else n - 1

    def label(self, i: int, j: int) -> int:
        """Entry by layout label (1-based for original, 0-based for extended)."""
        if self.layout_kind == ORIGINAL:
            return int(self.entries[i - 1, j - 1])
        return int(self.entries[i, j])

    def labelled(self) -> np.ndarray:
        """(K+1)x(K+1) view indexed directly by labels 0..K.

        For the original layout, row/column 0 is padded with +1 and unused.
        """
        K = self.logical_size
        if self.layout_kind == EXTENDED:
            return self.entries
        L = np.ones((K + 1, K + 1), dtype=np.int8)
        L[1:, 1:] = self.entries
        return L

    def to_json(self) -> str:
        n = self.entries.shape[0]
        iu = np.triu_indices(n, k=1)
        return json.dumps(
            {
                "K": self.logical_size,
                "layout": self.layout_kind,
                "upper": [int(v) for v in self.entries[iu]],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PhysicalSpinMatrix":
        doc = json.loads(text)
        K = int(doc["K"])
        layout = doc["layout"]
        n = K if layout == ORIGINAL else K + 1
        m = np.ones((n, n), dtype=np.int8)
        iu = np.triu_indices(n, k=1)
        upper = np.array(doc["upper"], dtype=np.int8)
        if upper.size != len(iu[0]):
            raise ValueError("upper-triangle entry count does not match K")
        m[iu] = upper
        m[(iu[1], iu[0])] = upper
        return cls(entries=m, layout_kind=layout)


@dataclass(frozen=True)
class SyndromePattern:
    """Map from check label pair (i, j) to the syndrome value +1/-1."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for (i, j), s in self.values.items():
            if not i < j:
                raise ValueError("check labels must satisfy i < j")
            if s not in (1, -1):
                raise ValueError("syndrome values must be +1 or -1")

    def all_satisfied(self) -> bool:
        return all(s == 1 for s in self.values.values())

    def violation_count(self) -> int:
        return sum(1 for s in self.values.values() if s == -1)

    def to_json(self) -> str:
        items = [
            {"i": i, "j": j, "s": int(s)} for (i, j), s in sorted(self.values.items())
        ]
        return json.dumps({"plaquettes": items})


def encode_pe(Z, layout: str = ORIGINAL) -> PhysicalSpinMatrix:
    """Encode a logical state as the rank-one product matrix z_ij = Z_i Z_j."""
    z = as_spins(Z)
    if z.size < 3:
        raise ValueError("encoding requires K >= 3")
    if layout == EXTENDED:
        z = np.concatenate(([1], z))
    return PhysicalSpinMatrix(entries=np.outer(z, z), layout_kind=layout)


def _plaquette_matrix(z: PhysicalSpinMatrix) -> np.ndarray:
    """Weight-four syndromes as an array P with P[i-1, j-1] = S4_ij."""
    L = z.labelled()
    K = z.logical_size
    A = L[1:K, 1:K] * L[1:K, 2 : K + 1] * L[2 : K + 1, 1:K] * L[2 : K + 1, 2 : K + 1]
    return A  # entry [i-1, j-1] for labels 1 <= i, j <= K-1


def entries_penalty(entries: np.ndarray) -> int:
    """Violated-plaquette count of a raw original-layout matrix.

    Fast path without object validation, for hot loops; semantics match
    penalty_energy on the original layout.
    """
    K = entries.shape[0]
    P = (
        entries[0 : K - 1, 0 : K - 1]
        * entries[0 : K - 1, 1:K]
        * entries[1:K, 0 : K - 1]
        * entries[1:K, 1:K]
    )
    # P is symmetric with +1 diagonal, so violations appear mirrored
    return int(np.count_nonzero(P == -1)) // 2


def entries_is_code(entries: np.ndarray) -> bool:
    """Raw-matrix counterpart of is_code_state for the original layout."""
    return entries_penalty(entries) == 0


def plaquette_syndromes(z: PhysicalSpinMatrix) -> SyndromePattern:
    """All weight-four plaquette syndromes, labels 1 <= i < j <= K-1."""
    P = _plaquette_matrix(z)
    K = z.logical_size
    vals = {
        (i, j): int(P[i - 1, j - 1]) for i in range(1, K - 1) for j in range(i + 1, K)
    }
    return SyndromePattern(values=vals)


def weight3_syndromes(z: PhysicalSpinMatrix) -> SyndromePattern:
    """All weight-three checks S3_ij = z_0i z_0j z_ij (extended layout only)."""
    if z.layout_kind != EXTENDED:
        raise ValueError("weight-three checks require the extended layout")
    L = z.entries
    K = z.logical_size
    vals = {}
    for i in range(1, K + 1):
        for j in range(i + 1, K + 1):
            vals[(i, j)] = int(L[0, i] * L[0, j] * L[i, j])
    return SyndromePattern(values=vals)


def penalty_energy(z: PhysicalSpinMatrix) -> int:
    """Number of violated plaquettes."""
    P = _plaquette_matrix(z)
    K = z.logical_size
    iu = np.triu_indices(K - 1, k=1)
    return int(np.count_nonzero(P[iu] == -1))


def is_code_state(z: PhysicalSpinMatrix) -> bool:
    """True iff every plaquette is satisfied, i.e. z factors as Z (x) Z."""
    return penalty_energy(z) == 0


def physical_energy(
    z: PhysicalSpinMatrix, inst: ProblemInstance, w: WeightParameters
) -> float:
    """beta * sum_{i<j} J_ij z_ij (+ field term on the extended layout)
    + gamma * penalty."""
    K = z.logical_size
    if inst.size != K:
        raise ValueError("instance size does not match matrix size")
    if z.layout_kind == ORIGINAL and np.any(inst.fields != 0):
        raise ValueError("original layout carries no local-field spins; h must be 0")
    iu = np.triu_indices(K, k=1)
    L = z.labelled()
    local = float((inst.couplings[iu] * L[1:, 1:][iu]).sum())
    if z.layout_kind == EXTENDED:
        local += float(inst.fields @ L[0, 1:])
    return w.beta * local + w.gamma * penalty_energy(z)


def error_pattern(
    z: PhysicalSpinMatrix, z_ref: PhysicalSpinMatrix
) -> PhysicalSpinMatrix:
    """Elementwise product; -1 entries mark disagreements with the reference."""
    if z.entries.shape != z_ref.entries.shape or z.layout_kind != z_ref.layout_kind:
        raise ValueError("matrices must share size and layout")
    return PhysicalSpinMatrix(
        entries=z.entries * z_ref.entries, layout_kind=z.layout_kind
    )


def triangle_syndrome_product(z: PhysicalSpinMatrix, i: int, j: int, k: int) -> int:
    """Product of the plaquettes in rows i..j-1 and columns j..k-1.

    For labels i < j < k the interior factors telescope away and the product
    equals the triangle z_ij z_jk z_ik, which is how weight-three estimators
    are assembled from weight-four checks on the original layout.
    """
    if not (1 <= i < j < k <= z.logical_size):
        raise ValueError("labels must satisfy 1 <= i < j < k <= K")
    P = _plaquette_matrix(z)
    block = P[i - 1 : j - 1, j - 1 : k - 1]
    return int(np.prod(block))

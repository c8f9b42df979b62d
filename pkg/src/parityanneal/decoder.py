"""Majority-vote decoding of noisy spin readouts.

Covers the plain majority function, orthogonal-estimator sets with
log-likelihood weights, repetition and replica decoders, the one-step
parity decoder z* = sgn[r(r - I)], and its iterated form which applies
F(X) = X(X - I) followed by an elementwise sign and unit-diagonal
restoration until a fixed point or a code state is reached.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from parityanneal.ising import ProblemInstance, as_spins
from parityanneal.parity import ORIGINAL, PhysicalSpinMatrix, entries_is_code
from parityanneal.qac import ReplicaMatrix

__all__ = [
    "MajorityVerdict",
    "OrthogonalEstimatorSet",
    "ChannelSpec",
    "DecodeResult",
    "majority",
    "mvd_weights",
    "channel_llr",
    "repetition_mvd",
    "qac_mvd",
    "pe_orthogonal_sets",
    "pe_mvd_weight2",
    "pe_mvd_iterated",
    "extract_logical",
    "canonical_logical",
]

TIE = 0
XI_CLAMP = 1e-12


@dataclass(frozen=True)
class MajorityVerdict:
    """Outcome of a (weighted) vote: +1, -1, or 0 for an exact tie."""

    value: int
    margin: float

    def __post_init__(self):
        if self.value not in (1, -1, TIE):
            raise ValueError("verdict value must be +1, -1, or 0 (tie)")
        consistent = (
            (self.value == 1 and self.margin > 0)
            or (self.value == -1 and self.margin < 0)
            or (self.value == TIE and self.margin == 0)
        )
        if not consistent:
            raise ValueError("verdict value inconsistent with margin sign")

    @property
    def is_tie(self) -> bool:
        return self.value == TIE

    def resolve(self, tie_value: int = 1) -> int:
        return tie_value if self.is_tie else self.value


def majority(values, weights=None) -> MajorityVerdict:
    """Sign of the (weighted) sum of bipolar votes; exact ties reported."""
    v = as_spins(values)
    if weights is None:
        margin = float(v.sum())
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise ValueError("weights must match values in length")
        margin = float(w @ v)
    return MajorityVerdict(value=int(np.sign(margin)), margin=margin)


@dataclass(frozen=True)
class OrthogonalEstimatorSet:
    """Estimators of one target spin built from disjoint helper sets.

    ``member_index_sets`` lists, for each estimator, the indices whose
    readout product estimates the target.  The target itself appears as the
    singleton member; every non-target index appears in at most one member,
    which is what makes one-step majority voting sound.
    """

    target: tuple
    member_index_sets: tuple
    weights: tuple | None = None

    def __post_init__(self):
        seen = set()
        for member in self.member_index_sets:
            for idx in member:
                if idx == self.target:
                    continue
                if idx in seen:
                    raise ValueError(f"index {idx} appears in two member sets")
                seen.add(idx)
        if self.weights is not None and len(self.weights) != len(
            self.member_index_sets
        ):
            raise ValueError("one weight per member set required")


def mvd_weights(xi, sets: OrthogonalEstimatorSet) -> np.ndarray:
    """Log-likelihood weights for each member estimator.

    ``xi`` maps an index to its flip probability.  A member's effective
    error rate is p = (1 - prod(1 - 2 xi_j)) / 2, the probability of an odd
    number of flips among its indices; its weight is log((1 - p) / p).
    Zero rates are clamped to keep weights finite.
    """

    def rate(idx):
        x = float(xi[idx])
        if not 0 <= x <= 0.5:
            raise ValueError("flip probabilities must lie in [0, 1/2]")
        return max(x, XI_CLAMP)

    out = []
    for member in sets.member_index_sets:
        if member == (sets.target,):
            p = rate(sets.target)
        else:
            p = 0.5 * (1.0 - math.prod(1.0 - 2.0 * rate(idx) for idx in member))
            p = max(p, XI_CLAMP)
        out.append(math.log((1.0 - p) / p))
    return np.array(out)


@dataclass(frozen=True)
class ChannelSpec:
    """Readout channel for converting raw readings to log-likelihood ratios."""

    kind: str  # "binary_symmetric" | "gaussian"
    p: float | None = None
    v: float | None = None
    w: float | None = None

    def __post_init__(self):
        if self.kind == "binary_symmetric":
            if self.p is None or not 0 <= self.p <= 0.5:
                raise ValueError("binary symmetric channel needs 0 <= p <= 1/2")
        elif self.kind == "gaussian":
            if self.v is None or self.w is None or self.w <= 0:
                raise ValueError("gaussian channel needs v and w > 0")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")


def channel_llr(reading: float, spec: ChannelSpec) -> float:
    """Log-likelihood ratio of one reading under the channel model."""
    if spec.kind == "binary_symmetric":
        if spec.p == 0.5:
            return 0.0
        p = max(spec.p, XI_CLAMP)
        return 0.5 * math.log((1.0 - p) / p) * reading
    return (spec.v / spec.w**2) * reading


def repetition_mvd(r) -> MajorityVerdict:
    """Majority vote over repeated readouts of one logical spin."""
    return majority(r)


def qac_mvd(r: ReplicaMatrix, tie_value: int = 1):
    """Row-wise majority over replicas; returns (logical state, tie count)."""
    sums = r.entries.sum(axis=1)
    ties = int(np.count_nonzero(sums == 0))
    Z = np.where(sums != 0, np.sign(sums), tie_value).astype(np.int64)
    return Z, ties


def pe_orthogonal_sets(i: int, j: int, K: int) -> OrthogonalEstimatorSet:
    """Estimators of physical spin (i, j): the readout itself plus, for each
    k distinct from i and j, the two-hop product over (j, k) and (k, i)."""
    if not (1 <= i < j <= K):
        raise ValueError("need 1 <= i < j <= K")
    members = [((i, j),)]
    for k in range(1, K + 1):
        if k in (i, j):
            continue
        members.append(
            (
                (min(j, k), max(j, k)),
                (min(k, i), max(k, i)),
            )
        )
    return OrthogonalEstimatorSet(target=(i, j), member_index_sets=tuple(members))


def _weight2_vote(entries: np.ndarray):
    """One decoding round: sign of entries @ (entries - I) with the diagonal
    restored; returns (new entries, tie count)."""
    m = entries.astype(np.int64)
    votes = m @ m - m  # entry (i, j) sums r_ik r_kj over k != j, plus r_ij itself
    # diagonal votes equal K-1 > 0, so zero entries are all off-diagonal,
    # mirrored across the symmetric matrix
    ties = int(np.count_nonzero(votes == 0)) // 2
    out = np.where(votes >= 0, 1, -1).astype(np.int8)
    np.fill_diagonal(out, 1)
    return out, ties


def pe_mvd_weight2(r: PhysicalSpinMatrix) -> PhysicalSpinMatrix:
    """One-step majority-vote decoding of a parity-encoded readout.

    Votes for spin (i, j) are the readout r_ij and the K - 1 products
    r_ik r_kj; ties resolve to +1.
    """
    if r.layout_kind != ORIGINAL:
        raise ValueError("decoder operates on the original layout")
    out, _ = _weight2_vote(r.entries)
    return PhysicalSpinMatrix(entries=out, layout_kind=ORIGINAL)


@dataclass(frozen=True)
class DecodeResult:
    """Decoded physical and logical estimates with iteration accounting."""

    physical_estimate: PhysicalSpinMatrix
    logical_estimate: np.ndarray
    iterations_used: int
    ties_encountered: int
    converged: bool
    policy: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "z_star": json.loads(self.physical_estimate.to_json()),
                "Z_star": [int(v) for v in self.logical_estimate],
                "iters": self.iterations_used,
                "ties": self.ties_encountered,
                "policy": self.policy,
            }
        )


def canonical_logical(Z) -> np.ndarray:
    """Representative of the global-flip pair: first spin forced to +1."""
    z = as_spins(Z)
    return z if z[0] == 1 else -z


def _extract_entries(m: np.ndarray, inst, policy: str) -> np.ndarray:
    if policy == "code_row":
        if not entries_is_code(m):
            raise ValueError("code_row extraction requires a code state")
        return canonical_logical(m[0].astype(np.int64))
    if policy == "energy_best_row":
        if inst is None:
            raise ValueError("energy_best_row requires a problem instance")
        rows = m.astype(float)
        energies = 0.5 * np.einsum(
            "ik,kl,il->i", rows, inst.couplings, rows
        ) + rows @ inst.fields
        return m[int(np.argmin(energies))].astype(np.int64)
    if policy == "legacy_extra_vote":
        mm = m.astype(np.int64)
        votes = (mm @ mm)[0]
        Z = np.where(votes >= 0, 1, -1).astype(np.int64)
        Z[0] = 1
        return Z
    raise ValueError(f"unknown extraction policy {policy!r}")


def extract_logical(
    z_star: PhysicalSpinMatrix, inst: ProblemInstance, policy: str
) -> np.ndarray:
    """Read a logical state off a decoded physical matrix.

    - ``code_row``: any row of a code state, canonicalized (rows agree up to
      global sign); rejected on non-code input.
    - ``energy_best_row``: the row with the lowest logical energy.
    - ``legacy_extra_vote``: fix Z_1 = +1 and vote each remaining spin via
      sgn[(z z)_{1i}]; kept for comparison despite its known failure modes.
    """
    if z_star.layout_kind != ORIGINAL:
        raise ValueError("extraction operates on the original layout")
    if inst is not None and inst.size != z_star.logical_size:
        raise ValueError("instance size does not match matrix size")
    return _extract_entries(z_star.entries, inst, policy)


def iterate_entries(entries: np.ndarray, n_max: int, inst, policy: str):
    """Raw-array core of pe_mvd_iterated, for hot loops.

    Returns (final entries, logical estimate, iterations, ties, converged,
    chosen policy) without constructing matrix objects.
    """
    current = entries
    ties = 0
    iters = 0
    converged = False
    for _ in range(n_max):
        nxt, t = _weight2_vote(current)
        ties += t
        iters += 1
        fixed = np.array_equal(nxt, current)
        current = nxt
        if fixed or entries_is_code(current):
            converged = True
            break
    chosen = policy
    if policy == "auto":
        if entries_is_code(current):
            chosen = "code_row"
        elif inst is not None:
            chosen = "energy_best_row"
        else:
            chosen = "legacy_extra_vote"
    Z_star = _extract_entries(current, inst, chosen)
    return current, Z_star, iters, ties, converged, chosen


def pe_mvd_iterated(
    r: PhysicalSpinMatrix,
    n_max: int = 10,
    inst: ProblemInstance | None = None,
    policy: str = "auto",
) -> DecodeResult:
    """Iterate the one-step decoder until a fixed point or code state.

    Between rounds the iterate is renormalized to a valid bipolar matrix
    (elementwise sign, unit diagonal).  With ``policy="auto"`` the logical
    estimate uses ``code_row`` when the final iterate is a code state, and
    otherwise ``energy_best_row`` when an instance is supplied, falling back
    to ``legacy_extra_vote``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if r.layout_kind != ORIGINAL:
        raise ValueError("decoder operates on the original layout")
    current, Z_star, iters, ties, converged, chosen = iterate_entries(
        r.entries, n_max, inst, policy
    )
    z_star = PhysicalSpinMatrix(entries=current, layout_kind=ORIGINAL)
    return DecodeResult(
        physical_estimate=z_star,
        logical_estimate=Z_star,
        iterations_used=iters,
        ties_encountered=ties,
        converged=converged,
        policy=chosen,
    )

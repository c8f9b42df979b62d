"""Metropolis Markov chains over spin models.

Three drivers share one model interface:

- ``standard``: classic Metropolis with self-loops on rejection;
- ``rejection_discarded``: Metropolis, but rejected attempts are dropped
  from the recorded series;
- ``rejection_free``: every step moves.  Each neighbor flip with acceptance
  rate p_i receives an exponential holding time tau_i ~ Exp(p_i) and the
  smallest wins, so the flip is selected with probability p_i / sum_j p_j.

The inverse temperature is absorbed into the model weights, so acceptance
is min{1, exp(-dE)} on the model's own energy scale.  Rejection-free
samples carry a geometric multiplicity (the number of steps a standard
chain would have idled) so the Boltzmann distribution can be recovered by
reweighting.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from parityanneal.ising import ProblemInstance
from parityanneal.parity import WeightParameters
from parityanneal.qac import CHAIN, STAR, QacWeights

__all__ = [
    "EnergyModel",
    "LogicalIsingModel",
    "PeModel",
    "QacReplicaModel",
    "ChainState",
    "SampleRecord",
    "StationaryHistogram",
    "metropolis_step",
    "escape_probability",
    "rejection_free_step",
    "multiplicity_sample",
    "recover_mb",
    "run_chain",
    "RunSummary",
    "HistogramSink",
    "SeriesSink",
    "BestEnergySink",
]


class EnergyModel(abc.ABC):
    """Energy landscape with single-spin-flip moves."""

    num_moves: int

    @abc.abstractmethod
    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        """Uniformly random configuration."""

    @abc.abstractmethod
    def energy(self, spins: np.ndarray) -> float:
        """Total energy of a configuration."""

    @abc.abstractmethod
    def move_delta(self, spins: np.ndarray, move: int) -> float:
        """Energy change of a single flip."""

    @abc.abstractmethod
    def move_deltas(self, spins: np.ndarray) -> np.ndarray:
        """Energy changes of all single flips."""

    @abc.abstractmethod
    def apply_move(self, spins: np.ndarray, move: int) -> None:
        """Flip one spin in place."""


class LogicalIsingModel(EnergyModel):
    """Single-flip dynamics on the bare logical Hamiltonian, scaled by beta."""

    def __init__(self, inst: ProblemInstance, beta: float = 1.0):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.inst = inst
        self.beta = float(beta)
        self.num_moves = inst.size

    def initial_state(self, rng):
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=self.inst.size)

    def energy(self, spins):
        s = spins.astype(float)
        return self.beta * float(
            0.5 * s @ self.inst.couplings @ s + self.inst.fields @ s
        )

    def move_delta(self, spins, move):
        local = self.inst.couplings[move] @ spins + self.inst.fields[move]
        return self.beta * (-2.0 * spins[move] * local)

    def move_deltas(self, spins):
        local = self.inst.couplings @ spins + self.inst.fields
        return self.beta * (-2.0 * spins * local)

    def apply_move(self, spins, move):
        spins[move] = -spins[move]


class PeModel(EnergyModel):
    """Parity-encoded physical system on the original layout.

    The state is the full symmetric K x K matrix; one move flips the
    mirrored pair (a, b)/(b, a) atomically.  Moves are indexed by the
    row-major upper triangle.
    """

    def __init__(self, inst: ProblemInstance, weights: WeightParameters):
        if np.any(inst.fields != 0):
            raise ValueError("original-layout dynamics require h = 0")
        self.inst = inst
        self.weights = weights
        K = inst.size
        self.K = K
        iu = np.triu_indices(K, k=1)
        self.iu = iu
        self.num_moves = len(iu[0])
        self.J_upper = inst.couplings[iu]
        # Plaquette (i, j), 1-based 1 <= i < j <= K-1, covers matrix entries
        # {i, i+1} x {j, j+1}; entry (a, b) therefore belongs to plaquettes
        # with i in {a-1, a} and j in {b-1, b} that fall inside the range.
        rows = np.full((self.num_moves, 4), 0, dtype=np.int64)
        cols = np.full((self.num_moves, 4), 0, dtype=np.int64)
        mask = np.zeros((self.num_moves, 4), dtype=bool)
        for m, (a0, b0) in enumerate(zip(*iu)):
            a, b = a0 + 1, b0 + 1  # 1-based labels
            slot = 0
            for i in (a - 1, a):
                for j in (b - 1, b):
                    if 1 <= i < j <= K - 1:
                        rows[m, slot] = i - 1
                        cols[m, slot] = j - 1
                        mask[m, slot] = True
                    slot += 1
        self._prows, self._pcols, self._pmask = rows, cols, mask

    def initial_state(self, rng):
        m = np.ones((self.K, self.K), dtype=np.int8)
        vals = rng.choice(np.array([-1, 1], dtype=np.int8), size=self.num_moves)
        m[self.iu] = vals
        m[(self.iu[1], self.iu[0])] = vals
        return m

    def _plaquettes(self, spins):
        K = self.K
        return (
            spins[0 : K - 1, 0 : K - 1]
            * spins[0 : K - 1, 1:K]
            * spins[1:K, 0 : K - 1]
            * spins[1:K, 1:K]
        )

    def energy_components(self, spins):
        """(local coupling sum, violated-plaquette count) without weights."""
        local = float(self.J_upper @ spins[self.iu])
        P = self._plaquettes(spins)
        iu = np.triu_indices(self.K - 1, k=1)
        pen = int(np.count_nonzero(P[iu] == -1))
        return local, pen

    def energy(self, spins):
        local, pen = self.energy_components(spins)
        return self.weights.beta * local + self.weights.gamma * pen

    def move_deltas(self, spins):
        P = self._plaquettes(spins)
        pen_change = np.where(self._pmask, P[self._prows, self._pcols], 0).sum(axis=1)
        local = -2.0 * self.J_upper * spins[self.iu]
        return self.weights.beta * local + self.weights.gamma * pen_change

    def move_delta(self, spins, move):
        a, b = self.iu[0][move], self.iu[1][move]
        pen_change = 0
        for s in range(4):
            if self._pmask[move, s]:
                i, j = self._prows[move, s], self._pcols[move, s]
                pen_change += (
                    spins[i, j]
                    * spins[i, j + 1]
                    * spins[i + 1, j]
                    * spins[i + 1, j + 1]
                )
        local = -2.0 * self.inst.couplings[a, b] * spins[a, b]
        return self.weights.beta * local + self.weights.gamma * pen_change

    def apply_move(self, spins, move):
        a, b = self.iu[0][move], self.iu[1][move]
        spins[a, b] = -spins[a, b]
        spins[b, a] = -spins[b, a]


class QacReplicaModel(EnergyModel):
    """Replica-encoded system: N x K matrix, single-entry flips."""

    def __init__(
        self,
        inst: ProblemInstance,
        weights: QacWeights,
        num_replicas: int,
        chain_style: str = STAR,
    ):
        if num_replicas < 1:
            raise ValueError("need at least one replica")
        if chain_style not in (STAR, CHAIN):
            raise ValueError(f"unknown stabilizer style {chain_style!r}")
        self.inst = inst
        self.weights = weights
        self.N = inst.size
        self.R = num_replicas
        self.chain_style = chain_style
        self.num_moves = self.N * self.R

    def initial_state(self, rng):
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=(self.N, self.R))

    def _penalty(self, spins):
        if self.R < 2:
            return 0
        if self.chain_style == STAR:
            S = spins[:, :1] * spins[:, 1:]
        else:
            S = spins[:, :-1] * spins[:, 1:]
        return int(np.count_nonzero(S == -1))

    def energy(self, spins):
        s = spins.astype(float)
        enc = 0.5 * np.einsum("ik,ij,jk->", s, self.inst.couplings, s) + float(
            self.inst.fields @ s.sum(axis=1)
        )
        return self.weights.beta * enc + self.weights.gamma * self._penalty(spins)

    def _pen_deltas(self, spins):
        d = np.zeros((self.N, self.R))
        if self.R < 2:
            return d
        if self.chain_style == STAR:
            S = spins[:, :1] * spins[:, 1:]
            d[:, 0] = S.sum(axis=1)
            d[:, 1:] = S
        else:
            S = spins[:, :-1] * spins[:, 1:]
            d[:, :-1] += S
            d[:, 1:] += S
        return d

    def move_deltas(self, spins):
        s = spins.astype(float)
        local = self.inst.couplings @ s + self.inst.fields[:, None]
        enc = -2.0 * s * local
        d = self.weights.beta * enc + self.weights.gamma * self._pen_deltas(spins)
        return d.ravel()

    def move_delta(self, spins, move):
        i, k = divmod(move, self.R)
        local = float(self.inst.couplings[i] @ spins[:, k] + self.inst.fields[i])
        enc = -2.0 * spins[i, k] * local
        pen = self._pen_deltas(spins)[i, k] if self.weights.gamma != 0 else 0.0
        return self.weights.beta * enc + self.weights.gamma * pen

    def apply_move(self, spins, move):
        i, k = divmod(move, self.R)
        spins[i, k] = -spins[i, k]


@dataclass
class ChainState:
    """Current configuration with its cached energy."""

    spins: np.ndarray
    energy: float


@dataclass(frozen=True)
class SampleRecord:
    """One recorded chain sample."""

    spins: np.ndarray
    energy: float
    multiplicity: int
    sweep_index: int

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be at least 1")


@dataclass(frozen=True)
class StationaryHistogram:
    """Empirical per-state probabilities."""

    probabilities: dict
    total_weight: float

    @classmethod
    def from_counts(cls, counts: dict) -> "StationaryHistogram":
        total = float(sum(counts.values()))
        if total <= 0:
            raise ValueError("histogram needs positive total weight")
        return cls(
            probabilities={k: v / total for k, v in counts.items()},
            total_weight=total,
        )

    def probability(self, key) -> float:
        return self.probabilities.get(key, 0.0)


def metropolis_step(state: ChainState, model: EnergyModel, rng: np.random.Generator):
    """One Metropolis attempt; returns (state, accepted)."""
    move = int(rng.integers(model.num_moves))
    dE = model.move_delta(state.spins, move)
    if dE <= 0 or rng.random() < math.exp(-dE):
        model.apply_move(state.spins, move)
        state.energy += dE
        return state, True
    return state, False


def escape_probability(state: ChainState, model: EnergyModel) -> float:
    """Probability that a uniformly chosen flip attempt is accepted."""
    deltas = model.move_deltas(state.spins)
    return float(np.minimum(1.0, np.exp(-np.maximum(deltas, 0.0))).mean())


def rejection_free_step(
    state: ChainState, model: EnergyModel, rng: np.random.Generator
):
    """One rejection-free move; returns (state, escape probability).

    Each admissible flip i gets a holding time tau_i ~ Exp(rate_i) with
    rate_i = min{1, exp(-dE_i)} / M, and the earliest clock fires.
    """
    deltas = model.move_deltas(state.spins)
    rates = np.minimum(1.0, np.exp(-np.maximum(deltas, 0.0))) / model.num_moves
    positive = rates > 0
    if not positive.any():
        raise RuntimeError("no admissible move has positive rate")
    taus = np.full(rates.shape, np.inf)
    taus[positive] = rng.exponential(1.0 / rates[positive])
    move = int(np.argmin(taus))
    model.apply_move(state.spins, move)
    state.energy += deltas[move]
    return state, float(rates.sum())


def multiplicity_sample(alpha: float, rng: np.random.Generator) -> int:
    """Geometric multiplicity floor(ln U / ln(1 - alpha)) + 1, mean 1/alpha."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return 1
    u = rng.random()
    while u == 0.0:  # guard the log; rng.random() is already < 1
        u = rng.random()
    return int(math.log(u) / math.log(1.0 - alpha)) + 1


def recover_mb(samples) -> StationaryHistogram:
    """Multiplicity-weighted histogram recovering the Boltzmann law from a
    rejection-free series."""
    counts: dict = {}
    n = 0
    for rec in samples:
        key = tuple(int(v) for v in np.asarray(rec.spins).ravel())
        counts[key] = counts.get(key, 0) + rec.multiplicity
        n += 1
    if n == 0:
        raise ValueError("empty sample sequence")
    return StationaryHistogram.from_counts(counts)


class HistogramSink:
    """Accumulates per-state counts, optionally multiplicity-weighted."""

    def __init__(self, key=None, weighted: bool = False):
        self.key = key or (lambda rec: tuple(rec.spins.ravel().tolist()))
        self.weighted = weighted
        self.counts: dict = {}

    def consume(self, rec: SampleRecord):
        w = rec.multiplicity if self.weighted else 1
        k = self.key(rec)
        self.counts[k] = self.counts.get(k, 0) + w

    def histogram(self) -> StationaryHistogram:
        return StationaryHistogram.from_counts(self.counts)


class SeriesSink:
    """Stores the full sample series in arrival order."""

    def __init__(self):
        self.records: list[SampleRecord] = []

    def consume(self, rec: SampleRecord):
        self.records.append(rec)


class BestEnergySink:
    """Tracks the lowest-scoring record seen, with an optional filter.

    The score defaults to the recorded energy; a decode hook can rescore
    each sample (e.g. by the logical energy of its decoded state).
    """

    def __init__(self, score=None, accept=None):
        self.score = score or (lambda rec: rec.energy)
        self.accept = accept
        self.best_record: SampleRecord | None = None
        self.best_score: float = math.inf
        self.best_payload = None

    def consume(self, rec: SampleRecord):
        if self.accept is not None and not self.accept(rec):
            return
        s = self.score(rec)
        payload = None
        if isinstance(s, tuple):
            s, payload = s
        if s < self.best_score:
            self.best_score = s
            self.best_record = rec
            self.best_payload = payload


@dataclass
class RunSummary:
    mode: str
    steps: int
    accepted: int
    recorded: int
    final_energy: float
    best_energy: float
    final_spins: np.ndarray | None = None


MODES = ("standard", "rejection_discarded", "rejection_free")


def run_chain(
    model: EnergyModel,
    mode: str,
    steps: int,
    seed,
    sinks=(),
    initial: np.ndarray | None = None,
    burn_in: int = 0,
) -> RunSummary:
    """Drive one chain and feed each recorded sample to the sinks.

    ``steps`` counts transition attempts (standard, rejection_discarded) or
    moves (rejection_free).  The first ``burn_in`` records are discarded.
    Deterministic for a fixed seed.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    rng = np.random.default_rng(seed)
    spins = model.initial_state(rng) if initial is None else np.array(initial)
    state = ChainState(spins=spins, energy=model.energy(spins))

    accepted = 0
    recorded = 0
    best_energy = math.inf
    emitted = 0

    def emit(spins_snapshot: np.ndarray, energy: float, mult: int):
        nonlocal recorded, emitted, best_energy
        emitted += 1
        if emitted <= burn_in:
            return
        rec = SampleRecord(
            spins=spins_snapshot,
            energy=energy,
            multiplicity=mult,
            sweep_index=emitted,
        )
        recorded += 1
        best_energy = min(best_energy, rec.energy)
        for sink in sinks:
            sink.consume(rec)

    if mode == "rejection_free":
        # The multiplicity of a visited state uses the escape probability at
        # that state, which the stepper reports as it leaves it.
        for _ in range(steps):
            pre_spins = state.spins.copy()
            pre_energy = state.energy
            state, alpha = rejection_free_step(state, model, rng)
            accepted += 1
            emit(pre_spins, pre_energy, multiplicity_sample(alpha, rng))
    else:
        # Same rule as metropolis_step, with the random draws batched; one
        # uniform is consumed per attempt regardless of the sign of dE.
        record_rejected = mode == "standard"
        spins = state.spins
        move_delta = model.move_delta
        apply_move = model.apply_move
        exp = math.exp
        chunk = 1 << 14
        done = 0
        while done < steps:
            n = min(chunk, steps - done)
            moves = rng.integers(model.num_moves, size=n)
            uniforms = rng.random(n)
            for t in range(n):
                move = moves[t]
                dE = move_delta(spins, move)
                if dE <= 0 or uniforms[t] < exp(-dE):
                    apply_move(spins, move)
                    state.energy += dE
                    accepted += 1
                    emit(spins.copy(), state.energy, 1)
                elif record_rejected:
                    emit(spins.copy(), state.energy, 1)
            done += n

    return RunSummary(
        mode=mode,
        steps=steps,
        accepted=accepted,
        recorded=recorded,
        final_energy=state.energy,
        best_energy=best_energy,
        final_spins=state.spins.copy(),
    )

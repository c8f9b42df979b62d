"""Tests for the Metropolis chain drivers and spin-model dynamics."""

import math

import numpy as np
import pytest
from scipy import stats

from parityanneal.harness import toy_instance
from parityanneal.ising import generate_instance
from parityanneal.mcmc import (
    BestEnergySink,
    ChainState,
    EnergyModel,
    HistogramSink,
    LogicalIsingModel,
    PeModel,
    QacReplicaModel,
    SampleRecord,
    SeriesSink,
    StationaryHistogram,
    escape_probability,
    metropolis_step,
    multiplicity_sample,
    recover_mb,
    rejection_free_step,
    run_chain,
)
from parityanneal.parity import WeightParameters
from parityanneal.qac import QacWeights

TOY_BETA = math.log(4) / 2  # exp(-2 beta) = 0.25


class StubModel(EnergyModel):
    """Two-spin model with externally fixed flip costs, for kernel tests."""

    def __init__(self, deltas):
        self.deltas = np.array(deltas, dtype=float)
        self.num_moves = len(deltas)

    def initial_state(self, rng):
        return np.ones(self.num_moves, dtype=np.int8)

    def energy(self, spins):
        return 0.0

    def move_delta(self, spins, move):
        return self.deltas[move]

    def move_deltas(self, spins):
        return self.deltas.copy()

    def apply_move(self, spins, move):
        spins[move] = -spins[move]


def random_state(model, seed):
    rng = np.random.default_rng(seed)
    spins = model.initial_state(rng)
    return ChainState(spins=spins, energy=model.energy(spins))


@pytest.mark.parametrize(
    "factory",
    [
        lambda: LogicalIsingModel(generate_instance(7, seed=1, half_width=1.0), 1.3),
        lambda: PeModel(
            generate_instance(6, seed=2, half_width=0.5), WeightParameters(2.0, 3.5)
        ),
        lambda: QacReplicaModel(
            generate_instance(5, seed=3, half_width=1.0), QacWeights(1.5, 2.0), 4
        ),
        lambda: QacReplicaModel(
            generate_instance(5, seed=3, half_width=1.0),
            QacWeights(1.5, 2.0),
            4,
            chain_style="chain",
        ),
    ],
)
def test_move_deltas_match_energy_recomputation(factory):
    model = factory()
    for seed in range(5):
        state = random_state(model, seed)
        deltas = model.move_deltas(state.spins)
        assert deltas.shape == (model.num_moves,)
        for move in range(model.num_moves):
            before = model.energy(state.spins)
            assert model.move_delta(state.spins, move) == pytest.approx(
                deltas[move], abs=1e-9
            )
            model.apply_move(state.spins, move)
            after = model.energy(state.spins)
            model.apply_move(state.spins, move)  # restore
            assert deltas[move] == pytest.approx(after - before, abs=1e-9)


def test_downhill_always_accepted():
    model = StubModel([-0.5, -2.0])
    rng = np.random.default_rng(0)
    for _ in range(50):
        state = ChainState(spins=np.ones(2, dtype=np.int8), energy=0.0)
        _, accepted = metropolis_step(state, model, rng)
        assert accepted


def test_escape_probability_toy_ground_state():
    # flip costs from the lowest-energy state are 6, 4, 4 on the unit scale;
    # at exp(-2 beta) = 1/4 the mean acceptance is (K^3 + 2 K^2) / 3
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    state = ChainState(spins=np.array([-1, -1, -1], dtype=np.int8), energy=0.0)
    K = 0.25
    assert escape_probability(state, model) == pytest.approx((K**3 + 2 * K**2) / 3)


def test_empirical_acceptance_from_toy_ground_state():
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    rng = np.random.default_rng(7)
    n = 20000
    hits = 0
    for _ in range(n):
        state = ChainState(spins=np.array([-1, -1, -1], dtype=np.int8), energy=0.0)
        _, accepted = metropolis_step(state, model, rng)
        hits += accepted
    alpha = (0.25**3 + 2 * 0.25**2) / 3
    sigma = math.sqrt(alpha * (1 - alpha) / n)
    assert abs(hits / n - alpha) < 3 * sigma


def test_rejection_free_always_moves_and_reports_rate_sum():
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    rng = np.random.default_rng(1)
    state = random_state(model, 1)
    for _ in range(50):
        before = state.spins.copy()
        state, alpha = rejection_free_step(state, model, rng)
        assert np.count_nonzero(state.spins != before) == 1
        assert 0 < alpha <= 1


def test_rejection_free_single_positive_rate_is_forced():
    # the second flip cost underflows exp(-dE) to zero, so the first move is
    # the only admissible one
    model = StubModel([-1.0, 5000.0])
    rng = np.random.default_rng(2)
    for _ in range(30):
        state = ChainState(spins=np.ones(2, dtype=np.int8), energy=0.0)
        state, _ = rejection_free_step(state, model, rng)
        assert state.spins[0] == -1 and state.spins[1] == 1


def test_rejection_free_no_admissible_move():
    model = StubModel([5000.0, 5000.0])
    state = ChainState(spins=np.ones(2, dtype=np.int8), energy=0.0)
    with pytest.raises(RuntimeError):
        rejection_free_step(state, model, np.random.default_rng(0))


def test_rejection_free_selection_frequencies():
    # rates 1 and 1/3 -> first move chosen with probability 3/4
    model = StubModel([0.0, math.log(3.0)])
    rng = np.random.default_rng(3)
    n = 4000
    first = 0
    for _ in range(n):
        state = ChainState(spins=np.ones(2, dtype=np.int8), energy=0.0)
        state, _ = rejection_free_step(state, model, rng)
        first += state.spins[0] == -1
    sigma = math.sqrt(0.75 * 0.25 / n)
    assert abs(first / n - 0.75) < 3 * sigma


def test_multiplicity_sample_edges():
    rng = np.random.default_rng(0)
    assert all(multiplicity_sample(1.0, rng) == 1 for _ in range(10))
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            multiplicity_sample(bad, rng)


def test_multiplicity_mean():
    rng = np.random.default_rng(11)
    draws = np.array([multiplicity_sample(0.25, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 4.0) < 0.05


def test_multiplicity_is_geometric():
    # chi-square against (1-a)^(t-1) a with a pooled tail, 1% level
    a = 0.25
    rng = np.random.default_rng(12)
    draws = np.array([multiplicity_sample(a, rng) for _ in range(100_000)])
    t_max = 20
    observed = np.array(
        [np.count_nonzero(draws == t) for t in range(1, t_max + 1)]
        + [np.count_nonzero(draws > t_max)]
    )
    probs = np.array([(1 - a) ** (t - 1) * a for t in range(1, t_max + 1)])
    probs = np.append(probs, (1 - a) ** t_max)
    result = stats.chisquare(observed, probs * draws.size)
    assert result.pvalue > 0.01


def test_recover_mb_weighting():
    recs = [
        SampleRecord(spins=np.array([1, 1]), energy=0.0, multiplicity=3, sweep_index=1),
        SampleRecord(spins=np.array([1, -1]), energy=1.0, multiplicity=1, sweep_index=2),
        SampleRecord(spins=np.array([1, 1]), energy=0.0, multiplicity=2, sweep_index=3),
    ]
    hist = recover_mb(recs)
    assert hist.probability((1, 1)) == pytest.approx(5 / 6)
    assert hist.probability((1, -1)) == pytest.approx(1 / 6)
    assert hist.probability((-1, -1)) == 0.0
    with pytest.raises(ValueError):
        recover_mb([])


def test_histogram_from_counts_validation():
    with pytest.raises(ValueError):
        StationaryHistogram.from_counts({})


def test_run_chain_argument_validation():
    model = LogicalIsingModel(toy_instance(), beta=1.0)
    with pytest.raises(ValueError):
        run_chain(model, "simulated_annealing", 10, seed=0)
    with pytest.raises(ValueError):
        run_chain(model, "standard", 0, seed=0)
    with pytest.raises(ValueError):
        run_chain(model, "standard", 10, seed=0, burn_in=-1)


def test_run_chain_recording_semantics():
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    std = run_chain(model, "standard", 500, seed=4)
    assert std.recorded == 500  # every attempt recorded, rejections included
    disc = run_chain(model, "rejection_discarded", 500, seed=4)
    assert disc.recorded == disc.accepted <= 500
    rf = run_chain(model, "rejection_free", 500, seed=4)
    assert rf.recorded == rf.accepted == 500


def test_run_chain_deterministic_for_fixed_seed():
    model = PeModel(
        generate_instance(5, seed=9, half_width=0.5), WeightParameters(1.0, 1.0)
    )
    a = run_chain(model, "rejection_free", 200, seed=[3, 1])
    b = run_chain(model, "rejection_free", 200, seed=[3, 1])
    assert a.final_energy == b.final_energy
    assert np.array_equal(a.final_spins, b.final_spins)
    c = run_chain(model, "rejection_free", 200, seed=[3, 2])
    assert not np.array_equal(a.final_spins, c.final_spins)


def test_run_chain_burn_in_and_series_order():
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    sink = SeriesSink()
    run_chain(model, "standard", 100, seed=5, sinks=(sink,), burn_in=10)
    assert len(sink.records) == 90
    assert [r.sweep_index for r in sink.records] == list(range(11, 101))


def test_rejection_free_multiplicity_attaches_to_departed_state():
    # consecutive rejection-free records differ by exactly one flip
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    sink = SeriesSink()
    run_chain(model, "rejection_free", 100, seed=6, sinks=(sink,))
    for prev, nxt in zip(sink.records, sink.records[1:]):
        assert np.count_nonzero(prev.spins != nxt.spins) == 1
    assert all(r.multiplicity >= 1 for r in sink.records)


def test_chain_energy_bookkeeping_consistent():
    model = PeModel(
        generate_instance(5, seed=9, half_width=0.5), WeightParameters(1.5, 2.5)
    )
    for mode in ("standard", "rejection_free"):
        out = run_chain(model, mode, 300, seed=8)
        assert out.final_energy == pytest.approx(model.energy(out.final_spins))


def test_histogram_sink_weighted_matches_recover_mb():
    model = LogicalIsingModel(toy_instance(), beta=TOY_BETA)
    series = SeriesSink()
    weighted = HistogramSink(weighted=True)
    run_chain(model, "rejection_free", 400, seed=10, sinks=(series, weighted))
    direct = recover_mb(series.records)
    hist = weighted.histogram()
    for key, p in direct.probabilities.items():
        assert hist.probability(key) == pytest.approx(p)


def test_best_energy_sink():
    recs = [
        SampleRecord(spins=np.array([1]), energy=2.0, multiplicity=1, sweep_index=1),
        SampleRecord(spins=np.array([-1]), energy=-1.0, multiplicity=1, sweep_index=2),
        SampleRecord(spins=np.array([1]), energy=0.5, multiplicity=1, sweep_index=3),
    ]
    sink = BestEnergySink()
    for r in recs:
        sink.consume(r)
    assert sink.best_score == -1.0
    assert sink.best_record.sweep_index == 2
    gated = BestEnergySink(accept=lambda rec: rec.energy > 0)
    for r in recs:
        gated.consume(r)
    assert gated.best_score == 0.5


def test_sample_record_multiplicity_validation():
    with pytest.raises(ValueError):
        SampleRecord(spins=np.array([1]), energy=0.0, multiplicity=0, sweep_index=1)

"""Experiment drivers behind the command-line interface.

Covers four workflows:

- ``toy_validate``: a three-spin benchmark with known exact energies and
  stationary distributions, used to validate all three chain modes and the
  multiplicity reweighting;
- ``run_sweep``: (beta, gamma) landscape of success probabilities for a
  parity-encoded instance, comparing minimum-energy bookkeeping against
  per-sample majority-vote decoding;
- ``run_spectra``: a long recorded series at one operating point, with the
  samples classified against the known target state;
- ``decode_series``: offline replay of a stored series through the decoder.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from parityanneal import decoder as dec
from parityanneal import mcmc
from parityanneal.ising import (
    ProblemInstance,
    brute_force_ground_state,
    generate_instance,
    logical_energy,
)
from parityanneal.parity import (
    ORIGINAL,
    PhysicalSpinMatrix,
    WeightParameters,
    encode_pe,
    entries_is_code,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepCell",
    "SpectraResult",
    "ToyReport",
    "toy_instance",
    "toy_exact_distributions",
    "toy_validate",
    "run_sweep",
    "run_spectra",
    "decode_series",
    "write_sweep_csv",
    "write_spectra_csv",
    "write_series_csv",
    "read_series_csv",
]


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


# ---------------------------------------------------------------------------
# Three-spin benchmark model
# ---------------------------------------------------------------------------

#: The eight states in the benchmark's documented order.
TOY_STATES = [
    (-1, -1, -1),
    (-1, -1, +1),
    (-1, +1, -1),
    (+1, -1, -1),
    (-1, +1, +1),
    (+1, -1, +1),
    (+1, +1, -1),
    (+1, +1, +1),
]

#: Exact energies of TOY_STATES under the benchmark instance.
TOY_ENERGIES = [-5, 1, -1, -1, -3, 1, 7, 1]


def toy_instance() -> ProblemInstance:
    """Three spins with h = (2, 1, 0), J12 = +1, J13 = -1, J23 = -2.

    These couplings reproduce TOY_ENERGIES exactly over TOY_STATES.
    """
    J = np.array(
        [
            [0.0, 1.0, -1.0],
            [1.0, 0.0, -2.0],
            [-1.0, -2.0, 0.0],
        ]
    )
    return ProblemInstance(size=3, couplings=J, fields=np.array([2.0, 1.0, 0.0]))


def toy_exact_distributions(k_param: float):
    """Exact stationary laws of the benchmark at temperature parameter
    k = exp(-2 beta).

    Returns (pi, pi_tilde) as arrays over TOY_STATES: pi is the Boltzmann
    law; pi_tilde reweights it by each state's escape probability, which is
    what the rejection-free chain samples.
    """
    if not 0 < k_param < 1:
        raise ValueError("temperature parameter must lie in (0, 1)")
    beta = -math.log(k_param) / 2.0
    inst = toy_instance()
    model = mcmc.LogicalIsingModel(inst, beta=beta)
    E = np.array(TOY_ENERGIES, dtype=float)
    w = np.exp(-beta * (E - E.min()))
    pi = w / w.sum()
    alphas = np.array(
        [
            mcmc.escape_probability(
                mcmc.ChainState(
                    spins=np.array(s, dtype=np.int8), energy=model.energy(np.array(s))
                ),
                model,
            )
            for s in TOY_STATES
        ]
    )
    tilde = pi * alphas
    return pi, tilde / tilde.sum()


def _tv_distance(hist: mcmc.StationaryHistogram, exact: np.ndarray) -> float:
    emp = np.array([hist.probability(s) for s in TOY_STATES])
    return 0.5 * float(np.abs(emp - exact).sum())


@dataclass
class ToyReport:
    """Validation outcome for the three-spin benchmark."""

    k_param: float
    energies_ok: bool
    checks: list = field(default_factory=list)  # (name, measured, threshold, ok)
    distributions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.energies_ok and all(ok for _, _, _, ok in self.checks)

    def to_json(self) -> str:
        return json.dumps(
            {
                "k_param": self.k_param,
                "energies_ok": self.energies_ok,
                "checks": [
                    {"name": n, "measured": m, "threshold": t, "ok": ok}
                    for n, m, t, ok in self.checks
                ],
                "passed": self.passed,
            }
        )


def toy_validate(
    seed: int = 0,
    steps: int = 1_000_000,
    rf_steps: int = 200_000,
    k_param: float = 0.25,
) -> ToyReport:
    """Run all three chain modes on the benchmark and compare against the
    exact stationary laws."""
    inst = toy_instance()
    beta = -math.log(k_param) / 2.0
    model = mcmc.LogicalIsingModel(inst, beta=beta)
    pi, pi_tilde = toy_exact_distributions(k_param)

    energies_ok = all(
        logical_energy(np.array(s), inst) == e for s, e in zip(TOY_STATES, TOY_ENERGIES)
    )
    report = ToyReport(k_param=k_param, energies_ok=energies_ok)

    std_hist = mcmc.HistogramSink()
    mcmc.run_chain(model, "standard", steps, [seed, 0], sinks=[std_hist])
    tv_std = _tv_distance(std_hist.histogram(), pi)
    report.checks.append(("standard_vs_boltzmann_tv", tv_std, 0.02, tv_std < 0.02))

    disc_hist = mcmc.HistogramSink()
    mcmc.run_chain(model, "rejection_discarded", steps, [seed, 1], sinks=[disc_hist])
    tv_disc = _tv_distance(disc_hist.histogram(), pi_tilde)
    report.checks.append(
        ("rejection_discarded_vs_jumpchain_tv", tv_disc, 0.02, tv_disc < 0.02)
    )

    rf_hist = mcmc.HistogramSink()
    rf_weighted = mcmc.HistogramSink(weighted=True)
    mcmc.run_chain(
        model, "rejection_free", rf_steps, [seed, 2], sinks=[rf_hist, rf_weighted]
    )
    tv_rf = _tv_distance(rf_hist.histogram(), pi_tilde)
    report.checks.append(("rejection_free_vs_jumpchain_tv", tv_rf, 0.02, tv_rf < 0.02))
    tv_rec = _tv_distance(rf_weighted.histogram(), pi)
    report.checks.append(
        ("multiplicity_recovery_vs_boltzmann_tv", tv_rec, 0.03, tv_rec < 0.03)
    )

    report.distributions = {
        "exact_boltzmann": list(pi),
        "exact_jumpchain": list(pi_tilde),
        "standard": [std_hist.histogram().probability(s) for s in TOY_STATES],
        "rejection_discarded": [
            disc_hist.histogram().probability(s) for s in TOY_STATES
        ],
        "rejection_free": [rf_hist.histogram().probability(s) for s in TOY_STATES],
        "recovered": [rf_weighted.histogram().probability(s) for s in TOY_STATES],
    }
    return report


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration (see ``from_json``)."""

    mode: str
    instance: ProblemInstance
    grid: list
    repetitions: int = 30
    chain_mode: str = "rejection_free"
    steps: int | None = None
    seed: int = 0
    burn_in: int = 50
    decoder_policy: str = "auto"
    n_max: int = 10
    point: tuple | None = None
    reference_state: np.ndarray | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            mode = doc["mode"]
            if mode not in ("toy_validate", "sweep", "spectra", "decode_series"):
                raise ConfigError(f"unknown mode {mode!r}")
            inst = _load_instance(doc.get("instance"))
            grid = [(float(b), float(g)) for b, g in doc.get("grid", [])]
            if mode == "sweep" and not grid:
                raise ConfigError("sweep requires a nonempty grid")
            point = doc.get("point")
            if mode == "spectra" and point is None:
                raise ConfigError("spectra requires a (beta, gamma) point")
            reps = int(doc.get("repetitions", 30))
            if reps < 1:
                raise ConfigError("repetitions must be >= 1")
            chain_mode = doc.get("chain_mode", "rejection_free")
            if chain_mode not in mcmc.MODES:
                raise ConfigError(f"unknown chain mode {chain_mode!r}")
            ref = doc.get("reference_state")
            return cls(
                mode=mode,
                instance=inst,
                grid=grid,
                repetitions=reps,
                chain_mode=chain_mode,
                steps=doc.get("steps"),
                seed=int(doc.get("seed", 0)),
                burn_in=int(doc.get("burn_in", 50)),
                decoder_policy=doc.get("decoder_policy", "auto"),
                # Spectra classification follows the one-step decoding
                # convention; sweeps default to the full iterated decoder.
                n_max=int(doc.get("n_max", 1 if mode == "spectra" else 10)),
                point=(float(point[0]), float(point[1])) if point else None,
                reference_state=np.array(ref, dtype=np.int64) if ref else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        return cls.from_dict(doc)


def _load_instance(spec) -> ProblemInstance | None:
    if spec is None:
        return None
    if "file" in spec:
        path = spec["file"]
        if not os.path.exists(path):
            raise ConfigError(f"instance file not found: {path}")
        with open(path) as fh:
            return ProblemInstance.from_json(fh.read())
    if "inline" in spec:
        return ProblemInstance.from_json(json.dumps(spec["inline"]))
    if "generate" in spec:
        g = spec["generate"]
        return generate_instance(
            int(g["K"]), int(g["seed"]), float(g.get("half_width", 0.25))
        )
    raise ConfigError("instance must give 'file', 'inline', or 'generate'")


def _reference_logical(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.reference_state is not None:
        return cfg.reference_state
    if cfg.instance.size > 24:
        raise ConfigError("instance too large for the oracle; supply reference_state")
    return brute_force_ground_state(cfg.instance).state


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepCell:
    """Aggregated success fractions at one (beta, gamma) grid point."""

    beta: float
    gamma: float
    reps: int
    p_code: float
    p_target_map: float
    p_target_mvd: float
    mean_iters_mvd: float

    def __post_init__(self):
        for p in (self.p_code, self.p_target_map, self.p_target_mvd):
            if not 0 <= p <= 1:
                raise ValueError("fractions must lie in [0, 1]")


class _MapBookkeepingSink:
    """Lowest physical energy among code-state samples."""

    def __init__(self):
        self.best_energy = math.inf
        self.best_spins = None

    def consume(self, rec: mcmc.SampleRecord):
        if rec.energy >= self.best_energy:
            return
        if entries_is_code(rec.spins):
            self.best_energy = rec.energy
            self.best_spins = rec.spins


class _MvdBookkeepingSink:
    """Per-sample decode; lowest logical energy among decoded states."""

    def __init__(self, inst: ProblemInstance, policy: str, n_max: int):
        self.inst = inst
        self.policy = policy
        self.n_max = n_max
        self.best_energy = math.inf
        self.best_logical = None
        self.total_iters = 0
        self.samples = 0

    def consume(self, rec: mcmc.SampleRecord):
        _, Z_star, iters, _, _, _ = dec.iterate_entries(
            rec.spins, self.n_max, self.inst, self.policy
        )
        self.total_iters += iters
        self.samples += 1
        e = logical_energy(Z_star, self.inst)
        if e < self.best_energy:
            self.best_energy = e
            self.best_logical = Z_star

    @property
    def mean_iters(self) -> float:
        return self.total_iters / self.samples if self.samples else math.nan


def _sweep_job(args) -> dict:
    """One (grid cell, repetition) chain; top-level for process pools."""
    (inst_json, beta, gamma, chain_mode, steps, burn_in, seed_key, policy, n_max) = args
    inst = ProblemInstance.from_json(inst_json)
    model = mcmc.PeModel(inst, WeightParameters(beta=beta, gamma=gamma))
    map_sink = _MapBookkeepingSink()
    mvd_sink = _MvdBookkeepingSink(inst, policy, n_max)
    mcmc.run_chain(
        model,
        chain_mode,
        steps,
        list(seed_key),
        sinks=[map_sink, mvd_sink],
        burn_in=burn_in,
    )
    out = {
        "sampled_code": map_sink.best_spins is not None,
        "map_spins": None
        if map_sink.best_spins is None
        else map_sink.best_spins.tolist(),
        "mvd_logical": None
        if mvd_sink.best_logical is None
        else mvd_sink.best_logical.tolist(),
        "mean_iters": mvd_sink.mean_iters,
    }
    return out


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[SweepCell]:
    """Success-fraction landscape over the (beta, gamma) grid."""
    if cfg.instance is None:
        raise ConfigError("sweep requires an instance")
    Z_g = _reference_logical(cfg)
    z_g = encode_pe(Z_g).entries
    Z_g_canon = dec.canonical_logical(Z_g)
    inst_json = cfg.instance.to_json()
    K = cfg.instance.size
    steps = cfg.steps or 100 * K * (K - 1) // 2

    jobs = []
    for ci, (beta, gamma) in enumerate(cfg.grid):
        for rep in range(cfg.repetitions):
            jobs.append(
                (
                    inst_json,
                    beta,
                    gamma,
                    cfg.chain_mode,
                    steps,
                    cfg.burn_in,
                    (cfg.seed, ci, rep),
                    cfg.decoder_policy,
                    cfg.n_max,
                )
            )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    cells = []
    idx = 0
    for beta, gamma in cfg.grid:
        n_code = n_map = n_mvd = 0
        iters = []
        for _ in range(cfg.repetitions):
            r = results[idx]
            idx += 1
            if r["sampled_code"]:
                n_code += 1
                if np.array_equal(np.array(r["map_spins"], dtype=np.int8), z_g):
                    n_map += 1
            if r["mvd_logical"] is not None:
                got = dec.canonical_logical(np.array(r["mvd_logical"]))
                if np.array_equal(got, Z_g_canon):
                    n_mvd += 1
            if not math.isnan(r["mean_iters"]):
                iters.append(r["mean_iters"])
        cells.append(
            SweepCell(
                beta=beta,
                gamma=gamma,
                reps=cfg.repetitions,
                p_code=n_code / cfg.repetitions,
                p_target_map=n_map / cfg.repetitions,
                p_target_mvd=n_mvd / cfg.repetitions,
                mean_iters_mvd=float(np.mean(iters)) if iters else math.nan,
            )
        )
    return cells


def write_sweep_csv(cells, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(
            [
                "beta",
                "gamma",
                "reps",
                "p_code",
                "p_target_map",
                "p_target_mvd",
                "mean_iters_mvd",
            ]
        )
        for c in cells:
            wr.writerow(
                [
                    repr(c.beta),
                    repr(c.gamma),
                    c.reps,
                    repr(c.p_code),
                    repr(c.p_target_map),
                    repr(c.p_target_mvd),
                    repr(c.mean_iters_mvd),
                ]
            )


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

CLASSES = ("red", "gray", "green", "other")


@dataclass
class SpectraResult:
    """Classified sample series at one operating point.

    ``spectra`` maps each spectrum name (phys, local, pen, logical_decoded)
    to a list of bin rows (bin_low, bin_high, count, n_red, n_gray, n_green,
    n_other).  Classes: red = decoded physical state equals the target code
    state; gray = code state decoding to a non-target logical state; green =
    target logical state recovered from a non-code physical estimate;
    other = everything else.
    """

    beta: float
    gamma: float
    spectra: dict
    class_totals: dict
    agreement: np.ndarray
    series: list
    classifications: list
    decoded_logical_energies: list
    mean_iters: float


def _classify(z_star_entries, Z_star, z_g, Z_g_canon):
    got = dec.canonical_logical(Z_star)
    target_logical = np.array_equal(got, Z_g_canon)
    if np.array_equal(z_star_entries, z_g):
        return "red"
    if entries_is_code(z_star_entries):
        return "gray"
    if target_logical:
        return "green"
    return "other"


def _bin_rows(values, classes, edges):
    values = np.asarray(values, dtype=float)
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, len(edges) - 2)
    rows = []
    for b in range(len(edges) - 1):
        in_bin = idx == b
        count = int(in_bin.sum())
        if count == 0:
            continue
        tallies = {c: 0 for c in CLASSES}
        for cls in (classes[i] for i in np.nonzero(in_bin)[0]):
            tallies[cls] += 1
        rows.append(
            (
                float(edges[b]),
                float(edges[b + 1]),
                count,
                tallies["red"],
                tallies["gray"],
                tallies["green"],
                tallies["other"],
            )
        )
    return rows


def _fd_edges(values):
    values = np.asarray(values, dtype=float)
    if np.ptp(values) == 0:
        v = values[0]
        return np.array([v - 0.5, v + 0.5])
    edges = np.histogram_bin_edges(values, bins="fd")
    if len(edges) > 2001:  # degenerate IQR can explode the bin count
        edges = np.histogram_bin_edges(values, bins=2000)
    return edges


def run_spectra(cfg: ExperimentConfig) -> SpectraResult:
    """Record a full series at one (beta, gamma) point and classify it."""
    if cfg.instance is None:
        raise ConfigError("spectra requires an instance")
    if cfg.point is None:
        raise ConfigError("spectra requires a (beta, gamma) point")
    beta, gamma = cfg.point
    inst = cfg.instance
    K = inst.size
    Z_g = _reference_logical(cfg)
    z_g = encode_pe(Z_g).entries
    Z_g_canon = dec.canonical_logical(Z_g)

    model = mcmc.PeModel(inst, WeightParameters(beta=beta, gamma=gamma))
    steps = cfg.steps or 600 * K * (K - 1)
    series = mcmc.SeriesSink()
    mcmc.run_chain(
        model,
        cfg.chain_mode,
        steps,
        [cfg.seed, 0],
        sinks=[series],
        burn_in=cfg.burn_in,
    )

    e_phys, e_local, e_pen, e_logi = [], [], [], []
    classes = []
    total_iters = 0
    agree = np.zeros((K, K))
    for rec in series.records:
        local, pen = model.energy_components(rec.spins)
        e_phys.append(beta * local + gamma * pen)
        e_local.append(local)
        e_pen.append(pen)
        z_star, Z_star, iters, _, _, _ = dec.iterate_entries(
            rec.spins, cfg.n_max, inst, cfg.decoder_policy
        )
        total_iters += iters
        e_logi.append(logical_energy(Z_star, inst))
        classes.append(_classify(z_star, Z_star, z_g, Z_g_canon))
        agree += rec.spins == z_g
    n = len(series.records)
    agree /= n

    # The local-readout and decoded-logical spectra share bin edges so that
    # per-bin class tallies are directly comparable before/after decoding.
    shared_edges = _fd_edges(np.concatenate([e_local, e_logi]))
    pen_edges = np.arange(min(e_pen) - 0.5, max(e_pen) + 1.5)
    spectra = {
        "phys": _bin_rows(e_phys, classes, _fd_edges(np.array(e_phys))),
        "local": _bin_rows(e_local, classes, shared_edges),
        "pen": _bin_rows(e_pen, classes, pen_edges),
        "logical_decoded": _bin_rows(e_logi, classes, shared_edges),
    }
    totals = {c: classes.count(c) for c in CLASSES}
    return SpectraResult(
        beta=beta,
        gamma=gamma,
        spectra=spectra,
        class_totals=totals,
        agreement=agree,
        series=series.records,
        classifications=classes,
        decoded_logical_energies=e_logi,
        mean_iters=total_iters / n,
    )


def write_spectra_csv(result: SpectraResult, out_dir, prefix="spectra"):
    paths = {}
    for name, rows in result.spectra.items():
        path = os.path.join(out_dir, f"{prefix}_{name}.csv")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(
                ["bin_low", "bin_high", "count", "n_red", "n_gray", "n_green", "n_other"]
            )
            for row in rows:
                wr.writerow([repr(row[0]), repr(row[1]), *row[2:]])
        paths[name] = path
    return paths


# ---------------------------------------------------------------------------
# Series storage and replay
# ---------------------------------------------------------------------------

SERIES_MAGIC = "# parityanneal-series"


def _pack_upper(spins: np.ndarray) -> str:
    n = spins.shape[0]
    iu = np.triu_indices(n, k=1)
    bits = (spins[iu] > 0).astype(np.uint8)
    return np.packbits(bits).tobytes().hex()


def _unpack_upper(packed: str, K: int) -> np.ndarray:
    nbits = K * (K - 1) // 2
    raw = np.frombuffer(bytes.fromhex(packed), dtype=np.uint8)
    bits = np.unpackbits(raw)[:nbits]
    m = np.ones((K, K), dtype=np.int8)
    iu = np.triu_indices(K, k=1)
    vals = (2 * bits.astype(np.int8)) - 1
    m[iu] = vals
    m[(iu[1], iu[0])] = vals
    return m


def write_series_csv(result: SpectraResult, inst: ProblemInstance, path):
    """Store the sampled series with per-sample energies and packed states."""
    K = inst.size
    model = mcmc.PeModel(inst, WeightParameters(beta=result.beta, gamma=result.gamma))
    with open(path, "w", newline="") as fh:
        fh.write(f"{SERIES_MAGIC} K={K} layout=original\n")
        wr = csv.writer(fh)
        wr.writerow(
            [
                "sweep_index",
                "energy_phys",
                "energy_local",
                "energy_pen",
                "multiplicity",
                "state_hash",
                "packed_state",
            ]
        )
        for rec in result.series:
            local, pen = model.energy_components(rec.spins)
            packed = _pack_upper(rec.spins)
            digest = hashlib.sha1(bytes.fromhex(packed)).hexdigest()[:12]
            wr.writerow(
                [
                    rec.sweep_index,
                    repr(rec.energy),
                    repr(local),
                    pen,
                    rec.multiplicity,
                    digest,
                    packed,
                ]
            )


def read_series_csv(path):
    """Yield (sweep_index, multiplicity, PhysicalSpinMatrix) from a stored
    series, validating the hash of every row."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith(SERIES_MAGIC):
            raise ValueError(f"{path}:1: not a series file")
        try:
            K = int(dict(kv.split("=") for kv in header.split()[2:])["K"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}:1: malformed series header") from exc
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=3):
            try:
                packed = row["packed_state"]
                digest = hashlib.sha1(bytes.fromhex(packed)).hexdigest()[:12]
                if digest != row["state_hash"]:
                    raise ValueError("state hash mismatch")
                spins = _unpack_upper(packed, K)
                yield (
                    int(row["sweep_index"]),
                    int(row["multiplicity"]),
                    PhysicalSpinMatrix(entries=spins, layout_kind=ORIGINAL),
                )
            except (TypeError, ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: corrupt series row: {exc}") from exc


def decode_series(
    path, policy: str = "auto", n_max: int = 10, inst: ProblemInstance | None = None
):
    """Replay a stored series through the decoder, yielding one DecodeResult
    per sample."""
    for _, _, matrix in read_series_csv(path):
        yield dec.pe_mvd_iterated(matrix, n_max=n_max, inst=inst, policy=policy)

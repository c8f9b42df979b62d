"""Parity-encoded spin-glass annealing and majority-vote decoding toolkit.

Subpackage layout:

- ``ising``: logical Ising energies, instance generation, gauge transforms,
  and a brute-force ground-state oracle.
- ``parity``: all-to-all parity-encoded physical spin matrices, plaquette
  and weight-three syndromes, penalty and physical energies.
- ``qac``: replica-matrix encoding with penalty stabilizers (classical
  annealing-correction model).
- ``mcmc``: standard, rejection-discarded, and rejection-free Metropolis
  chains with multiplicity bookkeeping.
- ``decoder``: majority functions, orthogonal-estimator construction,
  repetition/replica/parity decoders, and the iterated matrix decoder.
- ``harness``: experiment drivers behind the command-line interface.
"""

from parityanneal.ising import (
    GroundStateCertificate,
    ProblemInstance,
    brute_force_ground_state,
    gauge_transform,
    generate_instance,
    logical_energy,
)
from parityanneal.parity import (
    PhysicalSpinMatrix,
    SyndromePattern,
    WeightParameters,
    encode_pe,
    error_pattern,
    is_code_state,
    penalty_energy,
    physical_energy,
    plaquette_syndromes,
    weight3_syndromes,
)

__all__ = [
    "GroundStateCertificate",
    "ProblemInstance",
    "brute_force_ground_state",
    "gauge_transform",
    "generate_instance",
    "logical_energy",
    "PhysicalSpinMatrix",
    "SyndromePattern",
    "WeightParameters",
    "encode_pe",
    "error_pattern",
    "is_code_state",
    "penalty_energy",
    "physical_energy",
    "plaquette_syndromes",
    "weight3_syndromes",
]

__version__ = "0.1.0"

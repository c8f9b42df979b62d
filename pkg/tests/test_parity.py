"""Tests for parity encoding, syndromes, and physical energies."""

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parityanneal.ising import all_states, generate_instance
from parityanneal.parity import (
    EXTENDED,
    ORIGINAL,
    PhysicalSpinMatrix,
    SyndromePattern,
    WeightParameters,
    encode_pe,
    entries_is_code,
    entries_penalty,
    error_pattern,
    is_code_state,
    penalty_energy,
    physical_energy,
    plaquette_syndromes,
    triangle_syndrome_product,
    weight3_syndromes,
)

spin_vectors = lambda n: st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)


def random_matrix(K, rng, layout=ORIGINAL):
    n = K if layout == ORIGINAL else K + 1
    m = np.ones((n, n), dtype=np.int8)
    iu = np.triu_indices(n, k=1)
    vals = rng.choice([-1, 1], size=len(iu[0]))
    m[iu] = vals
    m[(iu[1], iu[0])] = vals
    return PhysicalSpinMatrix(entries=m, layout_kind=layout)


def flip_entry(z, i, j):
    m = np.array(z.entries)
    a, b = (i - 1, j - 1) if z.layout_kind == ORIGINAL else (i, j)
    m[a, b] *= -1
    m[b, a] *= -1
    return PhysicalSpinMatrix(entries=m, layout_kind=z.layout_kind)


def test_weight_parameter_validation():
    WeightParameters(beta=1.0, gamma=0.0)
    with pytest.raises(ValueError):
        WeightParameters(beta=0.0, gamma=1.0)
    with pytest.raises(ValueError):
        WeightParameters(beta=1.0, gamma=-0.1)


def test_matrix_validation():
    good = np.array([[1, -1, 1], [-1, 1, -1], [1, -1, 1]])
    PhysicalSpinMatrix(entries=good)
    bad_sym = np.array(good)
    bad_sym[0, 1] = 1
    with pytest.raises(ValueError):
        PhysicalSpinMatrix(entries=bad_sym)
    bad_diag = np.array(good)
    bad_diag[1, 1] = -1
    with pytest.raises(ValueError):
        PhysicalSpinMatrix(entries=bad_diag)
    with pytest.raises(ValueError):
        PhysicalSpinMatrix(entries=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PhysicalSpinMatrix(entries=good, layout_kind="diagonal")


def test_encode_identity_and_forced_products():
    z = encode_pe([1, 1, 1])
    assert np.all(z.entries == 1)
    z = encode_pe([1, -1, 1])
    assert z.label(1, 2) == -1
    assert z.label(1, 3) == 1
    assert z.label(2, 3) == -1
    assert all(z.label(i, i) == 1 for i in (1, 2, 3))
    with pytest.raises(ValueError):
        encode_pe([1, -1])


def test_encoded_states_are_code_states():
    for K in (3, 4, 7):
        for Z in all_states(K):
            assert is_code_state(encode_pe(Z))


def test_extended_row_zero_carries_logical_spins():
    Z = np.array([1, -1, -1, 1])
    z = encode_pe(Z, layout=EXTENDED)
    assert z.logical_size == 4
    assert np.array_equal(z.entries[0, 1:], Z)
    assert weight3_syndromes(z).all_satisfied()
    assert is_code_state(z)


def test_weight3_rejects_original_layout():
    with pytest.raises(ValueError):
        weight3_syndromes(encode_pe([1, 1, 1]))


def test_plaquette_index_range():
    K = 6
    pat = plaquette_syndromes(encode_pe(np.ones(K)))
    expected = {(i, j) for i in range(1, K - 1) for j in range(i + 1, K)}
    assert set(pat.values) == expected
    assert len(pat.values) == (K - 1) * (K - 2) // 2


def test_plaquette_direct_evaluation_oracle():
    # syndromes recomputed by hand from the four matrix entries
    rng = np.random.default_rng(7)
    for _ in range(20):
        z = random_matrix(6, rng)
        L = z.labelled()
        pat = plaquette_syndromes(z)
        for (i, j), s in pat.values.items():
            assert s == L[i, j] * L[i, j + 1] * L[i + 1, j] * L[i + 1, j + 1]
        assert penalty_energy(z) == pat.violation_count()
        assert entries_penalty(z.entries) == pat.violation_count()
        assert entries_is_code(z.entries) == pat.all_satisfied()


def test_code_space_size_exhaustive():
    # distinct code matrices number 2^{K-1}: Z and -Z encode identically
    for K in (3, 4, 5):
        iu = np.triu_indices(K, k=1)
        satisfied = 0
        for bits in itertools.product([-1, 1], repeat=len(iu[0])):
            m = np.ones((K, K), dtype=np.int8)
            m[iu] = bits
            m[(iu[1], iu[0])] = bits
            if entries_is_code(m):
                satisfied += 1
        assert satisfied == 2 ** (K - 1)


def test_single_flip_violation_counts():
    # flipping one entry violates exactly the plaquettes that contain it,
    # independently enumerated from the plaquette corner structure
    K = 6
    z0 = encode_pe(np.ones(K))
    for i in range(1, K + 1):
        for j in range(i + 1, K + 1):
            z = flip_entry(z0, i, j)
            touching = 0
            for a in range(1, K - 1):
                for b in range(a + 1, K):
                    corners = {(a, b), (a, b + 1), (a + 1, b), (a + 1, b + 1)}
                    corners |= {(y, x) for x, y in corners}
                    if (i, j) in corners:
                        touching += 1
            assert penalty_energy(z) == touching
            assert 1 <= touching <= 4


def test_syndrome_pattern_validation():
    SyndromePattern(values={(1, 2): 1, (1, 3): -1})
    with pytest.raises(ValueError):
        SyndromePattern(values={(2, 1): 1})
    with pytest.raises(ValueError):
        SyndromePattern(values={(1, 2): 0})


def test_physical_energy_code_state_matches_logical_coupling_sum():
    inst = generate_instance(5, seed=3, half_width=1.0)
    w = WeightParameters(beta=2.0, gamma=7.0)
    for Z in all_states(5):
        z = encode_pe(Z)
        iu = np.triu_indices(5, k=1)
        direct = 2.0 * float((inst.couplings[iu] * np.outer(Z, Z)[iu]).sum())
        assert physical_energy(z, inst, w) == pytest.approx(direct)


def test_physical_energy_counts_penalty():
    inst = generate_instance(5, seed=3, half_width=1.0)
    w = WeightParameters(beta=1.0, gamma=10.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        z = random_matrix(5, rng)
        iu = np.triu_indices(5, k=1)
        local = float((inst.couplings[iu] * z.entries[iu]).sum())
        assert physical_energy(z, inst, w) == pytest.approx(
            local + 10.0 * penalty_energy(z)
        )


def test_physical_energy_rejects_fields_on_original_layout():
    from parityanneal.ising import ProblemInstance

    inst = ProblemInstance(
        size=4, couplings=np.zeros((4, 4)), fields=np.array([1.0, 0, 0, 0])
    )
    with pytest.raises(ValueError):
        physical_energy(encode_pe(np.ones(4)), inst, WeightParameters(1.0, 1.0))


def test_extended_energy_includes_fields():
    from parityanneal.ising import ProblemInstance

    J = np.zeros((3, 3))
    h = np.array([2.0, 1.0, 0.0])
    inst = ProblemInstance(size=3, couplings=J, fields=h)
    Z = np.array([-1, -1, 1])
    z = encode_pe(Z, layout=EXTENDED)
    w = WeightParameters(beta=1.0, gamma=5.0)
    assert physical_energy(z, inst, w) == pytest.approx(float(h @ Z))


def test_error_pattern_marks_disagreements():
    z0 = encode_pe([1, -1, 1, 1])
    z1 = flip_entry(z0, 1, 3)
    e = error_pattern(z1, z0)
    assert e.label(1, 3) == -1
    assert sum(1 for i in range(1, 5) for j in range(i + 1, 5) if e.label(i, j) == -1) == 1


def test_triangle_product_telescopes():
    # block product of weight-4 checks collapses to the triangle z_ij z_jk z_ik
    rng = np.random.default_rng(12)
    for _ in range(30):
        z = random_matrix(7, rng)
        L = z.labelled()
        for i, j, k in itertools.combinations(range(1, 8), 3):
            assert triangle_syndrome_product(z, i, j, k) == L[i, j] * L[j, k] * L[i, k]


def test_triangle_product_label_validation():
    z = encode_pe(np.ones(5))
    with pytest.raises(ValueError):
        triangle_syndrome_product(z, 2, 2, 4)
    with pytest.raises(ValueError):
        triangle_syndrome_product(z, 1, 3, 6)


@settings(max_examples=40)
@given(spin_vectors(5))
def test_encode_is_global_flip_invariant(zs):
    Z = np.array(zs)
    assert np.array_equal(encode_pe(Z).entries, encode_pe(-Z).entries)


def test_json_round_trip_both_layouts():
    rng = np.random.default_rng(5)
    for layout in (ORIGINAL, EXTENDED):
        z = random_matrix(6, rng, layout)
        back = PhysicalSpinMatrix.from_json(z.to_json())
        assert back.layout_kind == layout
        assert np.array_equal(back.entries, z.entries)
    doc = json.loads(encode_pe(np.ones(4)).to_json())
    doc["upper"] = doc["upper"][:-1]
    with pytest.raises(ValueError):
        PhysicalSpinMatrix.from_json(json.dumps(doc))


def test_syndrome_json_shape():
    pat = plaquette_syndromes(encode_pe([1, -1, 1, 1]))
    doc = json.loads(pat.to_json())
    assert set(doc) == {"plaquettes"}
    assert all(set(item) == {"i", "j", "s"} for item in doc["plaquettes"])

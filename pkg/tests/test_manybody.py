"""Two-particle sector: basis bookkeeping, generator assembly, evolution
back-ends, correlators and the interaction scans."""

import numpy as np
import pytest
from scipy.linalg import expm

import chainoptics.manybody as manybody
from chainoptics.lattice import CouplingScheme, PotentialProfile, build_chain
from chainoptics.manybody import (
    Statistics,
    TwoBodyState,
    pair_basis,
    pair_index,
    build_generator,
    initial_pair_state,
    hom_initial_state,
    evolve_two_body,
    correlation_map,
    distinguishable_reference,
    bunching_signature,
    hom_run,
    bunching_scan,
    weak_interaction_scan,
    three_body_probe,
)

SQ2 = np.sqrt(2.0)


def _splitter(L, beta):
    return build_chain(L, CouplingScheme.uniform(),
                       (PotentialProfile.center_impurity(beta),))


# ---- basis bookkeeping ----

def test_pair_basis_sizes_and_order():
    bosonic = pair_basis(5, False)
    exclusive = pair_basis(5, True)
    assert len(bosonic) == 15 and len(exclusive) == 10
    assert bosonic[0] == (0, 0) and bosonic[1] == (0, 1)
    assert exclusive[0] == (0, 1)
    assert list(bosonic) == sorted(bosonic)
    assert list(exclusive) == sorted(exclusive)
    for flag in (False, True):
        idx = pair_index(5, flag)
        for s, i in idx.items():
            assert pair_basis(5, flag)[i] == s


def test_statistics_validation():
    assert Statistics.boson(1.5).U == 1.5
    assert not Statistics.boson().exclusive
    assert Statistics.fermion().exclusive and Statistics.hardcore().exclusive
    with pytest.raises(ValueError):
        Statistics("anyon")
    with pytest.raises(ValueError):
        Statistics("fermion", U=0.5)
    with pytest.raises(ValueError):
        Statistics.boson(-0.1)


# ---- generator against a hand-built matrix ----

def test_boson_generator_small_chain_oracle():
    chain = build_chain(3, CouplingScheme.uniform(), ())
    U = 0.8
    K = build_generator(chain, Statistics.boson(U)).toarray()
    # basis order: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2); hops carry -1/2
    # with the bosonic sqrt(2) in and out of doubly occupied pairs
    h = -0.5
    expected = np.array([
        [U,      h * SQ2, 0.0,     0.0,     0.0,     0.0],
        [h * SQ2, 0.0,    h,       h * SQ2, 0.0,     0.0],
        [0.0,    h,       0.0,     0.0,     h,       0.0],
        [0.0,    h * SQ2, 0.0,     U,       h * SQ2, 0.0],
        [0.0,    0.0,     h,       h * SQ2, 0.0,     h * SQ2],
        [0.0,    0.0,     0.0,     0.0,     h * SQ2, U],
    ])
    assert np.max(np.abs(K - expected)) < 1e-15


def test_exclusive_generator_has_no_double_occupancy():
    chain = _splitter(5, 0.9)
    K = build_generator(chain, Statistics.fermion()).toarray()
    assert K.shape == (10, 10)
    assert np.max(np.abs(K - K.T)) == 0.0


# ---- evolution back-ends ----

def test_dense_evolution_matches_matrix_exponential():
    chain = _splitter(7, 0.9)
    stats = Statistics.boson(0.5)
    K = build_generator(chain, stats)
    a0 = hom_initial_state(chain, stats)
    out = evolve_two_body(K, a0, 3.7)
    direct = expm(-1j * K.toarray() * 3.7) @ a0.amplitudes
    assert np.max(np.abs(out.amplitudes - direct)) < 1e-10
    assert out.time == 3.7


def test_ode_evolution_matches_dense(monkeypatch):
    chain = _splitter(11, 0.9)
    stats = Statistics.boson(1.0)
    K = build_generator(chain, stats)
    a0 = hom_initial_state(chain, stats)
    dense = evolve_two_body(K, a0, 6.0)
    monkeypatch.setattr(manybody, "_DENSE_LIMIT", 1)
    ode = evolve_two_body(K, a0, 6.0)
    assert np.max(np.abs(ode.amplitudes - dense.amplitudes)) < 1e-8


def test_evolution_validation():
    chain = _splitter(5, 0.9)
    stats = Statistics.boson()
    K = build_generator(chain, stats)
    other = initial_pair_state(_splitter(7, 0.9), (1, 7), stats)
    with pytest.raises(ValueError):
        evolve_two_body(K, other, 1.0)
    a0 = hom_initial_state(chain, stats)
    assert evolve_two_body(K, a0, 0.0) is a0


# ---- state container ----

def test_state_validation_and_fermionic_sign():
    with pytest.raises(ValueError):
        TwoBodyState(L=5, stats=Statistics.boson(),
                     amplitudes=np.zeros(7, dtype=complex))
    bad = np.zeros(15, dtype=complex)
    bad[0] = 0.5
    with pytest.raises(ValueError):
        TwoBodyState(L=5, stats=Statistics.boson(), amplitudes=bad)

    f = initial_pair_state(_splitter(5, 0.9), (2, 4), Statistics.fermion())
    assert f.amplitude(2, 4) == 1.0 + 0.0j
    assert f.amplitude(4, 2) == -1.0 + 0.0j
    assert f.amplitude(1, 3) == 0.0 + 0.0j
    assert f.amplitude(2, 2) == 0.0 + 0.0j
    h = initial_pair_state(_splitter(5, 0.9), (2, 4), Statistics.hardcore())
    assert h.amplitude(4, 2) == h.amplitude(2, 4) == 1.0 + 0.0j


def test_initial_pair_state_validation():
    chain = _splitter(5, 0.9)
    with pytest.raises(ValueError):
        initial_pair_state(chain, (0, 3), Statistics.boson())
    with pytest.raises(ValueError):
        initial_pair_state(chain, (1, 6), Statistics.boson())
    with pytest.raises(ValueError):
        initial_pair_state(chain, (3, 3), Statistics.fermion())
    assert initial_pair_state(chain, (3, 3), Statistics.boson()) is not None


# ---- correlators ----

@pytest.mark.parametrize("stats", [Statistics.boson(0.0), Statistics.boson(2.0),
                                   Statistics.fermion(), Statistics.hardcore()])
def test_correlator_sum_rules(stats):
    chain = _splitter(9, 0.9)
    K = build_generator(chain, stats)
    state = evolve_two_body(K, hom_initial_state(chain, stats), 7.0)
    cmap = correlation_map(state)
    assert abs(cmap.P.sum() - 2.0) < 1e-10
    assert abs(cmap.marginals.sum() - 2.0) < 1e-10
    assert abs(cmap.C.sum() + 2.0) < 1e-10
    assert np.max(np.abs(cmap.P - cmap.P.T)) == 0.0
    assert np.all(cmap.P >= 0.0)


def test_hardcore_matches_fermion_moduli():
    chain = _splitter(7, 0.9)
    for t in (2.0, 5.5, 9.0):
        maps = {}
        for stats in (Statistics.fermion(), Statistics.hardcore()):
            K = build_generator(chain, stats)
            state = evolve_two_body(K, hom_initial_state(chain, stats), t)
            maps[stats.kind] = correlation_map(state).P
        assert np.max(np.abs(maps["fermion"] - maps["hardcore"])) < 1e-12


def test_distinguishable_reference_baseline():
    chain = _splitter(11, 0.9)
    ref = distinguishable_reference(chain, 12.0)
    assert abs(ref.P.sum() - 2.0) < 1e-10
    assert np.max(np.abs(ref.P - ref.P.T)) < 1e-15
    assert bunching_signature(ref, ref) == pytest.approx(1.0, abs=1e-15)


def test_side_masses_exclude_center():
    chain = _splitter(5, 0.9)
    state = initial_pair_state(chain, (3, 3), Statistics.boson())
    cmap = correlation_map(state)
    same, cross = cmap.side_masses()
    assert same == 0.0 and cross == 0.0


# ---- two-port interference ----

def test_hom_dip_for_bosons_and_antidip_for_fermions():
    boson = hom_run(11, Statistics.boson(0.0))
    assert boson.P_1L < 1e-2
    assert boson.P_11 > 0.1 and boson.P_LL > 0.1
    assert boson.P_11 == pytest.approx(boson.P_LL, abs=1e-9)
    fermion = hom_run(11, Statistics.fermion(),
                      beta=boson.beta, t=boson.t_star)
    assert fermion.P_11 == 0.0 and fermion.P_LL == 0.0
    assert fermion.P_1L > 0.2


# ---- interaction scans ----

def test_weak_interaction_pin():
    table = weak_interaction_scan([21], (0.0, 0.06))
    assert table.L_values == (21,)
    assert table.variation[0, 0] < 1e-12
    assert abs(table.variation[0, 1] - 0.0364) < 3e-3
    assert table.threshold_u == (0.06,)
    with pytest.raises(ValueError):
        weak_interaction_scan([11], (0.0, 1.5))


def test_bunching_scan_small_chain():
    scan = bunching_scan(11, u_grid=(0.0, 0.5, 1.0, 3.0, 4.0, 5.0, 8.0))
    assert scan.P_normalized[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(scan.P_LL > 0.0)
    assert np.all(np.diff(scan.u) > 0.0)
    assert scan.u_critical > 0.0
    # strong interactions suppress the doubly occupied output
    assert scan.P_normalized[-1] < 0.5


def test_bunching_scan_validation():
    with pytest.raises(ValueError):
        bunching_scan(10)
    with pytest.raises(ValueError):
        bunching_scan(11, u_grid=(0.0, -1.0))
    with pytest.raises(ValueError):
        bunching_scan(11, u_grid=(0.0, 3.0, 4.0, 5.0))


# ---- three-particle probe ----

def test_three_body_probe_weak_contamination():
    vals = [three_body_probe(11, 0.05, m) for m in (4, 6, 8)]
    for v in vals:
        assert 0.0 < v < 1.0
    spread = (max(vals) - min(vals)) / np.mean(vals)
    # the short chain leaves some start-site dependence; longer chains
    # flatten it further
    assert spread < 0.2
    assert three_body_probe(11, 0.05, 4) == vals[0]


def test_three_body_probe_validation():
    with pytest.raises(ValueError):
        three_body_probe(37, 0.1, 5)
    with pytest.raises(ValueError):
        three_body_probe(11, 0.1, 1)
    with pytest.raises(ValueError):
        three_body_probe(11, 0.1, 11)
    with pytest.raises(ValueError):
        three_body_probe(11, -0.1, 5)

import numpy as np
import pytest

from qfact import dbb, finprob, hilbert
from qfact.errors import DestroyedSpecimenError, GuidedCodingUnavailableError
from qfact.genesis import (
    Composed,
    Evolved,
    MultiSystem,
    Simple,
    generate,
    mes_coding_guided,
    mes_coding_nc,
    mes_complete,
    resolve_state,
    run_complete_successions,
    run_successions,
    time_of_flight,
)
from qfact.hilbert import OracleState, born_law, compose_superposition, random_observable, random_state


def two_wave_fixture():
    return dbb.TwoWaveState.from_corpuscle_speed(
        v12=1.0e6, theta0=0.1, delta_phase=0.25, m0=9.109e-31)


# --- generate ---------------------------------------------------------------

def test_generate_simple_reproduces_state(rng):
    psi = random_state(3, rng)
    s = generate(Simple("G", state=psi), rng)
    assert s.alive
    assert s.hidden_state is psi


def test_evolved_zero_dt_same_law(rng):
    psi = random_state(3, rng)
    h = hilbert.HamiltonianSpec(np.diag([1.0, 2.0, 3.0]).astype(complex))
    g0 = Simple("G", state=psi)
    g = Evolved("Gt", base=g0, hamiltonian=h, dt=0.0)
    obs = random_observable("A", 3, rng)
    assert born_law(resolve_state(g), obs) == \
        pytest.approx(born_law(psi, obs), abs=1e-12)


def test_composed_matches_superposition(rng):
    psi1, psi2 = random_state(4, rng), random_state(4, rng)
    w = (0.8 + 0j, 0.6j)
    g = Composed("Gc", weights=w,
                 components=(Simple("G1", state=psi1), Simple("G2", state=psi2)))
    expected = compose_superposition(list(w), [psi1, psi2])
    assert resolve_state(g).amplitudes == \
        pytest.approx(expected.amplitudes, abs=1e-12)


# --- non-composed coding measurement ----------------------------------------

def test_eigenstate_specimen_codes_its_eigenvalue(rng):
    obs = random_observable("A", 3, rng)
    psi = OracleState(obs.eigenbasis[:, 1])
    for k in range(10):
        s = generate(Simple("G", state=psi), rng)
        out = mes_coding_nc(s, obs, np.random.default_rng(k))
        assert out.eigen_index == 1
        assert out.eigenvalue == obs.eigenvalues[1]
        assert out.region_index == out.eigen_index
        assert out.label == "A:1"


def test_specimen_destroyed_after_measurement(rng):
    psi = random_state(2, rng)
    obs = random_observable("A", 2, rng)
    s = generate(Simple("G", state=psi), rng)
    mes_coding_nc(s, obs, rng)
    assert not s.alive
    with pytest.raises(DestroyedSpecimenError):
        mes_coding_nc(s, obs, rng)


def test_succession_frequencies_match_born_law(rng):
    psi = random_state(3, rng)
    obs = random_observable("A", 3, rng)
    n = 100_000
    law = run_successions(Simple("G", state=psi), obs, n,
                          0.02, 0.05, 10_000, 314)
    pi = born_law(psi, obs)
    freq = finprob.frequency_vector(law)
    sigma = np.sqrt(pi * (1 - pi) / n)
    assert np.all(np.abs(freq - pi) <= 3 * sigma)
    assert finprob.check_convergence(law).stable


# --- guided coding ----------------------------------------------------------

def test_guided_coding_two_wave_momentum():
    wave = two_wave_fixture()
    expected = dbb.guided_momentum(wave)
    for k in range(5):
        s = generate(Simple("G", state=random_state(2, np.random.default_rng(k)),
                            attachment=wave), np.random.default_rng(k))
        r, p = mes_coding_guided(s, t=0.0)
        assert p == pytest.approx(expected, abs=0.0)
        assert not s.alive


def test_guided_coding_plane_wave_exact_hbar_k():
    hbar = 1.0
    k_vec = np.array([1.5, -0.5, 2.0])
    wave = dbb.PlaneWaveSum(components=((1.0 + 0j, tuple(k_vec * hbar)),),
                            box=2 * np.pi, hbar=hbar)
    s = generate(Simple("G", state=random_state(2, np.random.default_rng(0)),
                        attachment=wave), np.random.default_rng(1))
    _, p = mes_coding_guided(s, t=0.0)
    assert p == pytest.approx(hbar * k_vec, abs=1e-12)


def test_guided_ensemble_momentum_sharp_position_dispersed():
    wave = two_wave_fixture()
    gen = np.random.default_rng(7)
    momenta, positions = [], []
    for _ in range(10_000):
        s = generate(Simple("G", state=OracleState(np.array([1.0, 0.0])),
                            attachment=wave), gen)
        r, p = mes_coding_guided(s, t=0.0)
        momenta.append(p[0])
        positions.append(r[2])
    momenta, positions = np.array(momenta), np.array(positions)
    assert np.var(momenta - momenta[0]) == 0.0
    assert np.var(positions) > 0.0
    hbar = wave.hbar
    assert np.std(momenta - momenta[0]) * np.std(positions) < hbar / 2


def test_guided_coding_needs_attachment(rng):
    s = generate(Simple("G", state=random_state(2, rng)), rng)
    with pytest.raises(GuidedCodingUnavailableError):
        mes_coding_guided(s, t=0.0)


# --- time of flight ---------------------------------------------------------

def test_time_of_flight_arithmetic():
    p = time_of_flight(np.array([1.0, 0.0, 0.0]), t_n=2.0, t0=0.0, m=2.0)
    assert p == pytest.approx([1.0, 0.0, 0.0])


def test_time_of_flight_zero_displacement():
    p = time_of_flight(np.zeros(3), t_n=1.0, t0=0.0, m=3.0)
    assert p == pytest.approx([0.0, 0.0, 0.0])


def test_time_of_flight_magnitude_matches_componentwise_formula(rng):
    for _ in range(20):
        d = rng.normal(size=3)
        dt = float(rng.uniform(0.1, 5.0))
        m = float(rng.uniform(0.1, 10.0))
        p = time_of_flight(d, t_n=dt, t0=0.0, m=m)
        magnitude = m * (d[0] ** 2 + d[1] ** 2 + d[2] ** 2) ** 0.5 / dt
        assert np.linalg.norm(p) == pytest.approx(magnitude, abs=1e-12)


def test_time_of_flight_rejects_bad_inputs():
    with pytest.raises(ValueError):
        time_of_flight(np.zeros(3), t_n=0.0, t0=0.0, m=1.0)
    with pytest.raises(ValueError):
        time_of_flight(np.zeros(3), t_n=1.0, t0=0.0, m=0.0)


# --- run_successions --------------------------------------------------------

def test_run_successions_eigenstate_delta_law(rng):
    obs = random_observable("A", 3, rng)
    psi = OracleState(obs.eigenbasis[:, 0])
    law = run_successions(Simple("G", state=psi), obs, 100, 0.02, 0.05, 10, 5)
    assert finprob.frequencies(law) == {"A:0": 1.0, "A:1": 0.0, "A:2": 0.0}


def test_run_successions_fair_two_outcome_stable():
    psi = OracleState(np.array([1, 1]) / np.sqrt(2))
    obs = hilbert.basis_observable("X", 2)
    law = run_successions(Simple("G", state=psi), obs, 1_000_000,
                          0.02, 0.05, 10_000, 42)
    assert finprob.check_convergence(law).stable


def test_run_successions_rejects_zero_trials(rng):
    obs = random_observable("A", 2, rng)
    with pytest.raises(ValueError):
        run_successions(Simple("G", state=random_state(2, rng)), obs, 0,
                        0.02, 0.05, 10, 1)


def test_run_successions_partition_independent():
    # counter-based streams: any split of the trial range merges identically
    psi = OracleState(np.array([0.6, 0.8]))
    obs = hilbert.basis_observable("X", 2)
    whole = run_successions(Simple("G", state=psi), obs, 5_000,
                            0.02, 0.05, 1_000, 99)
    parts = [run_successions(Simple("G", state=psi), obs, size,
                             0.02, 0.05, 1_000, 99, trial_offset=off)
             for off, size in ((0, 1_500), (1_500, 2_000), (3_500, 1_500))]
    merged = finprob.merge(finprob.merge(parts[0], parts[1]), parts[2])
    assert merged.counts == whole.counts


# --- multi-system complete measurements --------------------------------------

def joint_marginal_oracle(joint_amps, dims, factor, bases):
    """Brute-force marginal law: loop every joint index tuple."""
    law = np.zeros(dims[factor])
    basis = bases[0]
    for b in bases[1:]:
        basis = np.kron(basis, b)
    joint_law = np.abs(basis.conj().T @ joint_amps) ** 2
    for flat, prob in enumerate(joint_law):
        idx = np.unravel_index(flat, dims)
        law[idx[factor]] += prob
    return law


def test_complete_measurement_one_group_per_factor(rng):
    joint = random_state(4, rng)
    g = MultiSystem("G2", joint_state=joint, factor_dims=(2, 2),
                    factor_labels=("S1", "S2"))
    obs = [random_observable("A1", 2, rng), random_observable("A2", 2, rng)]
    s = generate(g, rng)
    outcomes = mes_complete(s, obs, rng)
    assert len(outcomes) == 2
    assert [o.observable for o in outcomes] == ["A1", "A2"]
    assert not s.alive
    with pytest.raises(DestroyedSpecimenError):
        mes_complete(s, obs, rng)


def test_multisystem_marginals_match_partial_trace_oracle(rng):
    joint = random_state(6, rng)
    g = MultiSystem("G23", joint_state=joint, factor_dims=(2, 3),
                    factor_labels=("S1", "S2"))
    obs = [random_observable("A1", 2, rng), random_observable("A2", 3, rng)]
    n = 200_000
    _, marginals = run_complete_successions(g, obs, n, 0.02, 0.05, 10_000, 17)
    for factor in range(2):
        oracle = joint_marginal_oracle(joint.amplitudes, (2, 3), factor,
                                       [o.eigenbasis for o in obs])
        freq = finprob.frequency_vector(marginals[factor])
        sigma = np.sqrt(oracle * (1 - oracle) / n)
        assert np.all(np.abs(freq - oracle) <= 3 * sigma)


def test_multisystem_joint_equals_factor_outcomes(rng):
    joint = random_state(4, rng)
    g = MultiSystem("G22", joint_state=joint, factor_dims=(2, 2),
                    factor_labels=("S1", "S2"))
    obs = [hilbert.basis_observable("A1", 2), hilbert.basis_observable("A2", 2)]
    joint_law, marginals = run_complete_successions(g, obs, 10_000,
                                                    0.02, 0.05, 1_000, 23)
    jf = finprob.frequency_vector(joint_law)
    # marginal of the joint equals each factor law exactly (same stream)
    assert marginals[0].counts["A1:0"] == \
        joint_law.counts["A1*A2:0"] + joint_law.counts["A1*A2:1"]
    assert marginals[1].counts["A2:0"] == \
        joint_law.counts["A1*A2:0"] + joint_law.counts["A1*A2:2"]
    assert abs(jf.sum() - 1.0) < 1e-12

import numpy as np
import pytest

from qfact import finprob, hilbert, reconstruct
from qfact.errors import InconsistentLawsError, UnlinkedObservableError
from qfact.hilbert import OracleState, basis_observable, born_law, random_observable, random_state, transform_between
from qfact.reconstruct import (
    RetrievalConfig,
    StateReconstructor,
    _descend,
    _residual_and_grad,
    amplitudes_from_law,
    assemble_equivalent,
    predict_heldout,
    retrieve_phases,
)
from qfact.seeding import trial_generator


def oracle_setup(dim, seed, n_partners=2, heldout=True):
    rng = np.random.default_rng(seed)
    psi = random_state(dim, rng)
    ref = basis_observable("A", dim)
    partners = [random_observable(f"B{i}", dim, rng) for i in range(n_partners)]
    extra = random_observable("D", dim, rng) if heldout else None
    laws = {"A": born_law(psi, ref)}
    taus = {}
    for obs in partners:
        laws[obs.name] = born_law(psi, obs)
        taus[obs.name] = transform_between(ref, obs)
    return psi, ref, partners, extra, laws, taus


# --- amplitudes -------------------------------------------------------------

def test_amplitudes_delta_law():
    assert amplitudes_from_law(np.array([1.0, 0.0, 0.0])) == \
        pytest.approx([1.0, 0.0, 0.0])


def test_amplitudes_arithmetic():
    assert amplitudes_from_law(np.array([0.25, 0.75])) == \
        pytest.approx([0.5, np.sqrt(0.75)])


def test_amplitudes_from_counted_law():
    law = finprob.FactualLaw.from_block_counts(
        ("A:0", "A:1"), [{"A:0": 1, "A:1": 3}], block_size_n0=4)
    amp = amplitudes_from_law(law)
    assert amp == pytest.approx([0.5, np.sqrt(0.75)])
    assert np.sum(amp ** 2) == pytest.approx(1.0, abs=1e-12)


# --- phase retrieval --------------------------------------------------------

def test_dim2_complex_state_recovered_to_high_fidelity():
    psi = OracleState(np.array([1.0, 1.0j]) / np.sqrt(2))
    ref = basis_observable("A", 2)
    rng = np.random.default_rng(55)
    partners = [random_observable("B1", 2, rng), random_observable("B2", 2, rng)]
    laws = {o.name: born_law(psi, o) for o in partners}
    taus = {o.name: transform_between(ref, o) for o in partners}
    phases, report = retrieve_phases(born_law(psi, ref), laws, taus)
    recovered = np.sqrt(born_law(psi, ref)) * np.exp(1j * phases)
    truth = hilbert.coefficients(psi, ref)
    fidelity = abs(np.vdot(truth, recovered))
    assert fidelity >= 1 - 1e-6
    assert report.converged and report.ambiguity_flag == "unique"


def test_real_positive_state_zero_phases(rng):
    psi = OracleState(np.array([0.6, 0.8]))
    ref = basis_observable("A", 2)
    b = random_observable("B", 2, rng)
    phases, report = retrieve_phases(
        born_law(psi, ref), {"B": born_law(psi, b)},
        {"B": transform_between(ref, b)})
    assert phases == pytest.approx([0.0, 0.0], abs=1e-7)
    assert report.residual < 1e-15


def test_inconsistent_laws_rejected():
    tau = hilbert.TransformMatrix("A", "B", np.eye(2))
    with pytest.raises(InconsistentLawsError):
        retrieve_phases(np.array([1.0, 0.0]), {"B": np.array([0.5, 0.5])},
                        {"B": tau})


def test_gauge_invariance_of_residual(rng):
    psi = random_state(3, rng)
    ref = basis_observable("A", 3)
    b = random_observable("B", 3, rng)
    amp = np.sqrt(born_law(psi, ref))
    partners = [(transform_between(ref, b).entries, born_law(psi, b))]
    alpha = rng.uniform(-np.pi, np.pi, size=(1, 3))
    r0, _ = _residual_and_grad(alpha, amp, partners)
    for offset in (0.3, -1.2, 2.9):
        r_shift, _ = _residual_and_grad(alpha + offset, amp, partners)
        assert r_shift == pytest.approx(r0, rel=1e-9)


def test_reported_solution_is_gauged():
    psi = OracleState(np.array([1.0, 1.0j]) / np.sqrt(2))
    ref = basis_observable("A", 2)
    rng = np.random.default_rng(3)
    b = random_observable("B", 2, rng)
    phases, _ = retrieve_phases(born_law(psi, ref), {"B": born_law(psi, b)},
                                {"B": transform_between(ref, b)})
    assert phases[0] == 0.0


def test_descent_is_monotone(rng):
    # value after k+1 iterations never exceeds value after k iterations
    psi = random_state(4, rng)
    ref = basis_observable("A", 4)
    b = random_observable("B", 4, rng)
    c = random_observable("C", 4, rng)
    amp = np.sqrt(born_law(psi, ref))
    partners = [(transform_between(ref, b).entries, born_law(psi, b)),
                (transform_between(ref, c).entries, born_law(psi, c))]
    start = np.random.default_rng(0).uniform(-np.pi, np.pi, size=(4, 4))
    start[:, 0] = 0.0
    prev = _residual_and_grad(start, amp, partners)[0]
    for iters in range(1, 40):
        _, value = _descend(start.copy(), amp, partners, iters, 0.0)
        assert np.all(value <= prev + 1e-18)
        prev = value


def test_single_partner_reports_conjugate_pair():
    psi = OracleState(np.array([1.0, 1.0j]) / np.sqrt(2))
    ref = basis_observable("A", 2)
    rng = np.random.default_rng(88)
    b = random_observable("B", 2, rng)
    heldout = random_observable("C", 2, rng)
    tau_b = transform_between(ref, b)
    tau_c = transform_between(ref, heldout)
    phases, report = retrieve_phases(born_law(psi, ref),
                                     {"B": born_law(psi, b)}, {"B": tau_b})
    assert report.ambiguity_flag == "conjugate-pair"
    assert report.alternate_phases is not None
    # at least one member of the pair predicts the held-out basis
    devs = []
    for cand in (phases, report.alternate_phases):
        coeff = np.sqrt(born_law(psi, ref)) * np.exp(1j * cand)
        pred = np.abs(tau_c.entries @ coeff) ** 2
        devs.append(np.max(np.abs(pred - born_law(psi, heldout))))
    assert min(devs) < 1e-6


def test_zero_amplitude_phase_fixed_to_zero(rng):
    psi = OracleState(np.array([0.0, 0.6, 0.8j]))
    ref = basis_observable("A", 3)
    b = random_observable("B", 3, rng)
    c = random_observable("C", 3, rng)
    laws = {"B": born_law(psi, b), "C": born_law(psi, c)}
    taus = {"B": transform_between(ref, b), "C": transform_between(ref, c)}
    phases, _ = retrieve_phases(born_law(psi, ref), laws, taus)
    assert phases[0] == 0.0  # zero-amplitude component pinned by convention


# --- assembly and prediction ------------------------------------------------

def test_assemble_single_observable_reference_only():
    law = np.array([0.25, 0.75])
    exp = assemble_equivalent({"A": law}, np.zeros(2), {}, "A")
    assert set(exp.amplitudes) == {"A"}
    assert exp.amplitudes["A"] == pytest.approx(np.sqrt(law))


def test_assemble_exact_derived_amplitudes_match_sqrt_law(rng):
    psi, ref, partners, _, laws, taus = oracle_setup(3, 7)
    phases, _ = retrieve_phases(laws["A"], {o.name: laws[o.name] for o in partners}, taus)
    exp = assemble_equivalent(laws, phases, taus, "A")
    for obs in partners:
        assert exp.amplitudes[obs.name] == \
            pytest.approx(np.sqrt(laws[obs.name]), abs=1e-10)


def test_assemble_sampled_derived_amplitudes_close(rng):
    psi, ref, partners, _, laws_exact, taus = oracle_setup(3, 11)
    n = 1_000_000
    laws = {name: trial_generator(400, i).multinomial(n, law / law.sum()) / n
            for i, (name, law) in enumerate(laws_exact.items())}
    cfg = RetrievalConfig.for_sampled_laws(n, sum(o.dim for o in partners))
    phases, _ = retrieve_phases(laws["A"],
                                {o.name: laws[o.name] for o in partners},
                                taus, cfg)
    exp = assemble_equivalent(laws, phases, taus, "A")
    for obs in partners:
        assert np.max(np.abs(exp.amplitudes[obs.name]
                             - np.sqrt(laws[obs.name]))) < 0.01


def test_predict_reference_returns_its_own_law():
    law = np.array([0.25, 0.75])
    exp = assemble_equivalent({"A": law}, np.zeros(2), {}, "A")
    tau_self = hilbert.TransformMatrix("A", "A", np.eye(2))
    assert predict_heldout(exp, tau_self) == pytest.approx(law)


def test_predict_heldout_matches_oracle_exact():
    psi, ref, partners, heldout, laws, taus = oracle_setup(4, 23)
    phases, _ = retrieve_phases(laws["A"],
                                {o.name: laws[o.name] for o in partners}, taus)
    exp = assemble_equivalent(laws, phases, taus, "A")
    tau_d = transform_between(ref, heldout)
    pred = predict_heldout(exp, tau_d)
    assert np.max(np.abs(pred - born_law(psi, heldout))) < 1e-6


def test_predict_requires_link():
    exp = assemble_equivalent({"A": np.array([0.5, 0.5])}, np.zeros(2), {}, "A")
    with pytest.raises(UnlinkedObservableError):
        predict_heldout(exp, hilbert.TransformMatrix("X", "Y", np.eye(2)))


def test_expansion_json_round_trip(rng):
    psi, ref, partners, _, laws, taus = oracle_setup(3, 9)
    phases, _ = retrieve_phases(laws["A"],
                                {o.name: laws[o.name] for o in partners}, taus)
    exp = assemble_equivalent(laws, phases, taus, "A")
    back = reconstruct.ExpansionSet.from_json_dict(exp.to_json_dict())
    for name in exp.amplitudes:
        assert back.amplitudes[name] == pytest.approx(exp.amplitudes[name])
        assert back.phases[name] == pytest.approx(exp.phases[name])


# --- round trip over random oracle states ------------------------------------

@pytest.mark.parametrize("dim", [2, 3, 4])
def test_round_trip_random_states(dim):
    for case in range(7):
        psi, ref, partners, heldout, laws, taus = oracle_setup(
            dim, 1000 * dim + case)
        est = StateReconstructor(reference="A", seed=case).fit(
            laws, list(taus.values()) + [transform_between(ref, heldout)])
        pred = est.predict(transform_between(ref, heldout))
        assert np.max(np.abs(pred - born_law(psi, heldout))) < 1e-6


# --- estimator API ----------------------------------------------------------

def test_estimator_get_set_params():
    est = StateReconstructor(restarts=8)
    params = est.get_params()
    assert params["restarts"] == 8
    est.set_params(restarts=16, tol=1e-8)
    assert est.restarts == 16 and est.tol == 1e-8
    clone = StateReconstructor(**est.get_params())
    assert clone.get_params() == est.get_params()
    with pytest.raises(ValueError):
        est.set_params(bogus=1)


def test_estimator_requires_fit_before_predict():
    with pytest.raises(RuntimeError):
        StateReconstructor().predict(hilbert.TransformMatrix("A", "B", np.eye(2)))


def test_estimator_reference_defaults_to_first_key():
    psi, ref, partners, _, laws, taus = oracle_setup(2, 31)
    est = StateReconstructor().fit(laws, list(taus.values()))
    assert est.expansion_.reference_observable == "A"
    assert est.report_.converged

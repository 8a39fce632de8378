import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qfact import finprob
from qfact.errors import EmptyLawError, InsufficientBlocksError, UnknownLabelError
from qfact.finprob import FactualLaw, accumulate, accumulate_indices, check_convergence, frequencies, merge
from qfact.seeding import trial_generator

LABELS = ("a1", "a2")


def fresh(spectrum=LABELS, eps=0.02, delta=0.05, n0=4):
    return FactualLaw.empty(spectrum, eps, delta, n0)


# --- accumulate -------------------------------------------------------------

def test_accumulate_single_increment():
    law = accumulate(fresh(), "a1")
    assert law.counts == {"a1": 1, "a2": 0}
    assert law.n_total == 1


def test_accumulate_disjoint_increment():
    law = accumulate(accumulate(fresh(), "a1"), "a2")
    assert law.counts == {"a1": 1, "a2": 1}
    assert law.n_total == 2


def test_accumulate_unknown_label_rejected():
    with pytest.raises(UnknownLabelError):
        accumulate(fresh(), "a3")


def test_accumulate_opens_new_block_when_full():
    law = fresh(n0=2)
    for lab in ("a1", "a2", "a1"):
        law = accumulate(law, lab)
    assert len(law.block_history) == 2
    assert sum(law.block_history[0].values()) == 2
    assert sum(law.block_history[1].values()) == 1


def test_accumulate_is_value_like():
    base = accumulate(fresh(), "a1")
    accumulate(base, "a2")
    assert base.counts == {"a1": 1, "a2": 0}


def test_batch_accumulate_matches_fold():
    idx = np.array([0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0])
    batch = accumulate_indices(fresh(n0=3), idx)
    folded = fresh(n0=3)
    for i in idx:
        folded = accumulate(folded, LABELS[i])
    assert batch.counts == folded.counts
    assert batch.block_history == folded.block_history


# --- frequencies ------------------------------------------------------------

def test_frequencies_arithmetic():
    law = accumulate_indices(fresh(), np.array([0, 0, 0, 1]))
    assert frequencies(law) == {"a1": 0.75, "a2": 0.25}


def test_frequencies_delta_law():
    law = accumulate_indices(fresh(), np.zeros(5, dtype=int))
    assert frequencies(law) == {"a1": 1.0, "a2": 0.0}


def test_frequencies_empty_law_errors():
    with pytest.raises(EmptyLawError):
        frequencies(fresh())


def test_frequency_sum_exact_with_shared_denominator():
    law = accumulate_indices(fresh(), np.array([0, 1, 0, 1, 1, 1, 0]))
    assert sum(law.counts.values()) / law.n_total == 1.0


# --- check_convergence ------------------------------------------------------

def test_identical_blocks_stable_zero_dispersion():
    blocks = [{"a1": 3, "a2": 1}] * 10
    law = FactualLaw.from_block_counts(LABELS, blocks, epsilon=1e-9,
                                       delta=0.05, block_size_n0=4)
    verdict = check_convergence(law)
    assert verdict.stable
    assert verdict.worst_deviation == 0.0
    assert verdict.pooled_frequencies == {"a1": 0.75, "a2": 0.25}


def test_insufficient_blocks_error():
    law = FactualLaw.from_block_counts(LABELS, [{"a1": 2, "a2": 2}],
                                       block_size_n0=4)
    with pytest.raises(InsufficientBlocksError):
        check_convergence(law)


def binomial_block_failure_probability(n0, p, eps):
    """Oracle: chance one block's frequency lands more than eps away from p,
    from the exact binomial tail."""
    lo = int(np.floor((p - eps) * n0))
    hi = int(np.ceil((p + eps) * n0))
    return stats.binom.cdf(lo - 1, n0, p) + stats.binom.sf(hi, n0, p)


def test_fair_coin_blocks_stable():
    # oracle (computed before the fixture): at n0=1e4, p=0.5, eps=0.02 a block
    # misses by more than eps with probability ~6.3e-5, so >5 misses out of
    # 100 blocks (the delta=0.05 threshold) is essentially impossible
    p_fail = binomial_block_failure_probability(10_000, 0.5, 0.02)
    assert p_fail < 1e-4
    assert stats.binom.sf(5, 100, p_fail) < 1e-15

    for rep in range(10):
        blocks = []
        for b in range(100):
            c = int(trial_generator(900 + rep, b).binomial(10_000, 0.5))
            blocks.append({"a1": c, "a2": 10_000 - c})
        law = FactualLaw.from_block_counts(LABELS, blocks, epsilon=0.02,
                                           delta=0.05, block_size_n0=10_000)
        assert check_convergence(law).stable


def test_drift_blocks_unstable():
    # oracle: first 50 blocks sit near 0.3, last 50 near 0.7, pooled near 0.5;
    # every block deviates by ~0.2 > eps=0.1, so the within-eps fraction is ~0
    blocks = []
    for b in range(100):
        p = 0.3 if b < 50 else 0.7
        c = int(trial_generator(77, b).binomial(10_000, p))
        blocks.append({"a1": c, "a2": 10_000 - c})
    law = FactualLaw.from_block_counts(LABELS, blocks, epsilon=0.1,
                                       delta=0.05, block_size_n0=10_000)
    verdict = check_convergence(law)
    assert not verdict.stable
    assert verdict.worst_deviation > 0.15
    assert all(f < 0.05 for f in
               verdict.per_label_fraction_within_epsilon.values())


def test_check_convergence_deterministic():
    blocks = [{"a1": 2, "a2": 2}, {"a1": 3, "a2": 1}, {"a1": 1, "a2": 3}]
    law = FactualLaw.from_block_counts(LABELS, blocks, block_size_n0=4)
    assert check_convergence(law) == check_convergence(law)


def test_partial_final_block_excluded():
    blocks = [{"a1": 4}, {"a2": 4}, {"a1": 1}]
    law = FactualLaw.from_block_counts(LABELS, blocks, block_size_n0=4)
    verdict = check_convergence(law)
    # pooled over the two complete blocks only
    assert verdict.pooled_frequencies == {"a1": 0.5, "a2": 0.5}


# --- merge ------------------------------------------------------------------

@st.composite
def law_pair(draw):
    n0 = draw(st.integers(min_value=1, max_value=5))
    seqs = []
    for _ in range(3):
        seqs.append(draw(st.lists(st.integers(min_value=0, max_value=1),
                                  min_size=0, max_size=20)))
    laws = [accumulate_indices(fresh(n0=n0), np.array(s, dtype=int))
            for s in seqs]
    return laws


@settings(max_examples=50, deadline=None)
@given(law_pair())
def test_merge_commutative_and_associative_up_to_block_order(laws):
    a, b, c = laws
    ab = merge(a, b)
    ba = merge(b, a)
    assert ab.counts == ba.counts
    assert ab.n_total == ba.n_total
    assert sorted(map(sorted, (x.items() for x in ab.block_history))) == \
        sorted(map(sorted, (x.items() for x in ba.block_history)))
    left = merge(merge(a, b), c)
    right = merge(a, merge(b, c))
    assert left.counts == right.counts
    assert left.block_history == right.block_history


def test_merge_pooled_frequency_is_count_weighted_mean():
    a = accumulate_indices(fresh(n0=4), np.array([0, 0, 0, 0, 1, 1, 1, 1]))
    b = accumulate_indices(fresh(n0=4), np.array([0, 0, 0, 0]))
    m = merge(a, b)
    fa, fb = frequencies(a), frequencies(b)
    expected = {lab: (fa[lab] * a.n_total + fb[lab] * b.n_total)
                / (a.n_total + b.n_total) for lab in LABELS}
    assert frequencies(m) == expected
    assert check_convergence(m).pooled_frequencies == expected


def test_merge_requires_same_spectrum_and_metadata():
    with pytest.raises(ValueError):
        merge(fresh(), fresh(spectrum=("x", "y")))
    with pytest.raises(ValueError):
        merge(fresh(n0=4), fresh(n0=8))


# --- serialization ----------------------------------------------------------

def test_csv_round_trip_counts_bit_exact():
    law = accumulate_indices(fresh(eps=0.015, delta=0.07, n0=3),
                             np.array([0, 1, 1, 0, 1, 1, 1]))
    back = finprob.from_csv(finprob.to_csv(law))
    assert back.counts == law.counts
    assert back.n_total == law.n_total
    assert (back.epsilon, back.delta, back.block_size_n0) == \
        (law.epsilon, law.delta, law.block_size_n0)


def test_json_round_trip_full():
    law = accumulate_indices(fresh(n0=3), np.array([0, 1, 1, 0, 1, 1, 1]))
    back = finprob.from_json(finprob.to_json(law))
    assert back == law


def test_law_invariants_enforced():
    with pytest.raises(ValueError):
        FactualLaw(LABELS, {"a1": 1, "a2": 0}, 2, 4, 0.02, 0.05,
                   [{"a1": 1}, {"a1": 1}])
    with pytest.raises(UnknownLabelError):
        FactualLaw(LABELS, {"zz": 1}, 1, 4, 0.02, 0.05, [{"zz": 1}])

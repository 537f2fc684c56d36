"""Serial dictatorship, trading cycles, deferred acceptance, rotations."""

import pytest

from oracles import gs_reference, stable_matchings

from mdm.market import (
    APPLICANT,
    INSTITUTION,
    InstanceError,
    Matching,
    Profile,
    blocking_pairs,
    matched_sets,
)
from mdm.mechanisms import (
    CyclePolicy,
    ProposalPolicy,
    QueryLog,
    apda,
    collapse_matching,
    expand_many_to_one,
    ipda,
    receiver_optimal,
    serial_dictatorship,
    ttc,
)
from mdm.generators import fixture_nonlocal_outcome, gen_random_market


def square(prefs, prios, caps=()) -> Profile:
    n, m = len(prefs), len(prios)
    return Profile(
        tuple(f"d{i}" for i in range(n)),
        tuple(f"h{j}" for j in range(m)),
        tuple(tuple(r) for r in prefs),
        tuple(tuple(r) for r in prios),
        tuple(caps),
    )


def test_serial_dictatorship_picks_in_order():
    p = square([(0, 1), (0, 1)], [(0, 1), (0, 1)])
    assert serial_dictatorship(p, (0, 1)) == Matching.of({0: 0, 1: 1})
    assert serial_dictatorship(p, (1, 0)) == Matching.of({1: 0, 0: 1})


def test_serial_dictatorship_skips_claimed():
    p = square([(0,), (0,)], [(0, 1), ()])
    assert serial_dictatorship(p, (0, 1)) == Matching.of({0: 0})


def test_serial_dictatorship_ignores_priorities():
    # h0 ranks nobody, yet the first picker still takes it
    p = square([(0,), ()], [(), ()])
    assert serial_dictatorship(p, (0, 1)) == Matching.of({0: 0})


def test_serial_dictatorship_rejects_partial_order():
    p = square([(0,), (1,)], [(0,), (1,)])
    with pytest.raises(InstanceError):
        serial_dictatorship(p, (0,))


def test_ttc_executes_trade_cycle():
    # 0 owns-by-priority h0 but wants h1; 1 the reverse: they trade
    p = square([(1, 0), (0, 1)], [(0, 1), (1, 0)])
    assert ttc(p) == Matching.of({0: 1, 1: 0})


def test_ttc_can_assign_an_institution_that_does_not_list_the_applicant():
    # h1 lists only d2, yet d0 trades into it through the cycle d0-h1-d2-h0
    p = square([(1,), (2,), (0,)], [(0,), (2,), (1,)])
    assert ttc(p) == Matching.of({0: 1, 1: 2, 2: 0})


def test_ttc_removes_institutions_with_exhausted_lists():
    # once d1 trades away, h1 lists nobody active and is removed, leaving d0 unmatched
    p = square([(1,), (0, 1)], [(1,), (1,)])
    assert ttc(p) == Matching.of({1: 0})


def test_ttc_policies_agree():
    for t in range(120):
        p = gen_random_market(6, 900 + t, truncation_prob=0.3)
        base = ttc(p)
        assert ttc(p, CyclePolicy("all-simultaneous")) == base
        assert ttc(p, CyclePolicy("seeded-random", seed=t)) == base


def test_apda_matches_reference_implementation():
    for t in range(200):
        p = gen_random_market(6, 2000 + t, truncation_prob=0.3)
        assert apda(p) == gs_reference(p)


def test_apda_is_stable():
    for t in range(100):
        p = gen_random_market(7, 300 + t, truncation_prob=0.3)
        assert blocking_pairs(p, apda(p)) == []
        assert blocking_pairs(p, ipda(p)) == []


def test_apda_proposal_policy_does_not_change_outcome():
    for t in range(60):
        p = gen_random_market(6, 4000 + t, truncation_prob=0.3)
        base = apda(p)
        for kind in ("fifo", "lifo", "seeded-random"):
            assert apda(p, ProposalPolicy(kind, seed=t)) == base


def test_outcome_fixture_pins_both_matchings():
    q, q_alt = fixture_nonlocal_outcome()
    assert apda(q) == Matching.of({1: 0, 0: 1})
    assert apda(q_alt) == Matching.of({0: 0, 1: 1})


def test_ipda_is_applicant_pessimal():
    # every applicant weakly prefers apda to ipda
    for t in range(100):
        p = gen_random_market(6, 5000 + t, truncation_prob=0.3)
        best = apda(p).by_applicant
        worst = ipda(p).by_applicant
        for d in range(p.n_applicants):
            prefs = p.applicant_prefs[d]
            rank = lambda h: len(prefs) if h is None else prefs.index(h)
            assert rank(best.get(d)) <= rank(worst.get(d))


def test_apda_dominates_every_stable_matching():
    for t in range(40):
        p = gen_random_market(4, 6000 + t, truncation_prob=0.4)
        best = apda(p).by_applicant
        for mu in stable_matchings(p):
            other = mu.by_applicant
            for d in range(p.n_applicants):
                prefs = p.applicant_prefs[d]
                rank = lambda h: len(prefs) if h is None else prefs.index(h)
                assert rank(best.get(d)) <= rank(other.get(d))


def test_receiver_optimal_equals_deferred_acceptance():
    for t in range(150):
        p = gen_random_market(6, 7000 + t, truncation_prob=0.3)
        assert receiver_optimal(p, INSTITUTION) == apda(p)
        assert receiver_optimal(p, APPLICANT) == ipda(p)


def test_receiver_optimal_reads_priorities_top_to_bottom():
    p = gen_random_market(5, 11, truncation_prob=0.0)
    log = QueryLog()
    receiver_optimal(p, INSTITUTION, log)
    seen = {}
    for event in log.events:
        if event[0] == "read" and event[1] == INSTITUTION:
            _, _, owner, rank, _ = event
            assert rank == seen.get(owner, -1) + 1, "a priority rank was skipped or repeated"
            seen[owner] = rank


def test_rural_invariance_of_matched_sets():
    for t in range(150):
        p = gen_random_market(6, 8000 + t, truncation_prob=0.3)
        assert matched_sets(apda(p)) == matched_sets(ipda(p))


def test_expand_many_to_one_round_trip():
    p = square([(0,), (0,), (0, 1)], [(0, 1, 2), (2,)], caps=(2, 1))
    wide, copy_map = expand_many_to_one(p)
    assert wide.unit_capacity
    assert len(copy_map) == wide.n_institutions
    mu = collapse_matching(apda(wide), copy_map)
    assert mu.by_institution[0] == (0, 1)
    assert mu.by_applicant[2] == 1


def test_unlisted_pairs_never_match():
    for t in range(60):
        p = gen_random_market(5, 9000 + t, truncation_prob=0.5)
        for mech in (apda, ipda, ttc):
            for d, h in mech(p).pairs:
                assert h in p.applicant_prefs[d]

"""Property-based invariants over randomly drawn instances."""

import itertools

from hypothesis import given, settings, strategies as st

from oracles import best_assignment_value, gs_reference

from mdm.market import Matching, Profile, blocking_pairs, matched_sets, parse_instance, serialize_instance
from mdm.mechanisms import APPLICANT, INSTITUTION, CyclePolicy, apda, ipda, receiver_optimal, ttc
from mdm.menus import complete_from_plan, menu_da, menu_da_applicant_proposing, menu_da_plan
from mdm.auctions import ValuationMatrix, max_weight_matching, vcg_unit_demand
from mdm.voting import VoteProfile, median_menu, median_menu_select, median_outcome
from mdm.descriptions import (
    LOSE,
    MechanismView,
    build_spa_menu_description,
    check_menu_description,
    win_label,
)


@st.composite
def profiles(draw, max_side=5):
    n = draw(st.integers(2, max_side))
    m = draw(st.integers(1, max_side))
    prefs = []
    for _ in range(n):
        full = draw(st.permutations(range(m)))
        prefs.append(tuple(full[: draw(st.integers(0, m))]))
    prios = []
    for _ in range(m):
        full = draw(st.permutations(range(n)))
        prios.append(tuple(full[: draw(st.integers(0, n))]))
    return Profile(
        tuple(f"d{i}" for i in range(n)),
        tuple(f"h{j}" for j in range(m)),
        tuple(prefs),
        tuple(prios),
    )


@st.composite
def matrices(draw, max_side=4, bound=6):
    nb = draw(st.integers(1, max_side))
    m = draw(st.integers(1, max_side))
    rows = tuple(
        tuple(draw(st.integers(0, bound)) for _ in range(m)) for _ in range(nb)
    )
    return ValuationMatrix(rows, bound)


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_apda_agrees_with_reference_and_is_stable(p):
    mu = apda(p)
    assert mu == gs_reference(p)
    assert blocking_pairs(p, mu) == []


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_rural_hospitals_invariance(p):
    assert matched_sets(apda(p)) == matched_sets(ipda(p))


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_rotation_route_reaches_both_extremes(p):
    assert receiver_optimal(p, INSTITUTION) == apda(p)
    assert receiver_optimal(p, APPLICANT) == ipda(p)


@settings(max_examples=60, deadline=None)
@given(profiles(), st.integers(0, 10 ** 6))
def test_menu_routes_agree(p, pick):
    i = pick % p.n_applicants
    ref = menu_da(i, p)
    assert menu_da_applicant_proposing(i, p) == ref
    assert menu_da_plan(i, p).menu == ref


@settings(max_examples=60, deadline=None)
@given(profiles(), st.integers(0, 10 ** 6), st.permutations(list(range(5))), st.integers(0, 5))
def test_plan_completion_matches_fresh_run(p, pick, perm, cut):
    i = pick % p.n_applicants
    rep = tuple(j for j in perm if j < p.n_institutions)[: cut % (p.n_institutions + 1)]
    plan = menu_da_plan(i, p)
    assert complete_from_plan(plan, rep) == apda(p.with_prefs(i, rep))


@settings(max_examples=40, deadline=None)
@given(profiles(), st.integers(0, 10 ** 6))
def test_ttc_policy_invariance(p, seed):
    base = ttc(p)
    assert ttc(p, CyclePolicy("all-simultaneous")) == base
    assert ttc(p, CyclePolicy("seeded-random", seed=seed)) == base
    for d, h in base.pairs:
        assert h in p.applicant_prefs[d]


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_instance_serialization_round_trips(p):
    assert parse_instance(serialize_instance(p)) == p


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_matching_dp_is_optimal(v):
    picked = max_weight_matching(v)
    value = sum(v.values[i][j] for i, j in enumerate(picked) if j is not None)
    assert value == best_assignment_value(v.values)


@settings(max_examples=40, deadline=None)
@given(matrices(max_side=3, bound=5))
def test_vcg_unit_demand_prices_are_externalities(v):
    out = vcg_unit_demand(v)
    total = best_assignment_value(v.values)
    for i in range(v.n_bidders):
        rest = [row for x, row in enumerate(v.values) if x != i]
        w_rest = best_assignment_value(rest) if rest else 0
        own = next(iter(out.allocation[i]), None)
        value = v.values[i][own] if own is not None else 0
        assert out.prices[i] >= 0
        assert value - out.prices[i] == total - w_rest


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 9).flatmap(lambda c: st.tuples(st.just(c), st.lists(st.integers(1, c), min_size=1, max_size=7))))
def test_median_menu_agrees_with_recount(cv):
    c, votes = cv
    if len(votes) % 2 == 0:
        votes = votes[:-1]
    v = VoteProfile(c, tuple(votes))
    for i in range(len(votes)):
        menu = median_menu(v, i)
        for own in range(1, c + 1):
            swapped = VoteProfile(c, tuple(own if k == i else votes[k] for k in range(len(votes))))
            assert median_menu_select(menu, own) == median_outcome(swapped)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(0, 3))
def test_spa_description_checks_out(n, K):
    d = build_spa_menu_description(n, K)

    def i_outcome(t):
        p = max(t[:-1])
        return win_label(p) if t[-1] > p else LOSE

    def menu(t):
        return frozenset({LOSE, win_label(max(t[:-1]))})

    domain = list(itertools.product(range(K + 1), repeat=n))
    check_menu_description(d, MechanismView(i_outcome, menu), n - 1, domain)

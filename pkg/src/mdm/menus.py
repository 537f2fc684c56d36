"""Menu computation for the matching mechanisms.

An applicant's menu is the set of institutions she could be matched to over
all preference lists she might submit, holding everyone else's reports
fixed. The unmatched option is always available and is never stored. Every
engine here takes the full profile but ignores the designated applicant's
own list, so a menu can never depend on it.

Engines and oracles:

- menu_oracle_singleton / menu_oracle_exhaustive: brute force, mechanism-
  agnostic; the exhaustive one is the ground truth everything else is
  checked against.
- menu_da / menu_da_many_to_one: one run of institution-proposing deferred
  acceptance without the applicant.
- menu_ttc, menu_sd: direct constructions for top trading cycles and serial
  dictatorship.
- menu_da_applicant_proposing: the same menu as menu_da, but computed by
  running an applicant-proposing simulation on an augmented market.
- menu_da_plan / complete_from_plan: a two-phase computation that first
  derives the menu plus enough bookkeeping (an unroll DAG of undoable
  rejections) to finish the applicant-optimal matching once the applicant's
  list arrives, without restarting from scratch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from mdm.market import (
    APPLICANT,
    INSTITUTION,
    InstanceError,
    Matching,
    Profile,
    validate_profile,
)
from mdm.mechanisms import (
    QueryLog,
    _next_accepting,
    apda,
    collapse_matching,
    expand_many_to_one,
    ipda,
    receiver_optimal,
    resume_receiver_optimal,
    serial_dictatorship,
    ttc,
    _ttc_cycles,
)

Menu = frozenset[int]

MECHANISM_TAGS = ("sd", "ttc", "apda")

_EXHAUSTIVE_CAP = 5  # institutions; reports grow factorially beyond this


def _check_applicant(p: Profile, i: int) -> None:
    if not 0 <= i < p.n_applicants:
        raise InstanceError(f"applicant index {i} out of range for {p.n_applicants} applicants")


def _require_unit(p: Profile) -> None:
    if not p.unit_capacity:
        raise InstanceError("this operation requires capacity 1 everywhere")


def _run_mechanism(mech: str, p: Profile, order: Sequence[int] | None) -> Matching:
    if mech == "apda":
        return apda(p)
    if mech == "ttc":
        return ttc(p)
    if mech == "sd":
        return serial_dictatorship(p, tuple(order) if order is not None else tuple(range(p.n_applicants)))
    raise InstanceError(f"unknown mechanism tag {mech!r}; expected one of {MECHANISM_TAGS}")


def menu_oracle_singleton(mech: str, i: int, p: Profile, order: Sequence[int] | None = None) -> Menu:
    """Menu probe via singleton reports.

    An institution is on the menu iff reporting the one-entry list (h,)
    matches i to h. Sound only for strategyproof mechanisms, where obtaining
    h with some list implies obtaining it with the singleton.
    """
    validate_profile(p)
    _check_applicant(p, i)
    menu = set()
    for h in range(p.n_institutions):
        outcome = _run_mechanism(mech, p.with_prefs(i, (h,)), order)
        if outcome.institution_of(i) == h:
            menu.add(h)
    return frozenset(menu)


def menu_oracle_exhaustive(mech: str, i: int, p: Profile, order: Sequence[int] | None = None) -> Menu:
    """Exact menu by enumerating every strict partial list i could submit.

    Ground truth for all other engines in this module. Capped at
    5 institutions (326 reports); raises beyond that.
    """
    validate_profile(p)
    _check_applicant(p, i)
    m = p.n_institutions
    if m > _EXHAUSTIVE_CAP:
        raise InstanceError(
            f"exhaustive menu enumeration supports at most {_EXHAUSTIVE_CAP} institutions, got {m}"
        )
    menu = set()
    for r in range(m + 1):
        for report in itertools.permutations(range(m), r):
            outcome = _run_mechanism(mech, p.with_prefs(i, report), order)
            h = outcome.institution_of(i)
            if h is not None:
                menu.add(h)
    return frozenset(menu)


def menu_da(i: int, p: Profile) -> Menu:
    """Menu of applicant i under the applicant-optimal stable mechanism.

    Run institution-proposing deferred acceptance on the market without i.
    An institution is on the menu iff it lists i and either ends up
    unmatched or ranks i above the applicant it holds.
    """
    validate_profile(p)
    _check_applicant(p, i)
    _require_unit(p)
    mu = ipda(p.with_prefs(i, ()))
    occupants = mu.by_institution
    menu = set()
    for h in range(p.n_institutions):
        rank = p.institution_rank[h]
        r = rank.get(i)
        if r is None:
            continue
        held = occupants.get(h, ())
        if not held or rank[held[0]] > r:
            menu.add(h)
    return frozenset(menu)


def menu_da_many_to_one(i: int, p: Profile) -> Menu:
    """Capacity-aware form of menu_da.

    An institution is on the menu iff it lists i and, in the matching
    without i, either has a free seat or holds some applicant it ranks
    below i. Computed on the unit-capacity expansion and collapsed back.
    """
    validate_profile(p)
    _check_applicant(p, i)
    expanded, copy_map = expand_many_to_one(p.with_prefs(i, ()))
    mu = collapse_matching(ipda(expanded), copy_map)
    occupants = mu.by_institution
    menu = set()
    for h in range(p.n_institutions):
        rank = p.institution_rank[h]
        r = rank.get(i)
        if r is None:
            continue
        held = occupants.get(h, ())
        if len(held) < p.capacities[h] or any(rank[d] > r for d in held):
            menu.add(h)
    return frozenset(menu)


def _ttc_survivors(p: Profile, i: int, all_at_once: bool) -> frozenset[int]:
    """Institutions still present once every trading cycle avoiding i has run.

    i stays in the market the whole time: institutions may point at her, but
    she points nowhere, so no cycle through her ever executes.
    """
    prefs, prios = p.applicant_prefs, p.institution_prios
    act_d = set(range(p.n_applicants))
    act_d.discard(i)
    act_h = set(range(p.n_institutions))
    while True:
        changed = True
        while changed:
            changed = False
            for d in [d for d in act_d if not any(h in act_h for h in prefs[d])]:
                act_d.remove(d)
                changed = True
            for h in [h for h in act_h if not any(d in act_d or d == i for d in prios[h])]:
                act_h.remove(h)
                changed = True
        point_d = {d: next(h for h in prefs[d] if h in act_h) for d in act_d}
        point_h = {h: next(d for d in prios[h] if d in act_d or d == i) for h in act_h}
        cycles = _ttc_cycles(point_d, point_h)
        if not cycles:
            return frozenset(act_h)
        for cycle in cycles if all_at_once else [min(cycles, key=min)]:
            for d in cycle:
                act_d.remove(d)
                act_h.remove(point_d[d])


def menu_ttc(i: int, p: Profile, check_invariance: bool = False) -> Menu:
    """Menu of applicant i under top trading cycles.

    Execute all cycles not involving i; the menu is every surviving
    institution. In the end state every pointer walk terminates at i, so i
    completes a cycle by pointing at any survivor, even one whose priority
    list omits her: priorities steer the trading, they are not acceptability
    constraints. With check_invariance the surviving set is recomputed under
    a different cycle order and must agree.
    """
    validate_profile(p)
    _check_applicant(p, i)
    _require_unit(p)
    survivors = _ttc_survivors(p, i, all_at_once=False)
    if check_invariance:
        alt = _ttc_survivors(p, i, all_at_once=True)
        if alt != survivors:
            raise AssertionError(
                f"trading-cycle survivors depend on execution order: {sorted(survivors)} vs {sorted(alt)}"
            )
    return survivors


def menu_sd(i: int, p: Profile, order: Sequence[int]) -> Menu:
    """Menu of applicant i under serial dictatorship: whatever her predecessors leave."""
    validate_profile(p)
    _check_applicant(p, i)
    _require_unit(p)
    order = tuple(order)
    if sorted(order) != list(range(p.n_applicants)):
        raise InstanceError("order must be a permutation of all applicants")
    taken: set[int] = set()
    for d in order:
        if d == i:
            break
        for h in p.applicant_prefs[d]:
            if h not in taken:
                taken.add(h)
                break
    return frozenset(range(p.n_institutions)) - taken


# --- applicant-proposing menu via an augmented market ---


def build_augmented_profile(i: int, p: Profile) -> Profile:
    """Augment the market so i's menu shows up in the institution-optimal matching.

    For each institution h_j two probe applicants and two probe institutions
    are added: d_try_j lists h_try_j over h_j over h_fail_j, d_fail_j lists
    h_fail_j over h_try_j, h_try_j ranks d_fail_j over d_try_j, and h_fail_j
    ranks d_try_j over d_fail_j. In h_j's own priority list, i is replaced by
    d_try_j; i keeps her index with an empty list. The construction makes
    d_try_j win h_try_j exactly when h_j would have proposed to i.
    """
    validate_profile(p)
    _check_applicant(p, i)
    _require_unit(p)
    n, m = p.n_applicants, p.n_institutions
    names_d = list(p.applicant_names)
    names_h = list(p.institution_names)
    prefs = [list(x) for x in p.applicant_prefs]
    prios = [list(x) for x in p.institution_prios]
    prefs[i] = []
    for j in range(m):
        base = p.institution_names[j]
        d_try, h_try, h_fail = n + 2 * j, m + 2 * j, m + 2 * j + 1
        names_d += [f"{base}@dtry", f"{base}@dfail"]
        names_h += [f"{base}@htry", f"{base}@hfail"]
        prefs.append([h_try, j, h_fail])
        prefs.append([h_fail, h_try])
        prios.append([d_try + 1, d_try])
        prios.append([d_try, d_try + 1])
        prios[j] = [d_try if d == i else d for d in prios[j]]
    return Profile(
        tuple(names_d),
        tuple(names_h),
        tuple(tuple(x) for x in prefs),
        tuple(tuple(x) for x in prios),
    )


def menu_da_applicant_proposing(i: int, p: Profile) -> Menu:
    """Same menu as menu_da, derived from an applicant-proposing computation.

    Runs the applicant-proposing form of receiver_optimal on the augmented
    market; h_j is on the menu iff its probe institution h_try_j ends up
    with its own probe applicant d_try_j.
    """
    aug = build_augmented_profile(i, p)
    mu = receiver_optimal(aug, APPLICANT).by_applicant
    n, m = p.n_applicants, p.n_institutions
    return frozenset(j for j in range(m) if mu.get(n + 2 * j) == m + 2 * j)


# --- two-phase computation with an unroll DAG ---


class UnrollDag:
    """Bookkeeping DAG of undoable rejections.

    Each node (d, h) records the match applicant d falls back to if the
    rejection chain through her node is unrolled; h is None when she falls
    back to unmatched. Source nodes belong to the designated applicant, one
    per menu institution, and unrolling the chain hanging from one source
    realizes that menu choice. Structural rules (out-degree at most one,
    sources only for the designated applicant, every other applicant in at
    most one node) are asserted on every mutation.
    """

    def __init__(self, applicant: int) -> None:
        self.applicant = applicant
        self.nodes: set[tuple[int, int | None]] = set()
        self.out: dict[tuple[int, int | None], tuple[int, int | None]] = {}
        self.preds: dict[tuple[int, int | None], set[tuple[int, int | None]]] = {}
        self.node_of: dict[int, tuple[int, int | None]] = {}

    def __repr__(self) -> str:  # state dump for invariant failures
        edges = sorted((u, v) for u, v in self.out.items())
        return f"UnrollDag(applicant={self.applicant}, nodes={sorted(self.nodes)}, edges={edges})"

    def add_source(self, h: int) -> tuple[int, int | None]:
        node = (self.applicant, h)
        if node in self.nodes:
            raise AssertionError(f"duplicate source {node} in {self!r}")
        self.nodes.add(node)
        return node

    def add_node(self, d: int, h: int | None) -> tuple[int, int | None]:
        node = (d, h)
        if d == self.applicant or d in self.node_of or node in self.nodes:
            raise AssertionError(f"cannot add node {node} to {self!r}")
        self.nodes.add(node)
        self.node_of[d] = node
        return node

    def add_edge(self, u: tuple[int, int | None], v: tuple[int, int | None]) -> None:
        if u not in self.nodes or v not in self.nodes:
            raise AssertionError(f"edge {u}->{v} touches unknown node in {self!r}")
        if u in self.out:
            raise AssertionError(f"node {u} would get out-degree 2 in {self!r}")
        if v[0] == self.applicant:
            raise AssertionError(f"edge into source {v} in {self!r}")
        self.out[u] = v
        self.preds.setdefault(v, set()).add(u)

    def chain_from(self, node: tuple[int, int | None]) -> list[tuple[int, int | None]]:
        """The maximal path of out-edges starting at node."""
        chain = [node]
        while chain[-1] in self.out:
            chain.append(self.out[chain[-1]])
        return chain

    def unique_pred_chain(self, node: tuple[int, int | None]) -> list[tuple[int, int | None]]:
        """The maximal path from node whose later nodes each have exactly one predecessor."""
        chain = [node]
        while True:
            succ = self.out.get(chain[-1])
            if succ is None or len(self.preds.get(succ, ())) != 1:
                return chain
            chain.append(succ)

    def remove_chain(self, chain: list[tuple[int, int | None]]) -> None:
        for node in chain:
            for u in self.preds.pop(node, set()):
                if self.out.get(u) == node:
                    del self.out[u]
            succ = self.out.pop(node, None)
            if succ is not None:
                self.preds[succ].discard(node)
            self.nodes.remove(node)
            if node[0] != self.applicant:
                del self.node_of[node[0]]

    def check(
        self,
        mu: dict[int, int],
        frontier: set[tuple[int, int | None]] | None,
        proposer: int | None,
        menu: set[int],
    ) -> None:
        """Assert the structural rules against the current tentative state."""

        def fail(reason: str) -> None:
            raise AssertionError(f"unroll dag invariant violated: {reason}\n{self!r}")

        for u, v in self.out.items():
            if u not in self.preds.get(v, ()):
                fail(f"edge {u}->{v} missing from predecessor index")
            if mu.get(v[0]) != u[1]:
                fail(f"edge {u}->{v} but tentative match of {v[0]} is {mu.get(v[0])}")
        for v, us in self.preds.items():
            for u in us:
                if self.out.get(u) != v:
                    fail(f"stale predecessor {u} recorded for {v}")
        for node in self.nodes:
            if node[0] == self.applicant:
                if self.preds.get(node):
                    fail(f"source {node} has predecessors")
                if node[1] not in menu:
                    fail(f"source {node} outside the menu")
            elif not self.preds.get(node):
                fail(f"non-source {node} has no predecessors")
        for d, node in self.node_of.items():
            if node not in self.nodes or node[0] != d:
                fail(f"node index broken for applicant {d}")
        if sum(node[0] != self.applicant for node in self.nodes) != len(self.node_of):
            fail("an applicant appears in two nodes")
        if proposer is not None and frontier is not None:
            with_h = {node for node in self.nodes if node[1] == proposer}
            if frontier != with_h:
                fail(f"frontier {sorted(frontier)} != nodes of proposer {proposer} {sorted(with_h)}")
            for node in frontier:
                if node in self.out:
                    fail(f"frontier node {node} has an out-edge")


@dataclass(frozen=True)
class MenuPlan:
    """Phase-one output: a menu plus everything needed to finish the matching.

    market is the input profile with the applicant's list cleared, tentative
    the matching of everyone else, pointers each institution's next unread
    priority rank, terminal the applicants already at their final match, and
    dag the unroll DAG whose sources are the menu. Treat the plan as
    read-only; complete_from_plan copies what it mutates.
    """

    applicant: int
    market: Profile
    menu: Menu
    tentative: Matching
    dag: UnrollDag = field(repr=False)
    terminal: frozenset[int]
    pointers: tuple[int, ...] = field(repr=False)


def _hold_run(
    q: Profile, i: int, log: QueryLog | None
) -> tuple[dict[int, int], list[int], list[int]]:
    """Institution-proposing run where proposing to i captures the institution.

    Equivalent to deferred acceptance on a market whose institutions list a
    private hold applicant in i's slot: an institution reaching i's position
    is permanently accepted there and stops proposing. Returns the tentative
    matching over everyone else, the per-institution pointers, and the
    captured institutions in ascending order.
    """
    n, m = q.n_applicants, q.n_institutions
    hold_names = tuple(f"{name}@hold" for name in q.institution_names)
    hold_prefs = tuple((j,) for j in range(m))
    hold_prios = tuple(
        tuple(n + j if d == i else d for d in q.institution_prios[j]) for j in range(m)
    )
    hold = Profile(
        q.applicant_names + hold_names,
        q.institution_names,
        q.applicant_prefs + hold_prefs,
        hold_prios,
    )
    inner = QueryLog() if log is not None else None
    nxt = [0] * m
    mu: dict[int, int] = {}
    stack = [j for j in range(m - 1, -1, -1) if hold_prios[j]]
    while stack:
        h = stack.pop()
        d = _next_accepting(hold, mu, nxt, h, inner)
        if d is None:
            continue
        displaced = mu.get(d)
        mu[d] = h
        if displaced is not None:
            stack.append(displaced)
    if log is not None:
        for ev in inner.events:
            if ev[0] == "read":
                _, side, owner, rank, subject = ev
                log.read(side, owner, rank, i if subject >= n else subject)
            elif ev[2] < n:  # lookups of hold applicants are internal bookkeeping
                log.events.append(ev)
    captured = sorted(h for d, h in mu.items() if d >= n)
    return {d: h for d, h in mu.items() if d < n}, nxt, captured


def _next_interested(
    q: Profile,
    i: int,
    mu: dict[int, int],
    dag: UnrollDag,
    nxt: list[int],
    h: int,
    log: QueryLog | None,
) -> int | None:
    """Advance h down its priority list to the next applicant who wants it.

    An applicant already holding a dag node compares h against that node's
    fallback institution, not against her tentative match: if the chain
    through her is unrolled, the fallback is what she ends up with.
    """
    prios = q.institution_prios[h]
    rank = q.applicant_rank
    while nxt[h] < len(prios):
        d = prios[nxt[h]]
        if log is not None:
            log.read(INSTITUTION, h, nxt[h], d)
        nxt[h] += 1
        if d == i:
            return i
        node = dag.node_of.get(d)
        reservation = node[1] if node is not None else mu.get(d)
        if log is not None:
            log.lookup(APPLICANT, d, h)
        r = rank[d].get(h)
        if r is None:
            continue
        if reservation is None or r < rank[d][reservation]:
            return d
    return None


def menu_da_plan(i: int, p: Profile, log: QueryLog | None = None) -> MenuPlan:
    """Phase one: compute i's menu and a plan for finishing the matching.

    Runs the capture variant of institution-proposing deferred acceptance,
    then drains the captured institutions one by one, each proposing below
    i's slot. Rejection chains triggered this way are recorded in the unroll
    DAG rather than final: each displaced applicant gets a node remembering
    the match she falls back to if i's eventual choice routes elsewhere.
    Every institution that reaches i's slot joins the menu. The resulting
    menu equals menu_da(i, p).
    """
    validate_profile(p)
    _check_applicant(p, i)
    _require_unit(p)
    q = p.with_prefs(i, ())
    mu, nxt, captured = _hold_run(q, i, log)
    menu: set[int] = set(captured)
    dag = UnrollDag(i)
    rank = q.applicant_rank

    pending = list(reversed(captured))
    while pending:
        h0 = pending.pop()
        frontier = {dag.add_source(h0)}
        dag.check(mu, frontier, h0, menu)
        h: int | None = h0
        while h is not None:
            d = _next_interested(q, i, mu, dag, nxt, h, log)
            if d is None:
                h = None
            elif d == i:
                menu.add(h)
                frontier.add(dag.add_source(h))
            elif d not in dag.node_of:
                fallback = mu.get(d)
                node = dag.add_node(d, fallback)
                for u in frontier:
                    dag.add_edge(u, node)
                frontier = {node}
                mu[d] = h
                h = fallback
            else:
                h = _collide(q, mu, dag, frontier, d, h)
            dag.check(mu, frontier if h is not None else None, h, menu)

    assert menu == {node[1] for node in dag.nodes if node[0] == i}
    tentative = Matching.of(mu)
    unmatched = frozenset(d for d in range(q.n_applicants) if d != i and d not in mu)
    return MenuPlan(
        applicant=i,
        market=q,
        menu=frozenset(menu),
        tentative=tentative,
        dag=dag,
        terminal=unmatched,
        pointers=tuple(nxt),
    )


def _collide(
    q: Profile,
    mu: dict[int, int],
    dag: UnrollDag,
    frontier: set[tuple[int, int | None]],
    d: int,
    h: int,
) -> int:
    """Proposal reached an applicant who already has a dag node.

    Her old node and the chain hanging from it by sole predecession are
    certain rejections now (two independent triggers exist), so they are
    dropped and replaced by a single node with a raised fallback: the worse
    of her tentative match and the new offer. If she keeps her tentative
    match, h keeps proposing; if she moves to h, her old match does.

    The dropped chain may swallow frontier nodes; those are pruned before
    new edges are drawn from the frontier. When the whole frontier is
    swallowed, every route that could undo d's move runs through her own
    dropped node, so she keeps the better match under every pick and gets
    no replacement node at all.
    """
    p1 = dag.node_of[d]
    preds1 = set(dag.preds.get(p1, ()))
    removed = dag.unique_pred_chain(p1)
    dag.remove_chain(removed)
    frontier.difference_update(removed)
    cur = mu[d]
    if cur == h:
        raise AssertionError(f"institution {h} proposed to its own match {d}")
    if q.applicant_rank[d][cur] < q.applicant_rank[d][h]:
        node = dag.add_node(d, h)
        for u in preds1:
            dag.add_edge(u, node)
        frontier.add(node)
        return h
    if frontier:
        node = dag.add_node(d, cur)
        for u in frontier:
            dag.add_edge(u, node)
        frontier.clear()
        frontier.add(node)
    frontier.update(preds1)
    mu[d] = h
    return cur


def complete_from_plan(plan: MenuPlan, prefs: Sequence[int], log: QueryLog | None = None) -> Matching:
    """Phase two: finish the matching once the applicant's list is known.

    Picks the list's highest menu institution (or none), unrolls the chain
    hanging from that pick so every applicant on it falls back to her
    recorded match, and lets the remaining institutions keep proposing to
    completion. Equals apda on the full profile.
    """
    i = plan.applicant
    q = plan.market
    prefs = tuple(prefs)
    seen: set[int] = set()
    for h in prefs:
        if not isinstance(h, int) or not 0 <= h < q.n_institutions or h in seen:
            raise InstanceError(f"invalid preference list for applicant {i}: {prefs!r}")
        seen.add(h)
    full = q.with_prefs(i, prefs)
    mu = dict(plan.tentative.by_applicant)
    nxt = list(plan.pointers)
    d_term = set(plan.terminal) | {i}
    pick = next((h for h in prefs if h in plan.menu), None)
    if pick is not None:
        for d, h in plan.dag.chain_from((i, pick)):
            if h is None:
                mu.pop(d, None)
            else:
                mu[d] = h
            d_term.add(d)
    return resume_receiver_optimal(full, mu, nxt, d_term, log)

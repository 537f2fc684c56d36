"""Seeded self-check suites behind the ``verify`` subcommand.

Each suite re-derives the same quantity along two independent routes over a
stream of generated instances and reports every disagreement together with
the instance that produced it.  A run is deterministic given (suite, size,
trials, seed).  Trials run across processes when the batch is large enough;
setting MDM_NO_PARALLEL=1 forces single-process execution.
"""

from __future__ import annotations

import itertools
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from mdm.auctions import (
    ValuationMatrix,
    max_weight_matching,
    menu_additive,
    menu_unit_demand,
    serialize_auction,
    spa_outcome,
    vcg_additive,
    vcg_unit_demand,
)
from mdm.generators import gen_bit_probe_auction, gen_random_market, BitProbeParams
from mdm.market import (
    APPLICANT,
    INSTITUTION,
    InstanceError,
    Profile,
    blocking_pairs,
    matched_sets,
    serialize_instance,
    validate_matching,
)
from mdm.mechanisms import (
    apda,
    collapse_matching,
    expand_many_to_one,
    ipda,
    receiver_optimal,
    ttc,
)
from mdm.menus import (
    complete_from_plan,
    menu_da,
    menu_da_applicant_proposing,
    menu_da_plan,
    menu_oracle_exhaustive,
    menu_oracle_singleton,
    menu_sd,
    menu_ttc,
)
from mdm.voting import (
    VoteProfile,
    median_menu,
    median_menu_select,
    median_outcome,
    serialize_votes,
)

SUITE_NAMES = (
    "menus",
    "stability",
    "strategyproofness",
    "rural",
    "rotations",
    "plan",
    "auctions",
    "voting",
)

# (size, trials) used when the caller does not override them. Sizes are
# agent counts for market suites and ignored by auctions/voting, which draw
# their own dimensions per trial.
_DEFAULTS: dict[str, tuple[int, int]] = {
    "menus": (6, 150),
    "stability": (6, 200),
    "strategyproofness": (5, 150),
    "rural": (6, 200),
    "rotations": (6, 300),
    "plan": (6, 100),
    "auctions": (4, 200),
    "voting": (5, 125),
}


@dataclass(frozen=True)
class Failure:
    """One disagreement: the instance, what was expected, what was seen."""

    instance: str
    expectation: str
    observed: str

    def as_dict(self) -> dict[str, str]:
        return {
            "instance": self.instance,
            "expectation": self.expectation,
            "observed": self.observed,
        }


@dataclass(frozen=True)
class VerificationReport:
    suite: str
    trials: int
    seed: int
    failures: tuple[Failure, ...]
    wall_time: float

    @property
    def ok(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict[str, object]:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "seed": self.seed,
            "failures": [f.as_dict() for f in self.failures],
            "wall_time": round(self.wall_time, 3),
            "ok": self.ok,
        }

    def summary(self) -> str:
        verdict = "ok" if self.ok else f"{len(self.failures)} failure(s)"
        return f"{self.suite}: {self.trials} trials, {verdict} ({self.wall_time:.2f}s, seed {self.seed})"


def _score(true_list: tuple[int, ...], h: int | None) -> int:
    """Rank of an assignment under a true list; lower is better.

    Unmatched sits below every listed institution, and an unlisted
    institution below unmatched.
    """
    if h is None:
        return len(true_list)
    try:
        return true_list.index(h)
    except ValueError:
        return len(true_list) + 1


def _menus_trial(size: int, seed: int, t: int) -> list[Failure]:
    # Every fourth trial shrinks to 5 institutions so the exhaustive
    # enumeration oracle stays within its cap and joins the comparison.
    n = 5 if t % 4 == 3 else size
    p = gen_random_market(n, seed + t, truncation_prob=0.3)
    i = t % n
    inst = serialize_instance(p)
    failures = []
    ref = menu_da(i, p)
    routes = [
        ("applicant-proposing augmented run", menu_da_applicant_proposing(i, p)),
        ("two-phase plan", menu_da_plan(i, p).menu),
        ("single-report oracle", menu_oracle_singleton("apda", i, p)),
    ]
    if n <= 5:
        routes.append(("exhaustive report enumeration", menu_oracle_exhaustive("apda", i, p)))
    for name, got in routes:
        if got != ref:
            failures.append(
                Failure(
                    inst,
                    f"deferred-acceptance menu of applicant {i} is {sorted(ref)}",
                    f"{name} computed {sorted(got)}",
                )
            )
    order = tuple(range(n))
    for label, fast, oracle in [
        ("trading-cycles", menu_ttc(i, p), menu_oracle_singleton("ttc", i, p)),
        ("serial-dictatorship", menu_sd(i, p, order), menu_oracle_singleton("sd", i, p, order)),
    ]:
        if fast != oracle:
            failures.append(
                Failure(
                    inst,
                    f"{label} menu of applicant {i} is {sorted(oracle)} by report probing",
                    f"direct computation gave {sorted(fast)}",
                )
            )
    return failures


def _stability_trial(size: int, seed: int, t: int) -> list[Failure]:
    p = gen_random_market(size, seed + t, truncation_prob=0.3)
    inst = serialize_instance(p)
    failures = []
    best = apda(p)
    worst = ipda(p)
    for name, mu in [("applicant-proposing", best), ("institution-proposing", worst)]:
        validate_matching(p, mu)
        blocks = blocking_pairs(p, mu)
        if blocks:
            failures.append(
                Failure(
                    inst,
                    f"{name} deferred acceptance yields no blocking pairs",
                    f"blocking pairs {sorted(blocks)}",
                )
            )
    mu_d, nu_d = best.by_applicant, worst.by_applicant
    for d in range(p.n_applicants):
        true = p.applicant_prefs[d]
        if _score(true, mu_d.get(d)) > _score(true, nu_d.get(d)):
            failures.append(
                Failure(
                    inst,
                    f"applicant {d} weakly prefers the applicant-proposing outcome",
                    f"gets {mu_d.get(d)} there but {nu_d.get(d)} under institution proposing",
                )
            )
    return failures


# Pinned 4x4 market for the exhaustive strategyproofness sweep: priorities
# and the other applicants' lists stay fixed while one applicant ranges over
# every strict partial list as truth and every other one as misreport.
_SP_PRIOS = ((0, 1, 2, 3), (1, 3, 0, 2), (2, 0, 3, 1), (3, 2, 1, 0))
_SP_PREFS = ((0, 1, 2, 3), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 0, 1))


def _all_lists(m: int) -> list[tuple[int, ...]]:
    return [
        perm
        for r in range(m + 1)
        for perm in itertools.permutations(range(m), r)
    ]


def _sp_base_market() -> Profile:
    names_d = tuple(f"d{i}" for i in range(4))
    names_h = tuple(f"h{j}" for j in range(4))
    return Profile(names_d, names_h, _SP_PREFS, _SP_PRIOS)


def _check_deviations(
    p: Profile, i: int, true: tuple[int, ...], reports: list[tuple[int, ...]]
) -> list[Failure]:
    failures = []
    base = p.with_prefs(i, true)
    inst = serialize_instance(base)
    for mech, run in [("apda", apda), ("ttc", ttc)]:
        honest = _score(true, run(base).by_applicant.get(i))
        for rep in reports:
            if rep == true:
                continue
            got = _score(true, run(p.with_prefs(i, rep)).by_applicant.get(i))
            if got < honest:
                failures.append(
                    Failure(
                        inst,
                        f"{mech}: applicant {i} cannot beat the truth {true}",
                        f"reporting {rep} improves rank {honest} to {got}",
                    )
                )
    return failures


def _strategyproofness_trial(size: int, seed: int, t: int) -> list[Failure]:
    p = gen_random_market(size, seed + t, truncation_prob=0.3)
    i = t % size
    true = p.applicant_prefs[i]
    rng = random.Random((seed + t) ^ 0x5F5F)
    reports = []
    for _ in range(12):
        k = rng.randint(0, size)
        reports.append(tuple(rng.sample(range(size), k)))
    return _check_deviations(p, i, true, reports)


def _strategyproofness_exhaustive_trial(size: int, seed: int, t: int) -> list[Failure]:
    del size, seed  # the sweep is fully pinned
    lists = _all_lists(4)
    i, true = divmod(t, len(lists))
    return _check_deviations(_sp_base_market(), i, lists[true], lists)


def _rural_trial(size: int, seed: int, t: int) -> list[Failure]:
    p = gen_random_market(size, seed + t, truncation_prob=0.3)
    failures = []
    sets_a = matched_sets(apda(p))
    sets_i = matched_sets(ipda(p))
    if sets_a != sets_i:
        failures.append(
            Failure(
                serialize_instance(p),
                "the same applicants and institutions are matched in every stable matching",
                f"applicant-proposing matches {tuple(map(sorted, sets_a))}, "
                f"institution-proposing {tuple(map(sorted, sets_i))}",
            )
        )
    # Capacity variant: the per-institution fill is also invariant.
    rng = random.Random((seed + t) ^ 0x0C0C)
    caps = tuple(rng.randint(1, 2) for _ in range(p.n_institutions))
    wide = Profile(p.applicant_names, p.institution_names, p.applicant_prefs, p.institution_prios, caps)
    expanded, copy_map = expand_many_to_one(wide)
    fills = []
    for mu in (apda(expanded), ipda(expanded)):
        folded = collapse_matching(mu, copy_map)
        by_h = folded.by_institution
        fills.append(tuple(len(by_h.get(h, frozenset())) for h in range(wide.n_institutions)))
    if fills[0] != fills[1]:
        failures.append(
            Failure(
                serialize_instance(wide),
                f"per-institution fill {fills[0]} is the same in every stable matching",
                f"institution-proposing run fills {fills[1]}",
            )
        )
    return failures


def _rotations_trial(size: int, seed: int, t: int) -> list[Failure]:
    p = gen_random_market(size, seed + t, truncation_prob=0.3)
    failures = []
    pairs = [
        ("institution-proposing run plus rotations", receiver_optimal(p, INSTITUTION), apda(p)),
        ("applicant-proposing run plus rotations", receiver_optimal(p, APPLICANT), ipda(p)),
    ]
    for name, got, want in pairs:
        if got != want:
            failures.append(
                Failure(
                    serialize_instance(p),
                    f"{name} equals the receiver-optimal stable matching {sorted(want.pairs)}",
                    f"computed {sorted(got.pairs)}",
                )
            )
    return failures


def _plan_trial(size: int, seed: int, t: int) -> list[Failure]:
    p = gen_random_market(size, seed + t, truncation_prob=0.3)
    i = t % size
    plan = menu_da_plan(i, p)
    failures = []
    if plan.menu != menu_da(i, p):
        failures.append(
            Failure(
                serialize_instance(p),
                f"plan menu for applicant {i} equals the deferred-acceptance menu {sorted(menu_da(i, p))}",
                f"plan computed {sorted(plan.menu)}",
            )
        )
    true = p.applicant_prefs[i]
    rng = random.Random((seed + t) ^ 0x7A7A)
    lists = [true[:k] for k in range(len(true) + 1)]
    lists.append(tuple(rng.sample(range(size), rng.randint(0, size))))
    for rep in lists:
        want = apda(p.with_prefs(i, rep))
        got = complete_from_plan(plan, rep)
        if got != want:
            failures.append(
                Failure(
                    serialize_instance(p.with_prefs(i, rep)),
                    f"completing the plan of applicant {i} with list {rep} "
                    f"matches a fresh run: {sorted(want.pairs)}",
                    f"plan completion gave {sorted(got.pairs)}",
                )
            )
    return failures


def _assignment_value(v: ValuationMatrix, assignment: tuple[int | None, ...]) -> int:
    return sum(v.values[i][j] for i, j in enumerate(assignment) if j is not None)


def _brute_welfare(v: ValuationMatrix) -> int:
    """Best assignment value by enumerating padded item permutations."""
    nb, m = v.n_bidders, v.n_items
    slots = list(range(m)) + [None] * nb
    best = 0
    for pick in itertools.permutations(slots, nb):
        best = max(best, sum(v.values[i][j] for i, j in enumerate(pick) if j is not None))
    return best


def _auctions_fixed_checks() -> list[Failure]:
    failures = []
    lone = ValuationMatrix(((3, 0, 2),), 5)
    out = vcg_additive(lone)
    if out.prices != (0,) or out.allocation[0] != frozenset({0, 1, 2}):
        failures.append(
            Failure(
                serialize_auction(lone),
                "a lone bidder wins every item and pays nothing",
                f"allocation {out.allocation}, prices {out.prices}",
            )
        )
    bids = (4, 7, 7)
    win = spa_outcome(bids)
    if (win.allocation.index(frozenset({0})), win.prices[win.allocation.index(frozenset({0}))]) != (1, 7):
        failures.append(
            Failure(
                str(list(bids)),
                "ties go to the lowest-index bidder at the second-highest bid",
                f"allocation {win.allocation}, prices {win.prices}",
            )
        )
    # Bit-probe instances: the probed bid vector admits a perfect matching
    # exactly when the probed matrix bit is 1.
    k = 2
    for cells in itertools.product((0, 1), repeat=k * k):
        bits = tuple(tuple(cells[r * k:(r + 1) * k]) for r in range(k))
        for pq in itertools.product(range(k), repeat=2):
            params = BitProbeParams(k, bits, pq)
            v = gen_bit_probe_auction(params)
            weight = _assignment_value(v, max_weight_matching(v))
            if (weight == 2 * k) != bool(bits[pq[0]][pq[1]]):
                failures.append(
                    Failure(
                        serialize_auction(v),
                        f"perfect matching exists iff bit {pq} of {bits} is set",
                        f"matching weight {weight}",
                    )
                )
    return failures


def _auctions_trial(size: int, seed: int, t: int) -> list[Failure]:
    del size
    failures = _auctions_fixed_checks() if t == 0 else []
    rng = random.Random(seed + t)
    nb = rng.randint(2, 4)
    m = rng.randint(1, 4)
    bound = rng.randint(1, 6)
    v = ValuationMatrix(
        tuple(tuple(rng.randint(0, bound) for _ in range(m)) for _ in range(nb)), bound
    )
    inst = serialize_auction(v)
    # Additive VCG must decompose into one second-price auction per item.
    out = vcg_additive(v)
    alloc = [set() for _ in range(nb)]
    prices = [0] * nb
    for j in range(m):
        column = tuple(v.values[i][j] for i in range(nb))
        one = spa_outcome(column)
        winner = next(i for i, items in enumerate(one.allocation) if items)
        alloc[winner].add(j)
        prices[winner] += one.prices[winner]
    if out.allocation != tuple(frozenset(s) for s in alloc) or out.prices != tuple(prices):
        failures.append(
            Failure(
                inst,
                f"additive VCG splits into per-item second-price auctions: "
                f"{tuple(sorted(s) for s in alloc)} at {tuple(prices)}",
                f"got {tuple(sorted(s) for s in out.allocation)} at {out.prices}",
            )
        )
    for i in range(nb):
        menu = menu_additive(i, v)
        util = sum(v.values[i][j] - menu[j] for j in out.allocation[i])
        best = sum(max(0, v.values[i][j] - menu[j]) for j in range(m))
        if util != best:
            failures.append(
                Failure(
                    inst,
                    f"bidder {i} attains the best additive-menu utility {best}",
                    f"outcome utility {util} with menu {menu}",
                )
            )
    # Unit demand: matching weight against brute-force enumeration, then the
    # VCG utility identity and its menu form.
    assignment = max_weight_matching(v)
    weight = _assignment_value(v, assignment)
    brute = _brute_welfare(v)
    if weight != brute:
        failures.append(
            Failure(
                inst,
                f"maximum assignment value is {brute} by enumeration",
                f"dynamic program found {weight} via {assignment}",
            )
        )
    out_u = vcg_unit_demand(v)
    for i in range(nb):
        others = ValuationMatrix(v.values[:i] + v.values[i + 1:], v.bound)
        w_rest = _assignment_value(others, max_weight_matching(others))
        own = next(iter(out_u.allocation[i]), None)
        value = v.values[i][own] if own is not None else 0
        util = value - out_u.prices[i]
        if out_u.prices[i] < 0 or util != weight - w_rest:
            failures.append(
                Failure(
                    inst,
                    f"bidder {i} pays her externality: utility {weight - w_rest}",
                    f"allocation {sorted(out_u.allocation[i])} at price {out_u.prices[i]}",
                )
            )
        menu = menu_unit_demand(i, v)
        best = max([0] + [v.values[i][j] - menu[j] for j in range(m)])
        if util != best:
            failures.append(
                Failure(
                    inst,
                    f"bidder {i} attains the best unit-demand menu utility {best}",
                    f"outcome utility {util} with menu {menu}",
                )
            )
    return failures


def _voting_trial(size: int, seed: int, t: int) -> list[Failure]:
    del seed
    candidates = size
    n_voters = 3
    combos = candidates ** n_voters
    votes = []
    x = t % combos
    for _ in range(n_voters):
        votes.append(x % candidates + 1)
        x //= candidates
    v = VoteProfile(candidates, tuple(votes))
    inst = serialize_votes(v)
    failures = []
    chosen = median_outcome(v)
    want = sorted(votes)[n_voters // 2]
    if chosen != want:
        failures.append(Failure(inst, f"median is {want}", f"computed {chosen}"))
    for i in range(n_voters):
        lo, hi = median_menu(v, i)
        for own in range(1, candidates + 1):
            swapped = VoteProfile(candidates, tuple(own if k == i else votes[k] for k in range(n_voters)))
            direct = median_outcome(swapped)
            via_menu = median_menu_select((lo, hi), own)
            if via_menu != direct:
                failures.append(
                    Failure(
                        inst,
                        f"voter {i} reporting {own} moves the median to {direct}",
                        f"menu ({lo}, {hi}) selects {via_menu}",
                    )
                )
            peak = votes[i]
            if abs(direct - peak) < abs(chosen - peak):
                failures.append(
                    Failure(
                        inst,
                        f"voter {i} with peak {peak} cannot beat the honest median {chosen}",
                        f"reporting {own} yields {direct}",
                    )
                )
    return failures


_TRIALS = {
    "menus": _menus_trial,
    "stability": _stability_trial,
    "strategyproofness": _strategyproofness_trial,
    "strategyproofness-exhaustive": _strategyproofness_exhaustive_trial,
    "rural": _rural_trial,
    "rotations": _rotations_trial,
    "plan": _plan_trial,
    "auctions": _auctions_trial,
    "voting": _voting_trial,
}


def _run_chunk(args: tuple[str, int, int, int, int]) -> list[Failure]:
    name, size, seed, start, stop = args
    fn = _TRIALS[name]
    failures: list[Failure] = []
    for t in range(start, stop):
        failures.extend(fn(size, seed, t))
    return failures


def _sequential() -> bool:
    return os.environ.get("MDM_NO_PARALLEL") == "1" or (os.cpu_count() or 1) == 1


def _run_trials(name: str, size: int, trials: int, seed: int) -> list[Failure]:
    if trials <= 0:
        raise InstanceError(f"trial count must be positive, got {trials}")
    chunk = max(32, -(-trials // 16))
    chunks = [
        (name, size, seed, start, min(start + chunk, trials))
        for start in range(0, trials, chunk)
    ]
    if _sequential() or len(chunks) <= 1:
        batches = [_run_chunk(c) for c in chunks]
    else:
        with ProcessPoolExecutor() as pool:
            batches = list(pool.map(_run_chunk, chunks))
    failures = [f for batch in batches for f in batch]
    failures.sort(key=lambda f: (f.instance, f.expectation, f.observed))
    return failures


def run_suite(
    suite: str,
    trials: int | str | None = None,
    size: int | None = None,
    seed: int = 0,
) -> VerificationReport:
    """Run one named suite and return its report.

    trials="exhaustive" switches the strategyproofness suite to the pinned
    full sweep of true lists against misreports; other suites reject it.
    """
    if suite not in SUITE_NAMES:
        raise InstanceError(f"unknown suite {suite!r}; pick from {', '.join(SUITE_NAMES + ('all',))}")
    name = suite
    default_size, default_trials = _DEFAULTS[suite]
    if trials == "exhaustive":
        if suite != "strategyproofness":
            raise InstanceError("only the strategyproofness suite has an exhaustive mode")
        name = "strategyproofness-exhaustive"
        n_trials = 4 * len(_all_lists(4))
    elif trials is None:
        n_trials = default_trials
    elif isinstance(trials, int):
        n_trials = trials
    else:
        raise InstanceError(f"invalid trial count {trials!r}")
    if suite == "voting":
        n_trials = min(n_trials, (size or default_size) ** 3)
    start = time.perf_counter()
    failures = _run_trials(name, size or default_size, n_trials, seed)
    wall = time.perf_counter() - start
    return VerificationReport(suite, n_trials, seed, tuple(failures), wall)


def run_all(seed: int = 0) -> list[VerificationReport]:
    """Run every suite with default sizes and trial counts."""
    return [run_suite(s, seed=seed) for s in SUITE_NAMES]

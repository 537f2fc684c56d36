"""Command-line front door over the library.

Subcommands: solve (run a mechanism on an instance file), menu (one
applicant's menu under a chosen engine), verify (seeded self-check suites),
describe (plain-text personalized menu description), states (count the
outcome maps induced by single-institution reports on the cycle-grid
family), gen (write instance files with a parameter sidecar).

Output is JSON on standard output unless --format text is given; describe
defaults to text.  Exit codes: 0 success, 1 verification failure, 2 usage
or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mdm.auctions import (
    AuctionOutcome,
    parse_auction,
    serialize_auction,
    spa_outcome,
    vcg_additive,
    vcg_unit_demand,
)
from mdm.descriptions import count_induced_functions
from mdm.generators import (
    BitProbeParams,
    CycleGridParams,
    fixture_budget_set,
    fixture_empty_menu,
    fixture_nonlocal_menu,
    fixture_nonlocal_outcome,
    gen_bit_probe_auction,
    gen_cycle_grid,
    gen_random_market,
)
from mdm.market import (
    InstanceError,
    Matching,
    Profile,
    parse_instance,
    serialize_instance,
)
from mdm.mechanisms import (
    CyclePolicy,
    ProposalPolicy,
    apda,
    ipda,
    receiver_optimal,
    serial_dictatorship,
    ttc,
)
from mdm.menus import (
    MECHANISM_TAGS,
    menu_da,
    menu_da_applicant_proposing,
    menu_da_plan,
    menu_oracle_exhaustive,
    menu_sd,
    menu_ttc,
)
from mdm.verify import SUITE_NAMES, run_all, run_suite
from mdm.voting import median_outcome, parse_votes

_MATCHING_MECHANISMS = ("sd", "ttc", "apda", "ipda", "receiver-optimal")
_AUCTION_MECHANISMS = ("spa", "vcg-additive", "vcg-unit-demand")
_ENGINES = ("da", "da-ap", "da-id", "ttc", "sd", "oracle")
_FAMILIES = (
    "random",
    "cycle-grid",
    "bit-probe",
    "nonlocal-menu",
    "nonlocal-outcome",
    "empty-menu",
    "budget-set",
)


def _print_json(payload: object) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _applicant_index(p: Profile, name: str) -> int:
    i = p.applicant_index.get(name)
    if i is None:
        raise InstanceError(f"unknown applicant {name!r}; have {', '.join(sorted(p.applicant_names))}")
    return i


def _parse_order(p: Profile, raw: str | None) -> tuple[int, ...]:
    if raw is None:
        return tuple(range(p.n_applicants))
    order = tuple(_applicant_index(p, name.strip()) for name in raw.split(","))
    if sorted(order) != list(range(p.n_applicants)):
        raise InstanceError("--order must list every applicant exactly once")
    return order


def _matching_payload(p: Profile, mu: Matching) -> dict[str, object]:
    by_d = mu.by_applicant
    matched = {
        p.applicant_names[d]: p.institution_names[h] for d, h in by_d.items()
    }
    unmatched = sorted(set(p.applicant_names) - set(matched))
    return {"matched": matched, "unmatched": unmatched}


def _matching_text(payload: dict[str, object]) -> str:
    lines = [f"{d} -> {h}" for d, h in sorted(payload["matched"].items())]
    lines += [f"{d} unmatched" for d in payload["unmatched"]]
    return "\n".join(lines) + "\n" if lines else "(empty market)\n"


def _auction_payload(out: AuctionOutcome) -> dict[str, object]:
    return {
        "allocation": [sorted(items) for items in out.allocation],
        "prices": list(out.prices),
    }


def _auction_text(payload: dict[str, object]) -> str:
    lines = []
    for i, (items, price) in enumerate(zip(payload["allocation"], payload["prices"])):
        won = ", ".join(str(j) for j in items) if items else "nothing"
        lines.append(f"bidder {i}: wins {won}, pays {price}")
    return "\n".join(lines) + "\n"


def _emit(payload: dict[str, object], fmt: str, text: str) -> None:
    if fmt == "text":
        sys.stdout.write(text)
    else:
        _print_json(payload)


def cmd_solve(args: argparse.Namespace) -> int:
    mech = args.mechanism
    raw = _read(args.instance)
    if mech in _MATCHING_MECHANISMS:
        p = parse_instance(raw)
        if mech == "sd":
            mu = serial_dictatorship(p, _parse_order(p, args.order))
        elif mech == "ttc":
            mu = ttc(p, CyclePolicy(args.policy or "lowest-index-applicant-first", args.seed))
        elif mech == "apda":
            mu = apda(p, ProposalPolicy(args.policy or "by-index", args.seed))
        elif mech == "ipda":
            mu = ipda(p, ProposalPolicy(args.policy or "by-index", args.seed))
        else:
            mu = receiver_optimal(p, args.proposing)
        payload = {"mechanism": mech, **_matching_payload(p, mu)}
        _emit(payload, args.format, _matching_text(payload))
        return 0
    if mech in _AUCTION_MECHANISMS:
        v = parse_auction(raw)
        if mech == "spa":
            if v.n_items != 1:
                raise InstanceError("a second-price auction instance needs exactly one item per bidder row")
            out = spa_outcome(tuple(row[0] for row in v.values))
        elif mech == "vcg-additive":
            out = vcg_additive(v)
        else:
            out = vcg_unit_demand(v)
        payload = {"mechanism": mech, **_auction_payload(out)}
        _emit(payload, args.format, _auction_text(payload))
        return 0
    votes = parse_votes(raw)
    chosen = median_outcome(votes)
    _emit({"mechanism": mech, "outcome": chosen}, args.format, f"outcome: {chosen}\n")
    return 0


def cmd_menu(args: argparse.Namespace) -> int:
    p = parse_instance(_read(args.instance))
    i = _applicant_index(p, args.applicant)
    if p.applicant_prefs[i]:
        sys.stderr.write(
            f"note: {args.applicant}'s submitted list is ignored; "
            "the menu quantifies over every list she could submit\n"
        )
    engine = args.engine
    if engine == "da":
        menu = menu_da(i, p)
    elif engine == "da-ap":
        menu = menu_da_applicant_proposing(i, p)
    elif engine == "da-id":
        menu = menu_da_plan(i, p).menu
    elif engine == "ttc":
        menu = menu_ttc(i, p)
    elif engine == "sd":
        menu = menu_sd(i, p, _parse_order(p, args.order))
    else:
        order = _parse_order(p, args.order) if args.mechanism == "sd" else None
        menu = menu_oracle_exhaustive(args.mechanism, i, p, order)
    names = sorted(p.institution_names[h] for h in menu)
    payload = {"applicant": args.applicant, "engine": engine, "menu": names}
    text = f"menu of {args.applicant}: " + (", ".join(names) if names else "(empty)") + "\n"
    _emit(payload, args.format, text)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    trials: int | str | None = args.trials
    if trials is not None and trials != "exhaustive":
        try:
            trials = int(trials)
        except ValueError:
            raise InstanceError(f"--trials must be an integer or 'exhaustive', got {trials!r}") from None
    if args.suite == "all":
        if trials is not None or args.n is not None:
            raise InstanceError("--suite all runs every suite at its default size and trial count")
        reports = run_all(seed=args.seed)
    else:
        reports = [run_suite(args.suite, trials=trials, size=args.n, seed=args.seed)]
    for r in reports:
        sys.stderr.write(r.summary() + "\n")
    if args.format == "text":
        for r in reports:
            sys.stdout.write(r.summary() + "\n")
            for f in r.failures:
                sys.stdout.write(f"  expected: {f.expectation}\n  observed: {f.observed}\n")
                sys.stdout.write("  instance: " + " ".join(f.instance.split()) + "\n")
    else:
        docs = [r.as_dict() for r in reports]
        _print_json(docs[0] if len(docs) == 1 else docs)
    return 0 if all(r.ok for r in reports) else 1


def cmd_describe(args: argparse.Namespace) -> int:
    p = parse_instance(_read(args.instance))
    i = _applicant_index(p, args.applicant)
    name = p.applicant_names[i]
    hypothetical = _matching_payload(p, ipda(p.with_prefs(i, ())))
    hypothetical["unmatched"] = [d for d in hypothetical["unmatched"] if d != name]
    menu = sorted(p.institution_names[h] for h in menu_da(i, p))
    lines = [f"Menu description for {name}", ""]
    lines.append("If your preference list is ignored, institutions propose and the others end up matched as:")
    for d, h in sorted(hypothetical["matched"].items()):
        lines.append(f"  {d} -> {h}")
    for d in hypothetical["unmatched"]:
        lines.append(f"  {d} unmatched")
    lines.append("")
    if menu:
        lines.append("You have earned admission at: " + ", ".join(menu) + ".")
        lines.append(
            "You will be matched to whichever of these you rank highest; "
            "if you rank none of them, you will remain unmatched."
        )
    else:
        lines.append("You have not earned admission anywhere: you will remain unmatched whatever you submit.")
    text = "\n".join(lines) + "\n"
    if args.format == "json":
        _print_json({"applicant": name, "menu": menu, "hypothetical": hypothetical, "text": text})
    else:
        sys.stdout.write(text)
    return 0


def cmd_states(args: argparse.Namespace) -> int:
    observed = count_induced_functions(args.n)
    predicted = 2 ** ((args.n // 4) ** 2)
    ok = observed == predicted
    payload = {
        "family": args.family,
        "n": args.n,
        "observed": observed,
        "predicted": predicted,
        "ok": ok,
    }
    text = (
        f"family {args.family}, n={args.n}: {observed} outcome maps induced by "
        f"single-institution reports, predicted {predicted}: {'ok' if ok else 'MISMATCH'}\n"
    )
    _emit(payload, args.format, text)
    return 0 if ok else 1


def _parse_subsets(raw: str | None, k: int) -> tuple[tuple[int, ...], ...]:
    if raw is None:
        return ((),) * k
    groups = raw.split("/")
    return tuple(
        tuple(int(x) for x in g.split(",") if x.strip() != "") for g in groups
    )


def _parse_bits(raw: str) -> tuple[tuple[int, ...], ...]:
    rows = raw.split("/")
    try:
        return tuple(tuple(int(c) for c in row) for row in rows)
    except ValueError:
        raise InstanceError(f"--bits rows must be strings of 0/1 separated by '/', got {raw!r}") from None


def _gen_instance(args: argparse.Namespace) -> tuple[str, dict[str, object]]:
    family = args.family
    if family == "random":
        if args.n is None:
            raise InstanceError("--n is required for the random family")
        p = gen_random_market(args.n, args.seed, args.truncation_prob)
        meta: dict[str, object] = {
            "family": family,
            "n": args.n,
            "seed": args.seed,
            "truncation_prob": args.truncation_prob,
        }
        return serialize_instance(p), meta
    if family == "cycle-grid":
        if args.n is None:
            raise InstanceError("--n is required for the cycle-grid family")
        k = args.n // 4
        subsets = _parse_subsets(args.subsets, k)
        truncate = (
            tuple(int(b) != 0 for b in args.truncate.split(","))
            if args.truncate
            else (False,) * k
        )
        params = CycleGridParams(args.n, subsets, truncate)
        meta = {
            "family": family,
            "n": args.n,
            "subsets": [list(s) for s in subsets],
            "truncate": [int(b) for b in truncate],
        }
        return serialize_instance(gen_cycle_grid(params)), meta
    if family == "bit-probe":
        if args.bits is None or args.probe is None:
            raise InstanceError("--bits and --probe are required for the bit-probe family")
        bits = _parse_bits(args.bits)
        try:
            pq = tuple(int(x) for x in args.probe.split(","))
        except ValueError:
            raise InstanceError(f"--probe must be 'row,col', got {args.probe!r}") from None
        if len(pq) != 2:
            raise InstanceError(f"--probe must be 'row,col', got {args.probe!r}")
        params = BitProbeParams(len(bits), bits, (pq[0], pq[1]))
        meta = {
            "family": family,
            "k": len(bits),
            "bits": [list(r) for r in bits],
            "probe": list(pq),
        }
        return serialize_auction(gen_bit_probe_auction(params)), meta
    if family in ("nonlocal-menu", "nonlocal-outcome"):
        fixture = fixture_nonlocal_menu if family == "nonlocal-menu" else fixture_nonlocal_outcome
        base, alt = fixture()
        p = base if args.variant == "base" else alt
        return serialize_instance(p), {"family": family, "variant": args.variant}
    p = fixture_empty_menu() if family == "empty-menu" else fixture_budget_set()
    return serialize_instance(p), {"family": family}


def cmd_gen(args: argparse.Namespace) -> int:
    body, meta = _gen_instance(args)
    if args.out is None:
        _print_json({"instance": json.loads(body), "metadata": meta})
        return 0
    out = Path(args.out)
    out.write_text(body, encoding="utf-8")
    stem = out.name[: -len(".json")] if out.name.endswith(".json") else out.name
    sidecar = out.with_name(stem + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sys.stderr.write(f"wrote {out} and {sidecar}\n")
    return 0


def _add_format(sub: argparse.ArgumentParser, default: str = "json") -> None:
    sub.add_argument("--format", choices=("json", "text"), default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdm", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="run a mechanism on an instance file")
    solve.add_argument("--mechanism", required=True, choices=_MATCHING_MECHANISMS + _AUCTION_MECHANISMS + ("median",))
    solve.add_argument("--order", help="comma-separated applicant names (sd picking order)")
    solve.add_argument("--policy", help="tie-breaking policy for ttc/apda/ipda")
    solve.add_argument("--proposing", choices=("institutions", "applicants"), default="institutions",
                       help="proposing side for receiver-optimal")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("instance")
    _add_format(solve)
    solve.set_defaults(fn=cmd_solve)

    menu = commands.add_parser("menu", help="one applicant's menu under a chosen engine")
    menu.add_argument("--engine", required=True, choices=_ENGINES)
    menu.add_argument("--applicant", required=True)
    menu.add_argument("--mechanism", choices=MECHANISM_TAGS, default="apda",
                      help="mechanism probed by the oracle engine")
    menu.add_argument("--order", help="comma-separated applicant names (sd engine)")
    menu.add_argument("instance")
    _add_format(menu)
    menu.set_defaults(fn=cmd_menu)

    verify = commands.add_parser("verify", help="run seeded self-check suites")
    verify.add_argument("--suite", required=True, choices=SUITE_NAMES + ("all",))
    verify.add_argument("--n", type=int, help="agents per side for market suites")
    verify.add_argument("--trials", help="trial count, or 'exhaustive' for strategyproofness")
    verify.add_argument("--seed", type=int, default=0)
    _add_format(verify)
    verify.set_defaults(fn=cmd_verify)

    describe = commands.add_parser("describe", help="personalized plain-text menu description")
    describe.add_argument("--applicant", required=True)
    describe.add_argument("instance")
    _add_format(describe, default="text")
    describe.set_defaults(fn=cmd_describe)

    states = commands.add_parser("states", help="count outcome maps induced on the cycle-grid family")
    states.add_argument("--family", choices=("cycle-grid",), default="cycle-grid")
    states.add_argument("--n", type=int, required=True, choices=(4, 8))
    _add_format(states)
    states.set_defaults(fn=cmd_states)

    gen = commands.add_parser("gen", help="write an instance file plus a parameter sidecar")
    gen.add_argument("--family", required=True, choices=_FAMILIES)
    gen.add_argument("--n", type=int)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--truncation-prob", type=float, default=0.0)
    gen.add_argument("--subsets", help="cycle-grid: '/'-separated comma lists, one group per top cycle")
    gen.add_argument("--truncate", help="cycle-grid: comma-separated 0/1 bits, one per top cycle")
    gen.add_argument("--bits", help="bit-probe: '/'-separated rows of 0/1 characters")
    gen.add_argument("--probe", help="bit-probe: 'row,col', zero-based")
    gen.add_argument("--variant", choices=("base", "alt"), default="base",
                     help="which profile of a paired fixture to emit")
    gen.add_argument("--out", help="output path; omit to print instance and metadata together")
    gen.set_defaults(fn=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

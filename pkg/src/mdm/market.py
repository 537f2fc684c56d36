"""Two-sided market data model: profiles, matchings, and stability diagnostics.

Agents are addressed by string names in instance files and by dense integer
indices everywhere else. Preference and priority lists hold indices into the
opposite side, best first; a partial list marks every omitted agent as
unacceptable, and "unmatched" is always the absence of a pair, never a
sentinel agent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

APPLICANT = "applicant"
INSTITUTION = "institution"

# Names containing this marker are reserved for internally generated agents.
RESERVED_MARKER = "@"


class InstanceError(ValueError):
    """An instance file, Profile, or Matching violates the data contract."""


class AgentId(NamedTuple):
    """One agent: which side it is on and its index within that side."""

    side: str
    index: int


class BlockingPair(NamedTuple):
    """A mutually acceptable pair that would rather match with each other."""

    applicant: int
    institution: int


@dataclass(frozen=True)
class Profile:
    """Applicants' preference lists plus institutions' priority lists.

    Immutable after construction; index lookups are cached on first use.
    ``capacities`` defaults to one seat per institution.
    """

    applicant_names: tuple[str, ...]
    institution_names: tuple[str, ...]
    applicant_prefs: tuple[tuple[int, ...], ...]
    institution_prios: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "applicant_names", tuple(self.applicant_names))
        object.__setattr__(self, "institution_names", tuple(self.institution_names))
        object.__setattr__(
            self, "applicant_prefs", tuple(tuple(l) for l in self.applicant_prefs)
        )
        object.__setattr__(
            self, "institution_prios", tuple(tuple(l) for l in self.institution_prios)
        )
        caps = tuple(self.capacities) or (1,) * len(self.institution_names)
        object.__setattr__(self, "capacities", caps)

    @property
    def n_applicants(self) -> int:
        return len(self.applicant_names)

    @property
    def n_institutions(self) -> int:
        return len(self.institution_names)

    @property
    def unit_capacity(self) -> bool:
        return all(c == 1 for c in self.capacities)

    @cached_property
    def applicant_rank(self) -> tuple[dict[int, int], ...]:
        """Per applicant: institution index -> rank (0 is best); unlisted is absent."""
        return tuple({h: r for r, h in enumerate(l)} for l in self.applicant_prefs)

    @cached_property
    def institution_rank(self) -> tuple[dict[int, int], ...]:
        """Per institution: applicant index -> rank (0 is best); unlisted is absent."""
        return tuple({d: r for r, d in enumerate(l)} for l in self.institution_prios)

    @cached_property
    def applicant_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.applicant_names)}

    @cached_property
    def institution_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.institution_names)}

    def agent(self, name: str) -> AgentId:
        """Look an agent up by name on either side."""
        if name in self.applicant_index:
            return AgentId(APPLICANT, self.applicant_index[name])
        if name in self.institution_index:
            return AgentId(INSTITUTION, self.institution_index[name])
        raise InstanceError(f"unknown agent name {name!r}")

    def with_prefs(self, applicant: int, prefs: Iterable[int]) -> Profile:
        """Copy of this profile with one applicant's list replaced."""
        lists = list(self.applicant_prefs)
        lists[applicant] = tuple(prefs)
        return replace(self, applicant_prefs=tuple(lists))

    def with_prios(self, institution: int, prios: Iterable[int]) -> Profile:
        """Copy of this profile with one institution's list replaced."""
        lists = list(self.institution_prios)
        lists[institution] = tuple(prios)
        return replace(self, institution_prios=tuple(lists))

    def transposed(self) -> Profile:
        """Swap the two sides. Requires unit capacities."""
        if not self.unit_capacity:
            raise InstanceError("cannot transpose a profile with capacities above 1")
        return Profile(
            applicant_names=self.institution_names,
            institution_names=self.applicant_names,
            applicant_prefs=self.institution_prios,
            institution_prios=self.applicant_prefs,
        )


@dataclass(frozen=True)
class Matching:
    """A partial assignment stored as (applicant index, institution index) pairs."""

    pairs: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", frozenset(self.pairs))

    @classmethod
    def of(cls, assignment: Mapping[int, int]) -> Matching:
        """Build from an applicant -> institution mapping."""
        return cls(frozenset(assignment.items()))

    @cached_property
    def by_applicant(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for d, h in self.pairs:
            if d in out:
                raise InstanceError(f"applicant {d} is matched twice")
            out[d] = h
        return out

    @cached_property
    def by_institution(self) -> dict[int, tuple[int, ...]]:
        """Occupants per institution, sorted by applicant index."""
        out: dict[int, list[int]] = {}
        for d, h in self.pairs:
            out.setdefault(h, []).append(d)
        return {h: tuple(sorted(ds)) for h, ds in out.items()}

    def institution_of(self, applicant: int) -> int | None:
        return self.by_applicant.get(applicant)


def validate_profile(p: Profile) -> None:
    """Raise InstanceError listing every violated Profile invariant."""
    problems: list[str] = []
    n, m = p.n_applicants, p.n_institutions
    if len(p.applicant_prefs) != n:
        problems.append("applicant list count does not match applicant name count")
    if len(p.institution_prios) != m:
        problems.append("institution list count does not match institution name count")
    if len(p.capacities) != m:
        problems.append("capacity count does not match institution count")
    for side, names in ((APPLICANT, p.applicant_names), (INSTITUTION, p.institution_names)):
        seen: set[str] = set()
        for name in names:
            if not name:
                problems.append(f"empty {side} name")
            if name in seen:
                problems.append(f"duplicate {side} name {name!r}")
            seen.add(name)
    shared = set(p.applicant_names) & set(p.institution_names)
    for name in sorted(shared):
        problems.append(f"name {name!r} is used on both sides")
    for d, prefs in enumerate(p.applicant_prefs):
        if len(set(prefs)) != len(prefs):
            problems.append(f"applicant {d} lists some institution twice")
        for h in prefs:
            if not 0 <= h < m:
                problems.append(f"applicant {d} lists invalid institution index {h}")
    for h, prios in enumerate(p.institution_prios):
        if len(set(prios)) != len(prios):
            problems.append(f"institution {h} lists some applicant twice")
        for d in prios:
            if not 0 <= d < n:
                problems.append(f"institution {h} lists invalid applicant index {d}")
    for h, cap in enumerate(p.capacities):
        if not isinstance(cap, int) or isinstance(cap, bool) or cap < 1:
            problems.append(f"institution {h} has invalid capacity {cap!r}")
    if problems:
        raise InstanceError("\n".join(problems))


def validate_matching(p: Profile, m: Matching) -> None:
    """Raise InstanceError if m is not a valid (possibly partial) matching for p."""
    problems: list[str] = []
    seen_applicants: set[int] = set()
    load: dict[int, int] = {}
    for d, h in sorted(m.pairs):
        if not (0 <= d < p.n_applicants and 0 <= h < p.n_institutions):
            problems.append(f"pair ({d}, {h}) references a nonexistent agent")
            continue
        if d in seen_applicants:
            problems.append(f"applicant {d} is matched twice")
        seen_applicants.add(d)
        load[h] = load.get(h, 0) + 1
        if h not in p.applicant_rank[d]:
            problems.append(f"applicant {d} does not list institution {h}")
        if d not in p.institution_rank[h]:
            problems.append(f"institution {h} does not list applicant {d}")
    for h, count in sorted(load.items()):
        if count > p.capacities[h]:
            problems.append(f"institution {h} holds {count} applicants, capacity {p.capacities[h]}")
    if problems:
        raise InstanceError("\n".join(problems))


def blocking_pairs(p: Profile, m: Matching) -> list[BlockingPair]:
    """All pairs that block m under p; empty exactly when m is stable.

    A pair (d, h) blocks when both list each other, d prefers h to her
    assignment (unmatched counts below every listed institution), and h
    either has a free seat or ranks d above one of its occupants.
    """
    validate_matching(p, m)
    occupants = m.by_institution
    out: list[BlockingPair] = []
    for d, prefs in enumerate(p.applicant_prefs):
        current = m.institution_of(d)
        for h in prefs:
            if current is not None and p.applicant_rank[d][h] >= p.applicant_rank[d][current]:
                continue
            rank_d = p.institution_rank[h].get(d)
            if rank_d is None:
                continue
            held = occupants.get(h, ())
            if len(held) < p.capacities[h]:
                out.append(BlockingPair(d, h))
            elif any(p.institution_rank[h][d2] > rank_d for d2 in held):
                out.append(BlockingPair(d, h))
    return sorted(out)


def matched_sets(m: Matching) -> tuple[frozenset[int], frozenset[int]]:
    """Projections of a matching onto each side."""
    return (
        frozenset(d for d, _ in m.pairs),
        frozenset(h for _, h in m.pairs),
    )


def _check_name(name: object, path: str, problems: list[str]) -> None:
    if not isinstance(name, str) or not name:
        problems.append(f"{path}: name must be a nonempty string")
    elif RESERVED_MARKER in name:
        problems.append(f"{path}: name {name!r} uses the reserved marker {RESERVED_MARKER!r}")


def _check_records(records: object, path: str, list_key: str, problems: list[str]) -> list[dict]:
    if not isinstance(records, list):
        problems.append(f"{path}: expected a list")
        return []
    allowed = {"name", list_key} | ({"capacity"} if list_key == "prios" else set())
    out: list[dict] = []
    for k, rec in enumerate(records):
        where = f"{path}[{k}]"
        if not isinstance(rec, dict):
            problems.append(f"{where}: expected an object")
            continue
        for key in sorted(set(rec) - allowed):
            problems.append(f"{where}: unknown field {key!r}")
        if "name" not in rec:
            problems.append(f"{where}: missing name")
            continue
        _check_name(rec.get("name"), where, problems)
        ranked = rec.get(list_key, [])
        if not isinstance(ranked, list) or not all(isinstance(x, str) for x in ranked):
            problems.append(f"{where}.{list_key}: expected a list of names")
            continue
        out.append(rec)
    return out


def parse_instance(raw: bytes | str) -> Profile:
    """Parse the JSON instance format into a validated Profile.

    Agents are indexed in lexicographic name order, so parsing a serialized
    profile reproduces it exactly. Every problem is reported with the path
    of the offending entry.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise InstanceError(f"malformed JSON: {err}") from err
    if not isinstance(doc, dict):
        raise InstanceError("top level: expected an object")
    problems: list[str] = []
    for key in sorted(set(doc) - {"applicants", "institutions"}):
        problems.append(f"top level: unknown field {key!r}")
    applicants = _check_records(doc.get("applicants", []), "applicants", "prefs", problems)
    institutions = _check_records(doc.get("institutions", []), "institutions", "prios", problems)
    if problems:
        raise InstanceError("\n".join(problems))

    def index_by_name(records: list[dict], path: str) -> dict[str, int]:
        names = [rec["name"] for rec in records]
        for k, name in enumerate(names):
            if names.index(name) != k:
                problems.append(f"{path}[{k}]: duplicate name {name!r}")
        return {name: i for i, name in enumerate(sorted(set(names)))}

    d_index = index_by_name(applicants, "applicants")
    h_index = index_by_name(institutions, "institutions")
    for name in sorted(set(d_index) & set(h_index)):
        problems.append(f"name {name!r} is used on both sides")

    def resolve(rec: dict, list_key: str, target: dict[str, int], path: str) -> tuple[int, ...]:
        ranked: list[int] = []
        for k, name in enumerate(rec.get(list_key, [])):
            if name not in target:
                problems.append(f"{path}.{list_key}[{k}]: unknown agent name {name!r}")
            elif target[name] in ranked:
                problems.append(f"{path}.{list_key}[{k}]: duplicate entry {name!r}")
            else:
                ranked.append(target[name])
        return tuple(ranked)

    prefs: list[tuple[int, ...]] = [()] * len(d_index)
    prios: list[tuple[int, ...]] = [()] * len(h_index)
    caps: list[int] = [1] * len(h_index)
    for k, rec in enumerate(applicants):
        prefs[d_index[rec["name"]]] = resolve(rec, "prefs", h_index, f"applicants[{k}]")
    for k, rec in enumerate(institutions):
        prios[h_index[rec["name"]]] = resolve(rec, "prios", d_index, f"institutions[{k}]")
        cap = rec.get("capacity", 1)
        if not isinstance(cap, int) or isinstance(cap, bool) or cap < 1:
            problems.append(f"institutions[{k}].capacity: must be an integer >= 1, got {cap!r}")
        else:
            caps[h_index[rec["name"]]] = cap
    if problems:
        raise InstanceError("\n".join(problems))
    profile = Profile(
        applicant_names=tuple(sorted(d_index)),
        institution_names=tuple(sorted(h_index)),
        applicant_prefs=tuple(prefs),
        institution_prios=tuple(prios),
        capacities=tuple(caps),
    )
    validate_profile(profile)
    return profile


def serialize_instance(p: Profile) -> str:
    """Serialize a Profile to the JSON instance format, names sorted for determinism."""
    validate_profile(p)
    applicants = []
    for name in sorted(p.applicant_names):
        d = p.applicant_index[name]
        prefs = [p.institution_names[h] for h in p.applicant_prefs[d]]
        applicants.append({"name": name, "prefs": prefs})
    institutions = []
    for name in sorted(p.institution_names):
        h = p.institution_index[name]
        rec: dict = {"name": name, "prios": [p.applicant_names[d] for d in p.institution_prios[h]]}
        if p.capacities[h] != 1:
            rec["capacity"] = p.capacities[h]
        institutions.append(rec)
    doc = {"applicants": applicants, "institutions": institutions}
    return json.dumps(doc, indent=2) + "\n"

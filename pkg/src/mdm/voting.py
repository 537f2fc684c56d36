"""Median voting over a candidate line, with menus.

An odd number of voters each name a candidate in 1..C and the median vote
wins. Holding the others fixed, a voter's menu is the interval between the
two middle values of the remaining votes: she can drag the median anywhere
inside it, and her best achievable point is the clamp of her own vote into
that interval. That clamp always equals the median of the full profile,
which is what makes truthful voting safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from mdm.market import InstanceError


@dataclass(frozen=True)
class VoteProfile:
    """Votes on the candidate line 1..candidates, one per voter, odd count."""

    candidates: int
    votes: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "votes", tuple(self.votes))

    @property
    def n_voters(self) -> int:
        return len(self.votes)


def validate_votes(v: VoteProfile) -> None:
    """Raise InstanceError unless the profile fits the voting environment."""
    problems: list[str] = []
    if not isinstance(v.candidates, int) or isinstance(v.candidates, bool) or v.candidates < 1:
        problems.append(f"candidates: must be an integer >= 1, got {v.candidates!r}")
    if v.n_voters % 2 == 0:
        problems.append(f"votes: need an odd number of voters, got {v.n_voters}")
    else:
        for k, vote in enumerate(v.votes):
            if not isinstance(vote, int) or isinstance(vote, bool):
                problems.append(f"votes[{k}]: expected an integer, got {vote!r}")
            elif isinstance(v.candidates, int) and not 1 <= vote <= v.candidates:
                problems.append(f"votes[{k}]: {vote} is outside 1..{v.candidates}")
    if problems:
        raise InstanceError("\n".join(problems))


def median_outcome(v: VoteProfile) -> int:
    """The elected candidate: the middle element of the sorted votes."""
    validate_votes(v)
    return sorted(v.votes)[v.n_voters // 2]


def median_menu(v: VoteProfile, i: int) -> tuple[int, int]:
    """Voter i's menu as an inclusive interval (lo, hi), ignoring her vote.

    With the other votes sorted, the interval spans their two middle
    elements. For three voters that is simply (min, max) of the other two.
    """
    validate_votes(v)
    if not 0 <= i < v.n_voters:
        raise InstanceError(f"no voter {i}")
    others = sorted(v.votes[:i] + v.votes[i + 1 :])
    mid = len(others) // 2
    if not others:
        return (1, v.candidates)
    return (others[mid - 1], others[mid])


def median_menu_select(menu: tuple[int, int], own: int) -> int:
    """The candidate from the menu interval closest to the voter's own vote."""
    lo, hi = menu
    if lo > hi:
        raise InstanceError(f"empty menu interval {menu!r}")
    return min(max(own, lo), hi)


def parse_votes(raw: bytes | str) -> VoteProfile:
    """Parse the JSON vote format {"C": ..., "votes": [...]}."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise InstanceError(f"malformed JSON: {err}") from err
    if not isinstance(doc, dict):
        raise InstanceError("top level: expected an object")
    problems = [f"top level: unknown field {key!r}" for key in sorted(set(doc) - {"C", "votes"})]
    if "C" not in doc:
        problems.append("top level: missing field 'C'")
    votes = doc.get("votes", [])
    if not isinstance(votes, list):
        problems.append("votes: expected a list")
        votes = []
    if problems:
        raise InstanceError("\n".join(problems))
    profile = VoteProfile(candidates=doc["C"], votes=tuple(votes))
    validate_votes(profile)
    return profile


def serialize_votes(v: VoteProfile) -> str:
    """Serialize a VoteProfile to the JSON vote format."""
    validate_votes(v)
    return json.dumps({"C": v.candidates, "votes": list(v.votes)}, indent=2) + "\n"

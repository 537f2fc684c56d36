"""Median voting: outcome, per-voter menu interval, clamp selection."""

import itertools

import pytest

from oracles import median_reference

from mdm.voting import (
    VoteProfile,
    median_menu,
    median_menu_select,
    median_outcome,
    parse_votes,
    serialize_votes,
    validate_votes,
)
from mdm.market import InstanceError


def test_median_outcome_examples():
    assert median_outcome(VoteProfile(5, (2, 5, 3))) == 3
    assert median_outcome(VoteProfile(9, (9, 1, 1))) == 1
    assert median_outcome(VoteProfile(4, (4,))) == 4


def test_median_matches_reference():
    for votes in itertools.product(range(1, 5), repeat=5):
        assert median_outcome(VoteProfile(4, votes)) == median_reference(votes)


def test_menu_is_interval_between_middle_others():
    v = VoteProfile(9, (4, 8, 2, 6, 7))
    # others of voter 0 sorted: 2,6,7,8; the middle two bound the menu
    assert median_menu(v, 0) == (6, 7)


def test_menu_of_single_voter_is_everything():
    assert median_menu(VoteProfile(7, (3,)), 0) == (1, 7)


def test_selection_clamps_to_interval():
    assert median_menu_select((2, 5), 1) == 2
    assert median_menu_select((2, 5), 7) == 5
    assert median_menu_select((2, 5), 4) == 4


def test_selection_rejects_inverted_interval():
    with pytest.raises(InstanceError):
        median_menu_select((5, 2), 3)


def test_menu_selection_equals_full_recount():
    for votes in itertools.product(range(1, 6), repeat=3):
        v = VoteProfile(5, votes)
        for i in range(3):
            menu = median_menu(v, i)
            for own in range(1, 6):
                swapped = VoteProfile(5, tuple(own if k == i else votes[k] for k in range(3)))
                assert median_menu_select(menu, own) == median_outcome(swapped)


def test_no_profitable_single_peaked_deviation():
    for votes in itertools.product(range(1, 6), repeat=3):
        v = VoteProfile(5, votes)
        honest = median_outcome(v)
        for i in range(3):
            peak = votes[i]
            for own in range(1, 6):
                swapped = VoteProfile(5, tuple(own if k == i else votes[k] for k in range(3)))
                assert abs(median_outcome(swapped) - peak) >= abs(honest - peak)


def test_validate_rejects_even_vote_count():
    with pytest.raises(InstanceError):
        validate_votes(VoteProfile(5, (1, 2)))


def test_validate_rejects_out_of_range_vote():
    with pytest.raises(InstanceError):
        validate_votes(VoteProfile(3, (1, 4, 2)))


def test_parse_serialize_round_trip():
    v = VoteProfile(6, (1, 6, 3))
    assert parse_votes(serialize_votes(v)) == v


def test_parse_rejects_missing_fields():
    with pytest.raises(InstanceError):
        parse_votes('{"votes": [1, 2, 3]}')

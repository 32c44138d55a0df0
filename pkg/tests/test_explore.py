import pytest

from digilock.explore import (
    DepthExceeded,
    enumerate_small_traces,
)


def test_depth_zero_has_no_open():
    enum = enumerate_small_traces(depth=0, seed=0)
    assert enum.states_explored == 1
    assert not enum.opened
    assert enum.sound


def test_depth_cap_enforced():
    with pytest.raises(DepthExceeded):
        enumerate_small_traces(depth=9)


def test_state_budget_enforced():
    with pytest.raises(DepthExceeded):
        enumerate_small_traces(depth=6, state_budget=50)


def test_shallow_depths_cannot_open():
    # auth, provider key, challenge, and ack each need a delivery: the
    # locker cannot open in fewer than four moves even with replays
    for depth in (1, 2, 3):
        enum = enumerate_small_traces(depth=depth, seed=0)
        assert enum.sound
        assert not enum.opened, depth


def test_depth_four_opens_only_with_genuine_material():
    # shortest opening schedule: the adversary replays the recorded
    # provider key instead of waiting for the request hop; that is still
    # both genuine keys plus genuine consent
    enum = enumerate_small_traces(depth=4, seed=0)
    assert enum.sound
    assert enum.opened
    for outcome in enum.opened:
        assert outcome.genuine == (True, True, True)


def test_depth_five_reaches_open_honestly():
    enum = enumerate_small_traces(depth=5, seed=0)
    assert enum.sound
    assert enum.opened
    for outcome in enum.opened:
        assert outcome.genuine == (True, True, True)


def test_adversary_only_never_opens():
    enum = enumerate_small_traces(depth=6, seed=0, include_honest_user=False)
    assert not enum.opened
    assert enum.sound
    # it does reach a challenge via the replayed auth request
    assert any(o.locker_phase == "challenge-sent" for o in enum.outcomes)


def test_enumeration_is_deterministic():
    a = enumerate_small_traces(depth=4, seed=3)
    b = enumerate_small_traces(depth=4, seed=3)
    assert a.outcomes == b.outcomes
    assert a.states_explored == b.states_explored
    assert a.transitions == b.transitions

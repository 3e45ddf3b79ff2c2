"""Event logs replay to byte-identical hands, and tampering is caught."""

import copy
import random

import pytest

from holotable.cards import new_deck, shuffle
from holotable.engine import TableConfig
from holotable.replay import ReplayError, replay_hand, split_hands, verify_log
from helpers import random_policy_hand

CFG = TableConfig(small_blind=5, big_blind=10, starting_stack=1000)


def random_hand_events(seed: int) -> list[dict]:
    rng = random.Random(seed)
    deck = shuffle(new_deck(), rng.getrandbits(64))
    seats = rng.sample(range(6), rng.randint(2, 6))
    stacks = {i: rng.randint(15, 400) for i in seats}
    button = rng.choice(seats)
    state = random_policy_hand(rng, CFG, stacks, button, deck, hand_id=seed)
    return state.events


class TestReplay:
    def test_random_hands_replay_exactly(self):
        for seed in range(1, 120):
            events = random_hand_events(seed)
            state = replay_hand(events)
            assert state.events == events
            assert state.complete

    def test_tampered_amount_is_caught(self):
        events = copy.deepcopy(random_hand_events(5))
        award = next(e for e in events if e["type"] == "award")
        award["amount"] += 1
        with pytest.raises(ReplayError):
            replay_hand(events)

    def test_illegal_inserted_action_is_caught(self):
        events = copy.deepcopy(random_hand_events(8))
        first_action = next(
            i for i, e in enumerate(events) if e["type"] == "action"
        )
        forged = dict(events[first_action])
        forged["kind"] = "raise_to"
        forged["amount"] = 10**9
        forged["to"] = 10**9
        events[first_action] = forged
        with pytest.raises(ReplayError):
            replay_hand(events)

    def test_out_of_turn_action_is_caught(self):
        events = copy.deepcopy(random_hand_events(9))
        actions = [e for e in events if e["type"] == "action"]
        if len(actions) >= 2:
            a, b = actions[0], actions[1]
            a_index, b_index = events.index(a), events.index(b)
            events[a_index], events[b_index] = b, a
            with pytest.raises(ReplayError):
                replay_hand(events)

    def test_verify_log_counts_hands(self):
        log = []
        log.append({"type": "session_start", "seats": 6})
        for seed in (1, 2, 3):
            log.extend(random_hand_events(seed * 100))
        assert verify_log(log) == 3

    def test_split_hands_ignores_server_records(self):
        log = [{"type": "join", "role": "seat"}, *random_hand_events(3)]
        groups = split_hands(log)
        assert len(groups) == 1
        assert groups[0][0]["type"] == "hand_start"

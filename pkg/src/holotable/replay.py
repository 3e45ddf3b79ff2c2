"""Re-drive hands from their event logs.

A hand's log pins everything: stacks, button, blinds, the dealt cards and the
action sequence. Replaying feeds those actions back through the engine, which
re-validates legality and chip conservation, and the regenerated records must
equal the originals byte for byte. Any divergence means an illegal transition
or a determinism break.
"""

from __future__ import annotations

from .cards import CANONICAL_ORDER, Deck, parse_card
from .engine import (
    BET,
    RAISE_TO,
    Action,
    HandState,
    TableConfig,
    apply_action,
    new_hand,
    validate_state,
)


class ReplayError(Exception):
    pass


def split_hands(records: list[dict]) -> list[list[dict]]:
    """Group hand-scoped records by hand_id, in first-seen order."""
    hands: dict[int, list[dict]] = {}
    for record in records:
        hand_id = record.get("hand_id")
        if hand_id is None:
            continue
        hands.setdefault(hand_id, []).append(record)
    return list(hands.values())


def _deck_from_log(records: list[dict]) -> Deck:
    """Rebuild a deck whose deal order reproduces the logged cards.

    The engine deals two single-card passes, then the board streets; filler
    for the undealt remainder comes from the canonical order.
    """
    deal_holes = [r for r in records if r["type"] == "deal_hole"]
    first_pass = [parse_card(r["cards"][0]) for r in deal_holes]
    second_pass = [parse_card(r["cards"][1]) for r in deal_holes]
    board = [
        parse_card(text)
        for r in records
        if r["type"] == "street"
        for text in r["cards"]
    ]
    sequence = first_pass + second_pass + board
    used = set(sequence)
    sequence += [c for c in CANONICAL_ORDER if c not in used]
    if tuple(sequence) == CANONICAL_ORDER:
        sequence[-1], sequence[-2] = sequence[-2], sequence[-1]
    return Deck(sequence)


def replay_hand(records: list[dict], action_timeout: float = 30.0) -> HandState:
    """Replay one hand's records; raises ReplayError on any mismatch."""
    if not records or records[0]["type"] != "hand_start":
        raise ReplayError("log does not begin with hand_start")
    start = records[0]
    stacks = {entry["seat"]: entry["stack"] for entry in start["seats"]}
    config = TableConfig(
        small_blind=start["sb"],
        big_blind=start["bb"],
        starting_stack=max(max(stacks.values()), start["bb"]),
        seat_count=6,
        action_timeout=action_timeout,
    )
    deck = _deck_from_log(records)

    try:
        state = new_hand(
            config, stacks, start["button"], deck, hand_id=start["hand_id"]
        )
        validate_state(state)
        for record in records:
            if record["type"] != "action":
                continue
            amount = record.get("to") if record["kind"] in (BET, RAISE_TO) else None
            action = Action(record["kind"], amount)
            apply_action(state, record["seat"], action, auto=record.get("auto", False))
            validate_state(state)
    except ReplayError:
        raise
    except Exception as exc:
        raise ReplayError(f"hand {start['hand_id']}: {exc}") from exc

    if state.events != records:
        for i, (got, want) in enumerate(zip(state.events, records)):
            if got != want:
                raise ReplayError(
                    f"hand {start['hand_id']} diverges at seq {i}: "
                    f"replayed {got!r} != logged {want!r}"
                )
        raise ReplayError(
            f"hand {start['hand_id']}: length mismatch "
            f"({len(state.events)} replayed vs {len(records)} logged)"
        )
    return state


def verify_log(records: list[dict], action_timeout: float = 30.0) -> int:
    """Replay every hand in a session log; returns the number verified."""
    hands = split_hands(records)
    for hand_records in hands:
        replay_hand(hand_records, action_timeout=action_timeout)
    return len(hands)

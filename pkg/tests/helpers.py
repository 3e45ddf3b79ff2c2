"""Shared engine test helpers: stacked decks and scripted hand drivers."""

from __future__ import annotations

import random

from holotable.cards import CANONICAL_ORDER, Card, Deck, parse_cards
from holotable.engine import (
    Action,
    HandState,
    TableConfig,
    apply_action,
    legal_actions,
    new_hand,
    validate_state,
)


def stacked_deck(
    dealt_seats: list[int],
    button: int,
    holes: dict[int, str] | None = None,
    board: str = "",
) -> Deck:
    """A deck that deals the given holes and board for this seat layout.

    Mirrors the engine's deal order: two single-card passes starting left of
    the button, then flop, turn, river. Unspecified cards are filled from the
    canonical order.
    """
    holes = {seat: parse_cards(text) for seat, text in (holes or {}).items()}
    board_cards = parse_cards(board)
    order = sorted(dealt_seats, key=lambda s: (s - button - 1) % 6)

    used: set[Card] = set()
    for cards in holes.values():
        used.update(cards)
    used.update(board_cards)
    filler = iter(c for c in CANONICAL_ORDER if c not in used)

    sequence = []
    for pass_no in (0, 1):
        for seat in order:
            if seat in holes:
                sequence.append(holes[seat][pass_no])
            else:
                sequence.append(next(filler))
    sequence.extend(board_cards)
    sequence.extend(filler)
    # Anything explicitly given but not yet placed (board shorter than 5 etc.)
    sequence.extend(c for c in CANONICAL_ORDER if c not in set(sequence))
    # The engine refuses a canonical-order deck as unshuffled; the tail is
    # never dealt, so swapping it keeps the stacked prefix intact.
    sequence[-1], sequence[-2] = sequence[-2], sequence[-1]
    return Deck(sequence)


def play(state: HandState, *moves: tuple[int, str, int | None]) -> HandState:
    """Apply (seat, kind, amount) moves in order, validating after each."""
    for move in moves:
        seat, kind = move[0], move[1]
        amount = move[2] if len(move) > 2 else None
        apply_action(state, seat, Action(kind, amount))
        validate_state(state)
    return state


def random_policy_hand(rng: random.Random, config: TableConfig, stacks, button, deck, hand_id=1):
    """Drive one hand to completion with uniformly random legal actions."""
    state = new_hand(config, stacks, button, deck, hand_id=hand_id)
    validate_state(state)
    steps = 0
    while not state.complete:
        steps += 1
        if steps > 500:
            raise AssertionError("hand did not terminate")
        seat = state.acting
        templates = legal_actions(state, seat)
        template = rng.choice(templates)
        if template.kind in ("bet", "raise_to"):
            amount = rng.randint(template.min, template.max)
            action = Action(template.kind, amount)
        else:
            action = Action(template.kind)
        apply_action(state, seat, action)
        validate_state(state)
    return state

"""Role-specific views of the authoritative table state.

Redaction is where the server decides what each connection may see: a seat
sees its own hole cards, everyone sees shown-down hands, spectators see no
hole cards before showdown, and the admin sees session data but no cards
unless visibility was explicitly switched on. Hidden holes serialize as a
count-only marker and the deck is never serialized at any level.

Views are built as plain dicts shaped exactly like protocol.SnapshotView;
the server serializes them on every transition for every connection, so this
path stays allocation-light. Clients parse them back through the typed model.
"""

from __future__ import annotations

from typing import Optional

from .cards import cards_text
from .engine import EMPTY, HandState, SITTING_OUT, TableConfig

SPECTATOR = "spectator"
ADMIN = "admin"


def seat_level(seat_id: int) -> str:
    return f"seat:{seat_id}"


def level_seat(level: str) -> Optional[int]:
    if level.startswith("seat:"):
        return int(level.split(":", 1)[1])
    return None


def shown_seats(hand: HandState) -> set[int]:
    return {e["seat"] for e in hand.events if e["type"] == "show"}


def table_info(config: TableConfig) -> dict:
    return {
        "small_blind": config.small_blind,
        "big_blind": config.big_blind,
        "starting_stack": config.starting_stack,
        "seat_count": config.seat_count,
        "action_timeout": config.action_timeout,
    }


def redact_state(
    *,
    level: str,
    phase: str,
    config: TableConfig,
    table_stacks: list[Optional[int]],
    connected: list[bool],
    hand: Optional[HandState] = None,
    admin_info: Optional[dict] = None,
    admin_sees_holes: bool = False,
) -> dict:
    """Apply one role's redaction rule to the authoritative state.

    table_stacks carries the between-hands stack per seat (None = empty seat);
    during a hand the engine's per-seat numbers win for dealt seats.
    """
    holes_shown = shown_seats(hand) if hand else set()
    own_seat = level_seat(level)

    seats = []
    for seat_id in range(len(table_stacks)):
        table_stack = table_stacks[seat_id]
        hand_seat = hand.seats[seat_id] if hand else None
        if hand_seat is not None and hand_seat.dealt:
            entry = {
                "seat_id": seat_id,
                "status": hand_seat.status,
                "stack": hand_seat.stack,
                "street_committed": hand_seat.street_committed,
                "total_committed": hand_seat.total_committed,
                "connected": connected[seat_id],
            }
            hole = hand_seat.hole
            if hole is not None:
                visible = (
                    seat_id == own_seat
                    or seat_id in holes_shown
                    or (level == ADMIN and admin_sees_holes)
                )
                entry["hole"] = (
                    {"cards": cards_text(hole)} if visible else {"count": len(hole)}
                )
        else:
            entry = {
                "seat_id": seat_id,
                "status": EMPTY if table_stack is None else SITTING_OUT,
                "stack": table_stack or 0,
                "street_committed": 0,
                "total_committed": 0,
                "connected": connected[seat_id],
            }
        seats.append(entry)

    view = {
        "level": level,
        "phase": phase,
        "config": table_info(config),
        "seats": seats,
    }
    if hand is not None:
        view["hand_id"] = hand.hand_id
        if hand.events:
            view["seq"] = len(hand.events) - 1
        view["street"] = hand.street
        view["board"] = cards_text(hand.board)
        view["pots"] = [
            {"amount": p.amount, "eligible": sorted(p.eligible)} for p in hand.pots
        ]
        view["button"] = hand.button
        if hand.acting is not None:
            view["acting"] = hand.acting
        view["current_bet"] = hand.current_bet
        view["min_raise"] = hand.min_raise
    if level == ADMIN and admin_info is not None:
        view["admin"] = admin_info
    return view


def redact_event(record: dict, level: str, admin_sees_holes: bool = False) -> dict:
    """One engine event record as a given role may see it.

    Only deal_hole records carry private cards; everything else (streets,
    shows, awards) is public by the time it is emitted.
    """
    if record.get("type") != "deal_hole":
        return record
    visible = level == seat_level(record["seat"]) or (
        level == ADMIN and admin_sees_holes
    )
    if visible:
        return record
    redacted = {k: v for k, v in record.items() if k != "cards"}
    redacted["count"] = len(record["cards"])
    return redacted

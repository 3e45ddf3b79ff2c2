"""Authoritative no-limit Hold'em hand state machine.

One logical owner drives a HandState at a time; every transition appends typed
event records and chips are conserved after every call. Betting follows
standard no-limit rules: a raise must be at least the size of the largest
prior bet or raise of the street, and an all-in smaller than that does not
reopen the action to players who already acted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .cards import CANONICAL_ORDER, Card, Deck, cards_text
from .evaluate import best_of_seven

# Streets
PREFLOP = "preflop"
FLOP = "flop"
TURN = "turn"
RIVER = "river"
SHOWDOWN = "showdown"
COMPLETE = "complete"

BETTING_STREETS = (PREFLOP, FLOP, TURN, RIVER)
NEXT_STREET = {PREFLOP: FLOP, FLOP: TURN, TURN: RIVER}
BOARD_SIZE = {PREFLOP: 0, FLOP: 3, TURN: 4, RIVER: 5, SHOWDOWN: 5}

# Seat statuses
EMPTY = "empty"
ACTIVE = "active"
FOLDED = "folded"
ALL_IN = "all_in"
SITTING_OUT = "sitting_out"

# Action kinds
FOLD = "fold"
CHECK = "check"
CALL = "call"
BET = "bet"
RAISE_TO = "raise_to"
ACTION_KINDS = (FOLD, CHECK, CALL, BET, RAISE_TO)


class EngineError(Exception):
    """Base for all rule violations reported by the engine."""


class OutOfTurnError(EngineError):
    pass


class IllegalActionError(EngineError):
    pass


class InvariantError(EngineError):
    """Internal consistency failure; should never happen."""


@dataclass
class TableConfig:
    small_blind: int
    big_blind: int
    starting_stack: int
    seat_count: int = 6
    action_timeout: float = 30.0

    def __post_init__(self):
        if self.small_blind < 1:
            raise ValueError("small blind must be at least 1")
        if self.big_blind < self.small_blind:
            raise ValueError("big blind must be >= small blind")
        if self.starting_stack < self.big_blind:
            raise ValueError("starting stack must cover the big blind")
        if not 2 <= self.seat_count <= 6:
            raise ValueError("seat count must be between 2 and 6")
        if self.action_timeout < 0:
            raise ValueError("action timeout must be >= 0")


@dataclass
class Action:
    kind: str
    amount: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind: {self.kind!r}")
        if self.amount is not None and self.amount <= 0:
            raise ValueError("action amount must be positive when present")


@dataclass
class ActionTemplate:
    """One legal move with its amount bounds (min/max for bet and raise_to)."""

    kind: str
    amount: Optional[int] = None
    min: Optional[int] = None
    max: Optional[int] = None

    def allows(self, action: Action) -> bool:
        if action.kind != self.kind:
            return False
        if self.kind in (BET, RAISE_TO):
            return action.amount is not None and self.min <= action.amount <= self.max
        return action.amount is None

    def to_payload(self) -> dict:
        out = {"kind": self.kind}
        if self.amount is not None:
            out["amount"] = self.amount
        if self.min is not None:
            out["min"] = self.min
            out["max"] = self.max
        return out


@dataclass(frozen=True)
class Pot:
    amount: int
    eligible: frozenset[int]


@dataclass
class SeatState:
    seat_id: int
    stack: int = 0
    status: str = EMPTY
    street_committed: int = 0
    total_committed: int = 0
    hole: Optional[tuple[Card, Card]] = None
    acted: bool = False  # has acted since the last full bet/raise this street

    @property
    def dealt(self) -> bool:
        """Participating in the current hand (blinds post before hole cards)."""
        return self.status != EMPTY

    @property
    def live(self) -> bool:
        return self.status in (ACTIVE, ALL_IN)


@dataclass
class HandState:
    hand_id: int
    config: TableConfig
    button: int
    seats: list[SeatState]
    deck: Deck
    street: str = PREFLOP
    board: list[Card] = field(default_factory=list)
    acting: Optional[int] = None
    current_bet: int = 0
    min_raise: int = 0
    collected: dict[int, int] = field(default_factory=dict)
    pots: list[Pot] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    payout: dict[int, int] = field(default_factory=dict)
    baseline: int = 0  # chips in play at deal time; conserved until the end

    def dealt_seats(self) -> list[SeatState]:
        return [s for s in self.seats if s.dealt]

    def live_seats(self) -> list[SeatState]:
        return [s for s in self.seats if s.dealt and s.live]

    def actionable_seats(self) -> list[SeatState]:
        return [s for s in self.seats if s.dealt and s.status == ACTIVE]

    @property
    def complete(self) -> bool:
        return self.street == COMPLETE


# --- event plumbing -------------------------------------------------------


def _emit(state: HandState, type_: str, **fields) -> dict:
    record = {"hand_id": state.hand_id, "seq": len(state.events), "type": type_}
    record.update(fields)
    state.events.append(record)
    return record


def _assert_conserved(state: HandState) -> None:
    total = sum(s.stack + s.street_committed for s in state.dealt_seats())
    total += sum(state.collected.values()) - sum(state.payout.values())
    if total != state.baseline:
        raise InvariantError(
            f"chip conservation broken: {total} != baseline {state.baseline}"
        )


def _order_from(state: HandState, start: int) -> list[SeatState]:
    """Dealt seats in clockwise order beginning at seat index `start`."""
    n = len(state.seats)
    return [
        state.seats[(start + off) % n]
        for off in range(n)
        if state.seats[(start + off) % n].dealt
    ]


# --- side pots ------------------------------------------------------------


def build_pots(contributions: Mapping[int, int], live: Iterable[int]) -> list[Pot]:
    """Layered pots from total contributions, main pot first.

    Ascending distinct contribution levels define the layers; a layer's
    eligible set is the live seats contributing at or above it. Folded seats'
    chips stay in the layers they reached but never make them eligible. The
    engine refunds uncalled bets before calling this, which keeps every
    layer's eligible set non-empty.
    """
    live = set(live)
    levels = sorted({n for n in contributions.values() if n > 0})
    pots = []
    lo = 0
    for level in levels:
        amount = sum(min(c, level) - min(c, lo) for c in contributions.values())
        eligible = frozenset(s for s in live if contributions.get(s, 0) >= level)
        pots.append(Pot(amount, eligible))
        lo = level
    return pots


def _merge_equal_layers(pots: list[Pot]) -> list[Pot]:
    """Collapse adjacent layers with identical eligibility into one pot.

    A folded seat's contribution level splits layers without changing who can
    win them; merging keeps the pot chain strictly shrinking and awards odd
    chips once per real pot.
    """
    merged: list[Pot] = []
    for pot in pots:
        if merged and merged[-1].eligible == pot.eligible:
            merged[-1] = Pot(merged[-1].amount + pot.amount, pot.eligible)
        else:
            merged.append(pot)
    return merged


def _rebuild_pots(state: HandState) -> None:
    live = [s.seat_id for s in state.live_seats()]
    state.pots = _merge_equal_layers(build_pots(state.collected, live))


# --- dealing a new hand ----------------------------------------------------


def _pay(state: HandState, seat: SeatState, amount: int) -> None:
    if amount > seat.stack:
        raise InvariantError("seat cannot pay more than its stack")
    seat.stack -= amount
    seat.street_committed += amount
    seat.total_committed += amount
    if seat.stack == 0:
        seat.status = ALL_IN


def _post_blind(state: HandState, seat: SeatState, name: str, amount: int) -> None:
    pay = min(amount, seat.stack)
    _pay(state, seat, pay)
    record = {"seat": seat.seat_id, "blind": name, "amount": pay}
    if seat.status == ALL_IN:
        record["all_in"] = True
    _emit(state, "post_blind", **record)


def new_hand(
    config: TableConfig,
    stacks: Mapping[int, int],
    button: int,
    deck: Deck,
    hand_id: int = 1,
) -> HandState:
    """Deal a fresh hand: post blinds, deal hole cards, open preflop action.

    Heads-up the button posts the small blind and acts first preflop. Hole
    cards go out one at a time in two passes starting left of the button.
    """
    if len(stacks) < 2:
        raise ValueError("need at least 2 funded seats")
    if len(stacks) > config.seat_count:
        raise ValueError("more occupied seats than the table allows")
    for seat_id, stack in stacks.items():
        if not 0 <= seat_id < 6:
            raise ValueError(f"seat id out of range: {seat_id}")
        if stack <= 0:
            raise ValueError(f"seat {seat_id} has no chips")
    if button not in stacks:
        raise ValueError("button must be an occupied seat")
    if deck.cursor != 0:
        raise ValueError("refusing a partially dealt deck")
    if tuple(deck.cards) == CANONICAL_ORDER:
        raise ValueError("refusing an unshuffled deck")

    seats = [SeatState(seat_id=i) for i in range(6)]
    for seat_id, stack in stacks.items():
        seats[seat_id].stack = stack
        seats[seat_id].status = ACTIVE

    state = HandState(
        hand_id=hand_id,
        config=config,
        button=button,
        seats=seats,
        deck=deck,
        baseline=sum(stacks.values()),
        current_bet=config.big_blind,
        min_raise=config.big_blind,
    )
    for s in state.dealt_seats():
        state.collected[s.seat_id] = 0

    order = _order_from(state, button)  # button first, clockwise
    _emit(
        state,
        "hand_start",
        button=button,
        sb=config.small_blind,
        bb=config.big_blind,
        seats=[{"seat": s.seat_id, "stack": s.stack} for s in state.dealt_seats()],
    )

    if len(order) == 2:
        sb_seat, bb_seat = order[0], order[1]  # button posts small heads-up
    else:
        sb_seat, bb_seat = order[1], order[2]
    _post_blind(state, sb_seat, "small", config.small_blind)
    _post_blind(state, bb_seat, "big", config.big_blind)

    # Two single-card passes starting left of the button.
    deal_order = _order_from(state, button + 1)
    first = {s.seat_id: deck.deal(1)[0] for s in deal_order}
    second = {s.seat_id: deck.deal(1)[0] for s in deal_order}
    for s in deal_order:
        s.hole = (first[s.seat_id], second[s.seat_id])
        _emit(state, "deal_hole", seat=s.seat_id, cards=cards_text(s.hole))

    _assert_conserved(state)

    if _round_over(state):
        _close_round(state)
    else:
        state.acting = _first_pending_from(state, bb_seat.seat_id + 1)
        if state.acting is None:
            raise InvariantError("open betting round without a pending seat")
    return state


# --- betting round bookkeeping ----------------------------------------------


def _pending(state: HandState, seat: SeatState) -> bool:
    if seat.status != ACTIVE or not seat.dealt:
        return False
    return seat.street_committed < state.current_bet or not seat.acted


def _first_pending_from(state: HandState, start: int) -> Optional[int]:
    for s in _order_from(state, start):
        if _pending(state, s):
            return s.seat_id
    return None


def _round_over(state: HandState) -> bool:
    live = state.live_seats()
    if len(live) <= 1:
        return True
    actionable = state.actionable_seats()
    if not actionable:
        return True
    if len(actionable) == 1:
        # Lone seat facing only all-ins: owes a decision only if short.
        return actionable[0].street_committed >= state.current_bet
    return all(
        s.acted and s.street_committed == state.current_bet for s in actionable
    )


def _refund_uncalled(state: HandState) -> None:
    committed = sorted(
        (s for s in state.dealt_seats() if s.street_committed > 0),
        key=lambda s: s.street_committed,
        reverse=True,
    )
    if not committed:
        return
    top = committed[0]
    second = committed[1].street_committed if len(committed) > 1 else 0
    refund = top.street_committed - second
    if refund <= 0:
        return
    top.stack += refund
    top.street_committed -= refund
    top.total_committed -= refund
    if top.status == ALL_IN and top.stack > 0:
        top.status = ACTIVE  # the all-in was not fully called
    _emit(state, "refund", seat=top.seat_id, amount=refund)


def _collect(state: HandState) -> None:
    for s in state.dealt_seats():
        if s.street_committed:
            state.collected[s.seat_id] += s.street_committed
            s.street_committed = 0
    _rebuild_pots(state)


def _close_round(state: HandState) -> None:
    """Collect the street and run the hand forward until someone must act."""
    _refund_uncalled(state)
    _collect(state)
    state.acting = None

    live = state.live_seats()
    if len(live) == 1:
        _award_uncontested(state, live[0])
        return

    while True:
        if state.street == RIVER:
            _showdown(state)
            return
        nxt = NEXT_STREET[state.street]
        dealt = state.deck.deal(3 if nxt == FLOP else 1)
        state.board.extend(dealt)
        state.street = nxt
        _emit(state, "street", street=nxt, cards=cards_text(dealt))

        state.current_bet = 0
        state.min_raise = state.config.big_blind
        for s in state.seats:
            s.acted = False
        if not _round_over(state):
            state.acting = _first_pending_from(state, state.button + 1)
            if state.acting is None:
                raise InvariantError("open betting round without a pending seat")
            return
        # Everyone is all-in (or covered): run the board out.


# --- legal actions and their application ------------------------------------


def legal_actions(state: HandState, seat_id: int) -> list[ActionTemplate]:
    """The exact no-limit move set for the acting seat."""
    if state.acting != seat_id:
        raise OutOfTurnError(f"seat {seat_id} is not acting")
    seat = state.seats[seat_id]
    out = [ActionTemplate(FOLD)]
    to_call = state.current_bet - seat.street_committed

    if to_call <= 0:
        out.append(ActionTemplate(CHECK))
    else:
        out.append(ActionTemplate(CALL, amount=min(to_call, seat.stack)))

    if state.current_bet == 0:
        out.append(ActionTemplate(BET, min=min(state.config.big_blind, seat.stack), max=seat.stack))
    elif not seat.acted:
        # Raising is closed to seats that already acted and have since seen
        # only short all-ins.
        cap = seat.street_committed + seat.stack
        if cap > state.current_bet:
            full = state.current_bet + state.min_raise
            out.append(ActionTemplate(RAISE_TO, min=min(full, cap), max=cap))
    return out


def apply_action(
    state: HandState, seat_id: int, action: Action, auto: bool = False
) -> list[dict]:
    """Apply one action for the acting seat and advance the hand.

    Raises OutOfTurnError or IllegalActionError with the state untouched;
    otherwise chips move, the street auto-advances when the round closes, and
    the hand auto-completes on a fold-out or at showdown. Returns the event
    records appended by this transition.
    """
    if state.acting != seat_id:
        raise OutOfTurnError(f"seat {seat_id} is not acting")
    templates = legal_actions(state, seat_id)
    template = next((t for t in templates if t.allows(action)), None)
    if template is None:
        legal = ", ".join(t.kind for t in templates)
        raise IllegalActionError(f"{action.kind} not legal here (legal: {legal})")

    first_new = len(state.events)
    seat = state.seats[seat_id]

    if action.kind == FOLD:
        seat.status = FOLDED
        seat.acted = True
        _emit_action(state, seat, FOLD, auto=auto)
    elif action.kind == CHECK:
        seat.acted = True
        _emit_action(state, seat, CHECK, auto=auto)
    elif action.kind == CALL:
        pay = template.amount
        _pay(state, seat, pay)
        seat.acted = True
        _emit_action(state, seat, CALL, amount=pay, auto=auto)
    elif action.kind == BET:
        _pay(state, seat, action.amount)
        state.current_bet = action.amount
        if action.amount >= state.config.big_blind:
            state.min_raise = action.amount
        _reopen_action(state, seat)
        seat.acted = True
        _emit_action(state, seat, BET, amount=action.amount, to=action.amount, auto=auto)
    else:  # RAISE_TO
        target = action.amount
        pay = target - seat.street_committed
        full = target >= state.current_bet + state.min_raise
        _pay(state, seat, pay)
        if full:
            state.min_raise = target - state.current_bet
            _reopen_action(state, seat)
        state.current_bet = target
        seat.acted = True
        _emit_action(state, seat, RAISE_TO, amount=pay, to=target, auto=auto)

    if _round_over(state):
        _close_round(state)
    else:
        state.acting = _first_pending_from(state, seat_id + 1)
        if state.acting is None:
            raise InvariantError("open betting round without a pending seat")

    _assert_conserved(state)
    return state.events[first_new:]


def _reopen_action(state: HandState, bettor: SeatState) -> None:
    for s in state.seats:
        if s is not bettor:
            s.acted = False


def _emit_action(
    state: HandState,
    seat: SeatState,
    kind: str,
    amount: Optional[int] = None,
    to: Optional[int] = None,
    auto: bool = False,
) -> None:
    record: dict = {"seat": seat.seat_id, "kind": kind}
    if amount is not None:
        record["amount"] = amount
    if to is not None:
        record["to"] = to
    if seat.status == ALL_IN:
        record["all_in"] = True
    if auto:
        record["auto"] = True
    _emit(state, "action", **record)


# --- settlement --------------------------------------------------------------


def _winner_order(state: HandState, seats: Iterable[int]) -> list[int]:
    """Seats ordered clockwise starting left of the button (odd-chip order)."""
    wanted = set(seats)
    return [s.seat_id for s in _order_from(state, state.button + 1) if s.seat_id in wanted]


def _award_uncontested(state: HandState, winner: SeatState) -> None:
    for index, pot in enumerate(state.pots):
        winner.stack += pot.amount
        state.payout[winner.seat_id] = state.payout.get(winner.seat_id, 0) + pot.amount
        _emit(state, "award", pot=index, seat=winner.seat_id, amount=pot.amount)
    _finish_hand(state)


def _showdown(state: HandState) -> None:
    state.street = SHOWDOWN
    if len(state.board) != 5:
        raise InvariantError("showdown without a full board")
    for s in _order_from(state, state.button + 1):
        if s.live:
            _emit(state, "show", seat=s.seat_id, cards=cards_text(s.hole))
    settle(state)


def settle(state: HandState) -> dict[int, int]:
    """Award every pot to the best hands among its eligible seats.

    Ties split evenly; odd chips go to winners closest left of the button,
    one each. Requires a showdown-street state with a full board.
    """
    if state.street != SHOWDOWN:
        raise EngineError("settle requires a showdown state")
    if len(state.board) != 5:
        raise EngineError("settle requires a 5-card board")

    for index, pot in enumerate(state.pots):
        contenders = [s for s in state.live_seats() if s.seat_id in pot.eligible]
        if not contenders:
            raise InvariantError(f"pot {index} has no eligible live seat")
        values = {s.seat_id: best_of_seven(s.hole, state.board) for s in contenders}
        best = max(values.values())
        winners = _winner_order(state, (sid for sid, v in values.items() if v == best))
        share, odd = divmod(pot.amount, len(winners))
        for pos, sid in enumerate(winners):
            amount = share + (1 if pos < odd else 0)
            if amount == 0:
                continue
            state.seats[sid].stack += amount
            state.payout[sid] = state.payout.get(sid, 0) + amount
            _emit(state, "award", pot=index, seat=sid, amount=amount)
    _finish_hand(state)
    return dict(state.payout)


def _finish_hand(state: HandState) -> None:
    state.street = COMPLETE
    state.acting = None
    _emit(
        state,
        "hand_end",
        stacks=[{"seat": s.seat_id, "stack": s.stack} for s in state.dealt_seats()],
    )
    _assert_conserved(state)


# --- validation (used by tests and the simulation harness) -------------------


def validate_state(state: HandState) -> None:
    """Assert every structural invariant of a stable state; raises on failure."""
    if state.street in BOARD_SIZE and BOARD_SIZE[state.street] is not None:
        if len(state.board) != BOARD_SIZE[state.street]:
            raise InvariantError(
                f"board has {len(state.board)} cards on {state.street}"
            )
    _assert_conserved(state)

    for s in state.seats:
        if s.street_committed > s.total_committed:
            raise InvariantError("street commitment exceeds hand commitment")
        if s.status == ALL_IN and s.stack != 0 and not state.complete:
            raise InvariantError("all-in seat with chips behind")
        if (s.hole is not None) != s.dealt:
            raise InvariantError("hole cards inconsistent with participation")

    eligible_chain = [p.eligible for p in state.pots]
    for a, b in zip(eligible_chain, eligible_chain[1:]):
        if not b < a:
            raise InvariantError("pot eligibility chain does not strictly shrink")
    for p in state.pots:
        if p.amount < 0 or not p.eligible:
            raise InvariantError("bad pot")

    if state.acting is not None:
        if state.street not in BETTING_STREETS:
            raise InvariantError("acting seat outside a betting street")
        if not _pending(state, state.seats[state.acting]):
            raise InvariantError("acting seat has nothing to decide")
    elif state.street in BETTING_STREETS:
        raise InvariantError("betting street with nobody to act")

    if state.street == COMPLETE:
        total = sum(s.stack for s in state.dealt_seats())
        if total != state.baseline:
            raise InvariantError("stacks do not sum to baseline after the hand")

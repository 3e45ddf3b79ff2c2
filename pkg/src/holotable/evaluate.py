"""Hand strength evaluation: 5-card classification and the best 7-card hand.

A hand value is (category, tiebreak); the pair orders lexicographically and the
order is total. Equal values mean a chopped pot -- suits never break ties. The
ace plays low only in the 5-high straight (A-2-3-4-5, tiebreak rank 5).
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

from .cards import Card

HIGH_CARD = 0
ONE_PAIR = 1
TWO_PAIR = 2
THREE_OF_A_KIND = 3
STRAIGHT = 4
FLUSH = 5
FULL_HOUSE = 6
FOUR_OF_A_KIND = 7
STRAIGHT_FLUSH = 8

CATEGORY_NAMES = (
    "high_card",
    "one_pair",
    "two_pair",
    "three_of_a_kind",
    "straight",
    "flush",
    "full_house",
    "four_of_a_kind",
    "straight_flush",
)


class HandValue(NamedTuple):
    category: int
    tiebreak: tuple

    @property
    def name(self) -> str:
        return CATEGORY_NAMES[self.category]


def _straight_high(unique_desc: Sequence[int]) -> int:
    """Highest straight top among distinct descending ranks, 0 if none."""
    run = 1
    for i in range(1, len(unique_desc)):
        if unique_desc[i] == unique_desc[i - 1] - 1:
            run += 1
            if run == 5:
                return unique_desc[i] + 4
        else:
            run = 1
    if unique_desc[0] == 14:  # wheel: ace plays low under the 5
        need = {5, 4, 3, 2}
        if need.issubset(unique_desc):
            return 5
    return 0


def evaluate5(cards: Iterable[Card]) -> HandValue:
    """Classify exactly 5 distinct cards."""
    hand = tuple(cards)
    if len(hand) != 5:
        raise ValueError(f"expected 5 cards, got {len(hand)}")
    if len(set(hand)) != 5:
        raise ValueError("duplicate cards")
    c0, c1, c2, c3, c4 = hand

    ranks = sorted((c0[0], c1[0], c2[0], c3[0], c4[0]), reverse=True)
    flush = c0[1] == c1[1] == c2[1] == c3[1] == c4[1]

    # (count, rank) groups over the descending rank list.
    groups = []
    prev = ranks[0]
    count = 1
    for r in ranks[1:]:
        if r == prev:
            count += 1
        else:
            groups.append((count, prev))
            prev = r
            count = 1
    groups.append((count, prev))
    groups.sort(key=lambda g: (-g[0], -g[1]))

    if len(groups) == 5:
        high = _straight_high(ranks)
        if high:
            return HandValue(STRAIGHT_FLUSH if flush else STRAIGHT, (high,))
        if flush:
            return HandValue(FLUSH, tuple(ranks))
        return HandValue(HIGH_CARD, tuple(ranks))

    n0, r0 = groups[0]
    if n0 == 4:
        return HandValue(FOUR_OF_A_KIND, (r0, groups[1][1]))
    if n0 == 3:
        n1, r1 = groups[1]
        if n1 == 2:
            return HandValue(FULL_HOUSE, (r0, r1))
        return HandValue(THREE_OF_A_KIND, (r0, groups[1][1], groups[2][1]))
    # n0 == 2
    n1, r1 = groups[1]
    if n1 == 2:
        return HandValue(TWO_PAIR, (r0, r1, groups[2][1]))
    return HandValue(ONE_PAIR, (r0, r1, groups[2][1], groups[3][1]))


def best_of_seven(hole: Iterable[Card], board: Iterable[Card]) -> HandValue:
    """Best five-card value from two hole cards plus a five-card board.

    Evaluated directly on the seven cards; equals the maximum of evaluate5 over
    the 21 five-card subsets.
    """
    hole = tuple(hole)
    board = tuple(board)
    if len(hole) != 2 or len(board) != 5:
        raise ValueError("expected 2 hole cards and a 5-card board")
    cards = hole + board
    if len(set(cards)) != 7:
        raise ValueError("duplicate cards")

    ranks = sorted((c[0] for c in cards), reverse=True)

    by_suit: dict[int, list[int]] = {}
    for r, s in cards:
        by_suit.setdefault(s, []).append(r)
    flush_ranks: list[int] | None = None
    for suited in by_suit.values():
        if len(suited) >= 5:
            flush_ranks = sorted(suited, reverse=True)
            break

    if flush_ranks:
        high = _straight_high(flush_ranks)
        if high:
            return HandValue(STRAIGHT_FLUSH, (high,))

    counts: dict[int, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    quads = [r for r, n in counts.items() if n == 4]
    trips = sorted((r for r, n in counts.items() if n == 3), reverse=True)
    pairs = sorted((r for r, n in counts.items() if n == 2), reverse=True)

    if quads:
        q = quads[0]
        kicker = max(r for r in ranks if r != q)
        return HandValue(FOUR_OF_A_KIND, (q, kicker))

    if trips:
        filler = trips[1:] + pairs
        if filler:
            return HandValue(FULL_HOUSE, (trips[0], max(filler)))

    if flush_ranks:
        return HandValue(FLUSH, tuple(flush_ranks[:5]))

    unique_desc = sorted(counts, reverse=True)
    high = _straight_high(unique_desc)
    if high:
        return HandValue(STRAIGHT, (high,))

    if trips:
        t = trips[0]
        kickers = [r for r in ranks if r != t][:2]
        return HandValue(THREE_OF_A_KIND, (t, kickers[0], kickers[1]))

    if len(pairs) >= 2:
        p1, p2 = pairs[0], pairs[1]
        kicker = max(r for r in ranks if r != p1 and r != p2)
        return HandValue(TWO_PAIR, (p1, p2, kicker))

    if pairs:
        p = pairs[0]
        kickers = [r for r in ranks if r != p][:3]
        return HandValue(ONE_PAIR, (p, *kickers))

    return HandValue(HIGH_CARD, tuple(ranks[:5]))


def compare(a: HandValue, b: HandValue) -> int:
    """-1, 0 or 1 by lexicographic (category, tiebreak) order."""
    if a == b:
        return 0
    return -1 if a < b else 1

"""Card domain: the 52-card deck, seeded shuffling and the text form used in logs.

The shuffle is pinned so two runs (or two implementations) given the same seed
produce byte-identical deals: splitmix64 drives a Fisher-Yates pass over the
canonical deck order, swapping index i (51 down to 1) with j = next() % (i + 1).
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, NamedTuple

RANK_CHARS = "23456789TJQKA"
SUIT_CHARS = "cdhs"

RANK_MIN = 2
RANK_MAX = 14  # ace

_MASK64 = (1 << 64) - 1


class Suit(IntEnum):
    CLUBS = 0
    DIAMONDS = 1
    HEARTS = 2
    SPADES = 3

    @property
    def char(self) -> str:
        return SUIT_CHARS[self]


class Card(NamedTuple):
    rank: int
    suit: int

    @property
    def text(self) -> str:
        return RANK_CHARS[self.rank - 2] + SUIT_CHARS[self.suit]

    def __str__(self) -> str:
        return self.text


def parse_card(text: str) -> Card:
    """Parse the two-character text form, e.g. 'As' or 'Td'."""
    if len(text) != 2:
        raise ValueError(f"bad card text: {text!r}")
    try:
        rank = RANK_CHARS.index(text[0]) + 2
        suit = Suit(SUIT_CHARS.index(text[1]))
    except ValueError:
        raise ValueError(f"bad card text: {text!r}") from None
    return Card(rank, suit)


def parse_cards(text: str) -> list[Card]:
    """Parse a space-separated run of cards, e.g. 'As Td 2c'."""
    return [parse_card(part) for part in text.split()]


def cards_text(cards: Iterable[Card]) -> list[str]:
    return [c.text for c in cards]


# Canonical order: clubs 2..A, then diamonds, hearts, spades.
CANONICAL_ORDER: tuple[Card, ...] = tuple(
    Card(rank, suit) for suit in Suit for rank in range(RANK_MIN, RANK_MAX + 1)
)


class Rng:
    """splitmix64, the pinned 64-bit PRNG behind every shuffle and bot policy."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._state = seed

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform-ish draw in [0, n) via modulo; bias is negligible for n <= 52."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.below(len(seq))]


class Deck:
    """An ordered 52-card permutation plus a cursor; dealt cards never reappear."""

    __slots__ = ("cards", "cursor")

    def __init__(self, cards: Iterable[Card], cursor: int = 0):
        self.cards = list(cards)
        if sorted(self.cards) != sorted(CANONICAL_ORDER):
            raise ValueError("deck must be a permutation of the 52-card universe")
        if not 0 <= cursor <= 52:
            raise ValueError(f"cursor out of range: {cursor}")
        self.cursor = cursor

    def deal(self, n: int = 1) -> list[Card]:
        if self.cursor + n > 52:
            raise ValueError("deck exhausted")
        dealt = self.cards[self.cursor : self.cursor + n]
        self.cursor += n
        return dealt

    @property
    def remaining(self) -> int:
        return 52 - self.cursor


def new_deck() -> Deck:
    """The canonical deck, cursor at 0."""
    return Deck(CANONICAL_ORDER)


def shuffle(deck: Deck, seed: int) -> Deck:
    """Deterministic Fisher-Yates permutation of an undealt deck.

    Same seed, same output, byte for byte. Rejects a partially dealt deck.
    """
    if deck.cursor != 0:
        raise ValueError("refusing to shuffle a partially dealt deck")
    rng = Rng(seed)
    cards = list(deck.cards)
    for i in range(51, 0, -1):
        j = rng.below(i + 1)
        cards[i], cards[j] = cards[j], cards[i]
    return Deck(cards)

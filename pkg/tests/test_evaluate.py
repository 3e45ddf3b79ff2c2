"""Hand evaluation against the naive predicate oracle and the subset oracle."""

import random
from itertools import combinations

import pytest

from holotable.cards import CANONICAL_ORDER, parse_cards
from holotable.evaluate import HandValue, best_of_seven, compare, evaluate5
from oracles import best7_by_subsets, naive_value

TIEBREAK_LEN = {0: 5, 1: 4, 2: 3, 3: 3, 4: 1, 5: 5, 6: 2, 7: 2, 8: 1}


class TestEvaluate5:
    def test_royal_flush(self):
        assert evaluate5(parse_cards("As Ks Qs Js Ts")) == HandValue(8, (14,))

    def test_wheel_is_a_five_high_straight(self):
        assert evaluate5(parse_cards("Ad 2c 3h 4s 5d")) == HandValue(4, (5,))

    def test_wheel_straight_flush(self):
        assert evaluate5(parse_cards("Ad 2d 3d 4d 5d")) == HandValue(8, (5,))

    def test_no_wraparound_straight(self):
        value = evaluate5(parse_cards("Qd Kc Ah 2s 3d"))
        assert value.category == 0

    def test_frozen_examples_from_oracle(self):
        # Expected values computed with oracles.naive_value and frozen here.
        cases = [
            ("As Ks Qs Js Ts", HandValue(8, (14,))),
            ("Ad 2c 3h 4s 5d", HandValue(4, (5,))),
            ("Ac Ad Ah As Kc", HandValue(7, (14, 13))),
            ("Kc Kd Kh 7s 7d", HandValue(6, (13, 7))),
            ("Ah 9h 7h 5h 3h", HandValue(5, (14, 9, 7, 5, 3))),
            ("8c 8d 8h Ks Qd", HandValue(3, (8, 13, 12))),
            ("Jc Jd 4h 4s Ad", HandValue(2, (11, 4, 14))),
            ("Tc Td Ah 7s 2d", HandValue(1, (10, 14, 7, 2))),
            ("Ac Jd 9h 6s 3d", HandValue(0, (14, 11, 9, 6, 3))),
        ]
        for text, expected in cases:
            cards = parse_cards(text)
            assert evaluate5(cards) == expected
            assert naive_value(cards) == expected

    def test_rejects_wrong_count_and_duplicates(self):
        with pytest.raises(ValueError):
            evaluate5(parse_cards("As Ks Qs Js"))
        with pytest.raises(ValueError):
            evaluate5(parse_cards("As Ks Qs Js Js"))

    def test_matches_naive_oracle_on_random_hands(self):
        rng = random.Random(7)
        for _ in range(20_000):
            hand = rng.sample(CANONICAL_ORDER, 5)
            assert evaluate5(hand) == naive_value(hand)

    def test_matches_naive_oracle_on_systematic_slice(self):
        # Every 997th 5-card combination; covers the space without the full census.
        for i, hand in enumerate(combinations(CANONICAL_ORDER, 5)):
            if i % 997 == 0:
                assert evaluate5(hand) == naive_value(hand)

    def test_tiebreak_lengths_are_fixed_per_category(self):
        rng = random.Random(11)
        for _ in range(5_000):
            value = evaluate5(rng.sample(CANONICAL_ORDER, 5))
            assert len(value.tiebreak) == TIEBREAK_LEN[value.category]


class TestBestOfSeven:
    def test_plays_the_board(self):
        hole = parse_cards("2c 7d")
        board = parse_cards("As Ks Qs Js Ts")
        assert best_of_seven(hole, board) == HandValue(8, (14,))

    def test_quads_on_paired_board(self):
        hole = parse_cards("Ac Ad")
        board = parse_cards("Ah As Kc 7d 2s")
        assert best_of_seven(hole, board) == HandValue(7, (14, 13))

    def test_two_trips_make_a_full_house(self):
        hole = parse_cards("9c 9d")
        board = parse_cards("9h 5c 5d 5h Kc")
        assert best_of_seven(hole, board) == HandValue(6, (9, 5))

    def test_three_pairs_keep_best_kicker(self):
        hole = parse_cards("2c 2d")
        board = parse_cards("7h 7s Kc Kd Ah")
        assert best_of_seven(hole, board) == HandValue(2, (13, 7, 14))

    def test_flush_beats_lower_straight_on_seven(self):
        hole = parse_cards("Ah 2h")
        board = parse_cards("9h 7h 3h 8c 6d")
        assert best_of_seven(hole, board) == HandValue(5, (14, 9, 7, 3, 2))

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            best_of_seven(parse_cards("As Ks"), parse_cards("As 2c 3d 4h 5s"))

    def test_matches_subset_oracle_on_random_deals(self):
        rng = random.Random(13)
        for _ in range(5_000):
            cards = rng.sample(CANONICAL_ORDER, 7)
            hole, board = cards[:2], cards[2:]
            assert best_of_seven(hole, board) == best7_by_subsets(hole, board)


class TestCompare:
    def test_pair_beats_high_card(self):
        pair = evaluate5(parse_cards("Tc Td Ah 7s 2d"))
        high = evaluate5(parse_cards("Ac Jd 9h 6s 3d"))
        assert compare(pair, high) == 1

    def test_reflexive_equal(self):
        value = evaluate5(parse_cards("Ac Jd 9h 6s 3d"))
        assert compare(value, value) == 0

    def test_chop_across_suits(self):
        a = evaluate5(parse_cards("Ah Kd Qc Js 9h"))
        b = evaluate5(parse_cards("As Kc Qd Jh 9c"))
        assert compare(a, b) == 0

    def test_antisymmetry_and_transitivity_on_samples(self):
        rng = random.Random(17)
        values = [evaluate5(rng.sample(CANONICAL_ORDER, 5)) for _ in range(300)]
        for _ in range(3_000):
            a, b, c = rng.choice(values), rng.choice(values), rng.choice(values)
            assert compare(a, b) == -compare(b, a)
            if compare(a, b) >= 0 and compare(b, c) >= 0:
                assert compare(a, c) >= 0

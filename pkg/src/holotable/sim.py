"""Headless simulation: an in-process server, wire-speaking bots, invariants.

A run plays n hands, then the whole session is put on trial: every hand's
event log is replayed through the engine (legality, conservation and byte
determinism in one pass), net chips must sum to zero, and, when wire auditing
is on, every recorded client stream is scanned for tokens the redaction rules
say that client must never have seen.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional

from .cards import Rng
from .bots import Bot, BotScript, RANDOM
from .client import TableClient
from .protocol import canonical_json
from .replay import ReplayError, replay_hand, split_hands
from .server import ServerConfig, TableService, TableSettings
from .views import seat_level

BOT_SEED_SALT = 0xB07B07B07B07B07B


@dataclass
class SimReport:
    hands_played: int
    net_chips: dict[int, int]
    violations: list[str]
    wall_time_s: float
    log_digest: str
    events: int = 0
    frames_audited: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "hands_played": self.hands_played,
            "net_chips": {str(k): v for k, v in sorted(self.net_chips.items())},
            "violations": self.violations,
            "wall_time_s": round(self.wall_time_s, 3),
            "log_digest": self.log_digest,
            "events": self.events,
            "frames_audited": self.frames_audited,
        }


def log_digest(records: list[dict]) -> str:
    hasher = hashlib.sha256()
    for record in records:
        hasher.update(canonical_json(record).encode())
        hasher.update(b"\n")
    return hasher.hexdigest()


# --- wire audit ---------------------------------------------------------------


@dataclass
class _HandFacts:
    """What actually happened in one hand, straight from the server log."""

    holes: dict[int, list[str]] = field(default_factory=dict)
    streets: dict[str, list[str]] = field(default_factory=dict)


def _collect_facts(records: list[dict]) -> dict[int, _HandFacts]:
    facts: dict[int, _HandFacts] = {}
    for hand_records in split_hands(records):
        hand_id = hand_records[0]["hand_id"]
        info = _HandFacts()
        for record in hand_records:
            if record["type"] == "deal_hole":
                info.holes[record["seat"]] = record["cards"]
            elif record["type"] == "street":
                info.streets[record["street"]] = record["cards"]
        facts[hand_id] = info
    return facts


def audit_stream(
    frames: list[str],
    level: str,
    facts: dict[int, _HandFacts],
) -> list[str]:
    """Scan one client's received bodies for tokens it must never have seen.

    Forbidden at any moment: hole cards of other seats that have not shown,
    and board cards of streets this stream has not been dealt yet. Reveals
    (street and show events) update the stream's own progress first.
    """
    own_seat = None
    if level.startswith("seat:"):
        own_seat = int(level.split(":", 1)[1])

    violations: list[str] = []
    hand_id: Optional[int] = None
    streets_seen: set[str] = set()
    shown: set[int] = set()

    for index, body in enumerate(frames):
        try:
            envelope = json.loads(body)
        except json.JSONDecodeError:
            violations.append(f"frame {index}: unparseable body")
            continue
        payload = envelope.get("payload", {})
        mtype = envelope.get("type")

        # Update stream progress before checking this frame's bytes.
        if mtype == "event":
            record = payload.get("record", {})
            rtype = record.get("type")
            if rtype == "hand_start":
                hand_id = record.get("hand_id")
                streets_seen = set()
                shown = set()
            elif rtype == "street":
                streets_seen.add(record.get("street"))
            elif rtype == "show":
                shown.add(record.get("seat"))
        elif mtype == "snapshot":
            view = payload.get("view", {})
            if view.get("hand_id") != hand_id:
                # First sight of a hand via snapshot (join mid-hand).
                hand_id = view.get("hand_id")
                streets_seen = set()
                shown = set()
                street = view.get("street")
                if street not in (None, "preflop"):
                    for name in ("flop", "turn", "river"):
                        streets_seen.add(name)
                        if name == street:
                            break
                for seat_view in view.get("seats", []):
                    hole = seat_view.get("hole") or {}
                    if "cards" in hole:
                        shown.add(seat_view.get("seat_id"))

        if hand_id is None or hand_id not in facts:
            continue
        info = facts[hand_id]

        forbidden: list[tuple[str, str]] = []
        for seat, cards in info.holes.items():
            if seat == own_seat or seat in shown:
                continue
            for card in cards:
                forbidden.append((card, f"hole card of seat {seat}"))
        for street, cards in info.streets.items():
            if street not in streets_seen:
                for card in cards:
                    forbidden.append((card, f"undealt {street} card"))

        for card, why in forbidden:
            if f'"{card}"' in body:
                violations.append(
                    f"{level} frame {index} (hand {hand_id}): {why} {card} leaked"
                )
    return violations


# --- the driver ---------------------------------------------------------------


def parse_bot_spec(spec: str) -> list[tuple[str, int]]:
    """'random:4,check_fold:2' -> [('random', 4), ('check_fold', 2)]."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            name, count = part.split(":", 1)
            out.append((name.strip(), int(count)))
        else:
            out.append((part, 1))
    return out


async def simulate(
    n_hands: int,
    bots: list[str],
    seed: int = 1,
    table: Optional[TableSettings] = None,
    audit_wire: bool = True,
) -> SimReport:
    """Run a full wire-level session and the invariant battery over it."""
    started = time.monotonic()
    if table is None:
        table = TableSettings(action_timeout=30.0)
    config = ServerConfig(
        port=0,
        pin="000000",
        seed=seed,
        table=table,
        wait_seats=len(bots),
        max_hands=n_hands,
        seat_count=max(2, len(bots)),
    )
    service = TableService(config)
    await service.start()

    spectator = None
    spectator_task = None
    if audit_wire:
        spectator = TableClient("127.0.0.1", service.bound_port, record=True)
        await spectator.connect()
        await spectator.join("spectator")

        async def drain_spectator():
            try:
                while True:
                    await spectator.recv()
            except Exception:
                pass

        spectator_task = asyncio.get_running_loop().create_task(drain_spectator())

    seed_rng = Rng((seed ^ BOT_SEED_SALT) & ((1 << 64) - 1))
    bot_objs: list[Bot] = []
    bot_tasks = []
    for policy in bots:
        bot = Bot(
            "127.0.0.1",
            service.bound_port,
            script=BotScript(fallback=policy, fallback_seed=seed_rng.next_u64()),
            record=audit_wire,
        )
        bot_objs.append(bot)
        await bot.join()  # sequential joins keep seat order deterministic
        bot_tasks.append(asyncio.get_running_loop().create_task(bot.loop()))

    if n_hands == 0:
        await service.stop()
    await service.wait_closed()
    results = await asyncio.gather(*bot_tasks)
    if spectator_task is not None:
        await spectator_task
        await spectator.close()

    violations: list[str] = []
    records = service.event_records

    hands = split_hands(records)
    try:
        for hand_records in hands:
            replay_hand(hand_records, action_timeout=table.action_timeout)
    except ReplayError as exc:
        violations.append(f"replay: {exc}")

    hands_played = service.hands_played
    if hands_played != n_hands:
        violations.append(f"played {hands_played} of {n_hands} hands")
    for status, bot in zip(results, bot_objs):
        if status != 0:
            violations.append(f"bot at seat {bot.seat_id} exited with {status}")

    net = {}
    for seat in range(6):
        if service.buyins[seat]:
            net[seat] = (service.table_stacks[seat] or 0) - service.buyins[seat]
    if sum(net.values()) != 0:
        violations.append(f"net chips sum to {sum(net.values())}, not zero")

    frames_audited = 0
    if audit_wire:
        facts = _collect_facts(records)
        streams = [(seat_level(b.seat_id), b.frames) for b in bot_objs]
        streams.append(("spectator", spectator.frames))
        for level, frames in streams:
            frames_audited += len(frames)
            violations.extend(audit_stream(frames, level, facts))

    return SimReport(
        hands_played=hands_played,
        net_chips=net,
        violations=violations,
        wall_time_s=time.monotonic() - started,
        log_digest=log_digest(records),
        events=len(records),
        frames_audited=frames_audited,
    )

"""Seat bots: scripted plays plus simple fallback policies.

Bots speak the real wire protocol, so every bot run exercises the server, the
protocol layer and the engine together. Policies are deterministic given
their seed, which keeps full end-to-end runs replayable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .cards import Rng
from .client import JoinRefused, ServerClosed, TableClient
from .protocol import (
    ActionAck,
    ActionPrompt,
    ActionSpec,
    Error,
    Snapshot,
    SubmitAction,
)

CHECK_FOLD = "check_fold"
CALL_ANY = "call_any"
RANDOM = "random"


@dataclass
class BotStep:
    """One scripted decision: optional match conditions plus the action.

    kind "none" deliberately ignores the prompt (used to force timeouts).
    """

    kind: str
    amount: Optional[int] = None
    street: Optional[str] = None
    hand: Optional[int] = None

    def matches(self, street: Optional[str], hand_id: Optional[int]) -> bool:
        if self.street is not None and self.street != street:
            return False
        if self.hand is not None and self.hand != hand_id:
            return False
        return True


@dataclass
class BotScript:
    steps: list[BotStep] = field(default_factory=list)
    fallback: str = CHECK_FOLD
    fallback_seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "BotScript":
        fallback = data.get("fallback", CHECK_FOLD)
        seed = 0
        if isinstance(fallback, dict):
            seed = int(fallback.get(RANDOM, 0))
            fallback = RANDOM
        steps = [
            BotStep(
                kind=step["action"]["kind"],
                amount=step["action"].get("amount"),
                street=step.get("when", {}).get("street"),
                hand=step.get("when", {}).get("hand"),
            )
            for step in data.get("steps", [])
        ]
        return cls(steps=steps, fallback=fallback, fallback_seed=seed)

    @classmethod
    def from_file(cls, path: str | Path) -> "BotScript":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _kinds(legal: list[dict]) -> dict[str, dict]:
    return {t["kind"]: t for t in legal}


def choose_check_fold(legal: list[dict]) -> ActionSpec:
    kinds = _kinds(legal)
    if "check" in kinds:
        return ActionSpec(kind="check")
    return ActionSpec(kind="fold")


def choose_call_any(legal: list[dict]) -> ActionSpec:
    kinds = _kinds(legal)
    if "call" in kinds:
        return ActionSpec(kind="call")
    if "check" in kinds:
        return ActionSpec(kind="check")
    return ActionSpec(kind="fold")


def choose_random(legal: list[dict], rng: Rng) -> ActionSpec:
    """Mostly passive, sometimes aggressive, occasionally folds."""
    kinds = _kinds(legal)
    roll = rng.below(100)
    if "call" in kinds:
        if roll < 12:
            return ActionSpec(kind="fold")
        if roll < 78 or "raise_to" not in kinds:
            return ActionSpec(kind="call")
        template = kinds["raise_to"]
        span = template["max"] - template["min"]
        return ActionSpec(kind="raise_to", amount=template["min"] + rng.below(span + 1))
    if roll < 55 or "bet" not in kinds:
        if "check" in kinds:
            return ActionSpec(kind="check")
        return ActionSpec(kind="fold")
    template = kinds["bet"]
    span = template["max"] - template["min"]
    return ActionSpec(kind="bet", amount=template["min"] + rng.below(span + 1))


class Bot:
    """One seat session driven by a script and a fallback policy."""

    def __init__(
        self,
        address: str,
        port: int,
        script: Optional[BotScript] = None,
        policy: str = CHECK_FOLD,
        seed: int = 0,
        record: bool = False,
    ):
        self.client = TableClient(address, port, record=record)
        self.script = script or BotScript(fallback=policy, fallback_seed=seed)
        self.rng = Rng(self.script.fallback_seed if self.script.fallback == RANDOM else seed)
        self.seat_id: Optional[int] = None
        self.street: Optional[str] = None
        self.hand_id: Optional[int] = None
        self.hands_seen = 0
        self.last_legal: list[dict] = []

    @property
    def frames(self) -> list[str]:
        return self.client.frames

    def _choose(self) -> Optional[ActionSpec]:
        if self.script.steps and self.script.steps[0].matches(self.street, self.hand_id):
            step = self.script.steps.pop(0)
            if step.kind == "none":
                return None
            return ActionSpec(kind=step.kind, amount=step.amount)
        return self._fallback()

    def _fallback(self) -> ActionSpec:
        if self.script.fallback == CALL_ANY:
            return choose_call_any(self.last_legal)
        if self.script.fallback == RANDOM:
            return choose_random(self.last_legal, self.rng)
        return choose_check_fold(self.last_legal)

    async def join(self) -> int:
        """Connect and take a seat; raises JoinRefused when the table is full."""
        await self.client.connect()
        try:
            welcome = await self.client.join("seat")
        except JoinRefused:
            await self.client.close()
            raise
        self.seat_id = welcome.seat_id
        return self.seat_id

    async def loop(self) -> int:
        """Answer prompts until the server closes the session; 0 on a clean end."""
        try:
            while True:
                msg = await self.client.recv()
                if isinstance(msg, Snapshot):
                    self.street = msg.view.street
                    self.hand_id = msg.view.hand_id
                elif isinstance(msg, ActionPrompt):
                    self.last_legal = msg.legal
                    choice = self._choose()
                    if choice is not None:
                        await self.client.send(SubmitAction(action=choice))
                elif isinstance(msg, ActionAck) and not msg.accepted:
                    if msg.reason == "illegal_action":
                        # A scripted action the table refused: fall back, stay live.
                        await self.client.send(SubmitAction(action=self._fallback()))
                elif isinstance(msg, Error):
                    return 1
                else:
                    record = getattr(msg, "record", None)
                    if record is not None and record.get("type") == "hand_end":
                        self.hands_seen += 1
        except ServerClosed:
            return 0
        except (ConnectionError, OSError):
            return 0
        finally:
            await self.client.close()

    async def run(self) -> int:
        try:
            await self.join()
        except JoinRefused:
            return 2
        return await self.loop()


async def run_bot(
    address: str,
    port: int,
    script_file: Optional[str] = None,
    policy: str = CHECK_FOLD,
    seed: int = 0,
    record: bool = False,
) -> int:
    script = BotScript.from_file(script_file) if script_file else None
    bot = Bot(address, port, script=script, policy=policy, seed=seed, record=record)
    return await bot.run()

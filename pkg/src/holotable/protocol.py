"""The wire language shared by seats, admin, spectators and bots.

Frames are a 4-byte big-endian length prefix plus a UTF-8 JSON body; the body
is canonical (sorted keys, compact separators, ASCII) so identical messages
are byte-identical. The envelope is {v, seq, type, payload} with v = 1 and a
per-connection, per-direction strictly increasing seq. The same bodies travel
over the WebSocket endpoint as text frames, without the length prefix.
"""

from __future__ import annotations

import json
import struct
from typing import Any, ClassVar, Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, ValidationError

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 20  # 1 MiB body limit

# Error codes carried by Error messages and ProtocolError.
FRAME_TOO_LARGE = "frame_too_large"
TRUNCATED_FRAME = "truncated_frame"
BAD_VERSION = "bad_version"
MALFORMED_BODY = "malformed_body"
UNKNOWN_TYPE = "unknown_type"
BAD_SEQ = "bad_seq"
TABLE_FULL = "table_full"
BAD_HELLO = "bad_hello"
PIN_DENIED = "pin_denied"
PIN_LOCKED = "pin_locked"
ADMIN_PRESENT = "admin_present"
UNAUTHORIZED = "unauthorized"
FORBIDDEN = "forbidden"

# ActionAck reasons.
OUT_OF_TURN = "out_of_turn"
ILLEGAL_ACTION = "illegal_action"
NO_HAND = "no_hand"


class ProtocolError(Exception):
    """A typed wire-level failure; `code` is one of the constants above."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


# --- message schema ----------------------------------------------------------


class Message(BaseModel):
    model_config = ConfigDict(extra="forbid")
    TYPE: ClassVar[str] = ""


class Hello(Message):
    TYPE: ClassVar[str] = "hello"
    role: Literal["seat", "admin", "spectator"]
    pin: Optional[str] = None


class TableInfo(Message):
    TYPE: ClassVar[str] = ""
    small_blind: int
    big_blind: int
    starting_stack: int
    seat_count: int
    action_timeout: float


class Welcome(Message):
    TYPE: ClassVar[str] = "welcome"
    seat_id: Optional[int] = None
    table_config: TableInfo


class HoleView(Message):
    """Either the cards themselves or a count-only marker, never both."""

    TYPE: ClassVar[str] = ""
    cards: Optional[list[str]] = None
    count: Optional[int] = None


class SeatView(Message):
    TYPE: ClassVar[str] = ""
    seat_id: int
    status: str
    stack: int
    street_committed: int = 0
    total_committed: int = 0
    connected: bool = False
    hole: Optional[HoleView] = None


class PotView(Message):
    TYPE: ClassVar[str] = ""
    amount: int
    eligible: list[int]


class AdminInfo(Message):
    TYPE: ClassVar[str] = ""
    seats_connected: int
    spectators: int
    admin_connected: bool
    hole_visibility: bool
    pending_config: Optional[dict] = None
    pending_pause: bool = False
    hands_played: int = 0


class SnapshotView(Message):
    TYPE: ClassVar[str] = ""
    level: str  # "seat:<i>" | "spectator" | "admin"
    phase: str  # idle | hand_in_progress | paused | shutting_down
    config: TableInfo
    seats: list[SeatView]
    hand_id: Optional[int] = None
    seq: Optional[int] = None
    street: Optional[str] = None
    board: list[str] = []
    pots: list[PotView] = []
    button: Optional[int] = None
    acting: Optional[int] = None
    current_bet: Optional[int] = None
    min_raise: Optional[int] = None
    admin: Optional[AdminInfo] = None


class Snapshot(Message):
    TYPE: ClassVar[str] = "snapshot"
    view: SnapshotView


class ActionPrompt(Message):
    TYPE: ClassVar[str] = "action_prompt"
    legal: list[dict]
    deadline_ms: int


class ActionSpec(Message):
    TYPE: ClassVar[str] = ""
    kind: Literal["fold", "check", "call", "bet", "raise_to"]
    amount: Optional[int] = None


class SubmitAction(Message):
    TYPE: ClassVar[str] = "submit_action"
    action: ActionSpec


class ActionAck(Message):
    TYPE: ClassVar[str] = "action_ack"
    accepted: bool
    reason: Optional[str] = None


class AdminCmd(Message):
    TYPE: ClassVar[str] = "admin_cmd"
    cmd: str
    args: dict = {}


class AdminResult(Message):
    TYPE: ClassVar[str] = "admin_result"
    ok: bool
    detail: Any = None


class Event(Message):
    TYPE: ClassVar[str] = "event"
    record: dict


class Error(Message):
    TYPE: ClassVar[str] = "error"
    code: str
    detail: Optional[str] = None


class Ping(Message):
    TYPE: ClassVar[str] = "ping"
    nonce: Optional[int] = None


class Pong(Message):
    TYPE: ClassVar[str] = "pong"
    nonce: Optional[int] = None


MESSAGE_TYPES: dict[str, Type[Message]] = {
    cls.TYPE: cls
    for cls in (
        Hello,
        Welcome,
        Snapshot,
        ActionPrompt,
        SubmitAction,
        ActionAck,
        AdminCmd,
        AdminResult,
        Event,
        Error,
        Ping,
        Pong,
    )
}


# --- encoding ----------------------------------------------------------------


def encode_raw_body(type_: str, payload: dict, seq: int) -> str:
    """Canonical envelope text from an already-shaped payload dict.

    The server's snapshot fan-out uses this to skip model construction; the
    bytes are identical to encode_body of the equivalent typed message.
    """
    envelope = {"v": PROTOCOL_VERSION, "seq": seq, "type": type_, "payload": payload}
    return canonical_json(envelope)


def encode_body(msg: Message, seq: int) -> str:
    """Canonical envelope text for one message (the WebSocket form)."""
    return encode_raw_body(msg.TYPE, msg.model_dump(exclude_none=True), seq)


def frame(body: str) -> bytes:
    """Length-prefix one envelope body (the TCP form)."""
    data = body.encode()
    if len(data) > MAX_FRAME:
        raise ProtocolError(FRAME_TOO_LARGE, f"{len(data)} byte body")
    return struct.pack(">I", len(data)) + data


def encode(msg: Message, seq: int) -> bytes:
    """A full length-prefixed frame for one typed message."""
    return frame(encode_body(msg, seq))


def parse_body(body: bytes | str) -> tuple[Message, int]:
    """Parse one envelope body into (message, seq); raises ProtocolError."""
    try:
        envelope = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(MALFORMED_BODY, f"bad json: {exc}") from None
    if not isinstance(envelope, dict):
        raise ProtocolError(MALFORMED_BODY, "envelope is not an object")
    if envelope.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(BAD_VERSION, f"got {envelope.get('v')!r}")
    type_ = envelope.get("type")
    if not isinstance(type_, str) or type_ not in MESSAGE_TYPES:
        raise ProtocolError(UNKNOWN_TYPE, f"got {type_!r}")
    seq = envelope.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ProtocolError(MALFORMED_BODY, "seq must be a non-negative integer")
    payload = envelope.get("payload")
    if not isinstance(payload, dict):
        raise ProtocolError(MALFORMED_BODY, "payload must be an object")
    if set(envelope) != {"v", "seq", "type", "payload"}:
        raise ProtocolError(MALFORMED_BODY, "unexpected envelope fields")
    try:
        msg = MESSAGE_TYPES[type_].model_validate(payload)
    except ValidationError as exc:
        raise ProtocolError(MALFORMED_BODY, f"bad {type_} payload: {exc.error_count()} errors") from None
    return msg, seq


class FrameDecoder:
    """Re-entrant length-prefixed frame splitter for one connection.

    feed() accepts arbitrary partial reads and returns the complete frame
    bodies found so far. A declared length over MAX_FRAME raises immediately;
    at that point the stream cannot be trusted and must be closed. Call eof()
    when the peer closes to detect a truncated final frame.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < 4:
                break
            (length,) = struct.unpack_from(">I", self._buf)
            if length > MAX_FRAME:
                raise ProtocolError(FRAME_TOO_LARGE, f"declared {length} bytes")
            if len(self._buf) < 4 + length:
                break
            frames.append(bytes(self._buf[4 : 4 + length]))
            del self._buf[: 4 + length]
        return frames

    def eof(self) -> None:
        if self._buf:
            raise ProtocolError(TRUNCATED_FRAME, f"{len(self._buf)} bytes pending")

"""The authoritative table server.

All state mutation happens on one logical event loop consuming a single
ordered queue of connection, timer and lifecycle events; connection I/O runs
concurrently but only ever enqueues. Given the same queue order and seed the
server's event log is byte-identical, which is what the replay tests lean on.

Up to six seat sessions, one PIN-gated admin and any number of spectators
share one TCP port (role chosen in the Hello handshake). The same message
schema is exposed over a WebSocket endpoint for browser clients.
"""

from __future__ import annotations

import asyncio
import hmac
import json
import os
import re
import subprocess
import sys
import time
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import protocol
from .cards import Rng, new_deck, shuffle
from .engine import (
    CHECK,
    FOLD,
    Action,
    HandState,
    IllegalActionError,
    OutOfTurnError,
    TableConfig,
    apply_action,
    legal_actions,
    new_hand,
)
from .protocol import (
    ActionAck,
    ActionPrompt,
    AdminCmd,
    AdminResult,
    Error,
    Hello,
    Message,
    Ping,
    Pong,
    ProtocolError,
    SubmitAction,
    TableInfo,
    Welcome,
    encode_body,
    encode_raw_body,
    frame,
    parse_body,
)
from .views import ADMIN, SPECTATOR, redact_event, redact_state, seat_level

PIN_PATTERN = re.compile(r"^[0-9]{6}$")

# Lifecycle phases
IDLE = "idle"
HAND_IN_PROGRESS = "hand_in_progress"
PAUSED = "paused"
SHUTTING_DOWN = "shutting_down"


class TableSettings(BaseModel):
    """Table parameters as they appear in config files and admin commands."""

    model_config = ConfigDict(extra="forbid")
    small_blind: int = 5
    big_blind: int = 10
    starting_stack: int = 1000
    action_timeout: float = 30.0

    def to_engine(self, seat_count: int) -> TableConfig:
        return TableConfig(
            small_blind=self.small_blind,
            big_blind=self.big_blind,
            starting_stack=self.starting_stack,
            seat_count=seat_count,
            action_timeout=self.action_timeout,
        )


class ServerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bind_address: str = "127.0.0.1"
    port: int = 4646
    http_port: Optional[int] = None  # WebSocket/browser listener; None = off
    pin: str
    seat_count: int = 6
    table: TableSettings = Field(default_factory=TableSettings)
    seed: Optional[int] = None
    spawn_clients: bool = False
    lockout_max_attempts: int = 3
    lockout_lock_seconds: float = 60.0
    log_dir: Optional[str] = None
    wait_seats: int = 0  # deal only once this many seats are funded
    hand_delay: float = 0.0
    max_hands: Optional[int] = None  # stop at the hand boundary after this many

    @field_validator("pin")
    @classmethod
    def _pin_is_six_digits(cls, value: str) -> str:
        if not PIN_PATTERN.match(value):
            raise ValueError("pin must be exactly 6 ASCII digits")
        return value

    @field_validator("port", "http_port")
    @classmethod
    def _port_range(cls, value):
        if value is not None and not 0 <= value <= 65535:
            raise ValueError("port out of range")
        return value

    @field_validator("seat_count")
    @classmethod
    def _seat_count_range(cls, value: int) -> int:
        if not 2 <= value <= 6:
            raise ValueError("seat_count must be between 2 and 6")
        return value

    def table_config(self) -> TableConfig:
        return self.table.to_engine(self.seat_count)


def load_config(
    cli: dict, config_file: Optional[str] = None, env: Optional[dict] = None
) -> ServerConfig:
    """Merge config file < environment PIN < CLI flags into a ServerConfig."""
    env = os.environ if env is None else env
    data: dict = {}
    if config_file:
        data.update(json.loads(Path(config_file).read_text()))
    if "HOLOTABLE_PIN" in env and "pin" not in data:
        data["pin"] = env["HOLOTABLE_PIN"]
    table = dict(data.get("table") or {})
    # The file may use the CLI's short names at top level.
    for short, long in (
        ("sb", "small_blind"),
        ("bb", "big_blind"),
        ("stack", "starting_stack"),
        ("timeout", "action_timeout"),
    ):
        if short in data:
            table[long] = data.pop(short)
    for key in ("small_blind", "big_blind", "starting_stack", "action_timeout"):
        if cli.get(key) is not None:
            table[key] = cli[key]
    if table:
        data["table"] = table
    for key, value in cli.items():
        if key in ("small_blind", "big_blind", "starting_stack", "action_timeout"):
            continue
        if value is not None:
            data[key] = value
    return ServerConfig.model_validate(data)


class LockoutState:
    """Failed-PIN counter with a hard lock window."""

    def __init__(self, max_attempts: int, lock_seconds: float):
        self.max_attempts = max_attempts
        self.lock_seconds = lock_seconds
        self.failed_attempts = 0
        self.locked_until: Optional[float] = None

    def remaining(self, now: float) -> float:
        if self.locked_until is None:
            return 0.0
        return max(0.0, self.locked_until - now)

    def attempt(self, given: Optional[str], expected: str, now: float) -> str:
        """granted | denied | locked. Attempts while locked never evaluate."""
        if self.locked_until is not None:
            if now < self.locked_until:
                return "locked"
            self.locked_until = None
            self.failed_attempts = 0
        given = given or ""
        ok = bool(PIN_PATTERN.match(given)) and hmac.compare_digest(given, expected)
        if ok:
            self.failed_attempts = 0
            return "granted"
        self.failed_attempts += 1
        if self.failed_attempts >= self.max_attempts:
            self.locked_until = now + self.lock_seconds
            return "locked"
        return "denied"


class Connection:
    """One client session; sending is queued so the event loop never blocks."""

    _counter = 0

    def __init__(self, service: "TableService"):
        Connection._counter += 1
        self.id = Connection._counter
        self.service = service
        self.role: Optional[str] = None  # set after Hello
        self.seat_id: Optional[int] = None
        self.out_seq = 0
        self.last_in_seq = 0
        self.outbox: asyncio.Queue = asyncio.Queue()
        self.closed = False

    @property
    def level(self) -> Optional[str]:
        if self.role == "seat":
            return seat_level(self.seat_id)
        if self.role == "admin":
            return ADMIN
        if self.role == "spectator":
            return SPECTATOR
        return None

    def send(self, msg: Message) -> None:
        self.out_seq += 1
        self._enqueue(encode_body(msg, self.out_seq))

    def send_raw(self, type_: str, payload: dict) -> None:
        self.out_seq += 1
        self._enqueue(encode_raw_body(type_, payload, self.out_seq))

    def _enqueue(self, body: str) -> None:
        if not self.closed:
            self.outbox.put_nowait(body)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.outbox.put_nowait(None)


class TcpConnection(Connection):
    def __init__(self, service, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        super().__init__(service)
        self.reader = reader
        self.writer = writer

    async def run_writer(self) -> None:
        try:
            while True:
                body = await self.outbox.get()
                if body is None:
                    break
                # Coalesce whatever else is queued into one socket write.
                chunks = [frame(body)]
                while not self.outbox.empty():
                    body = self.outbox.get_nowait()
                    if body is None:
                        self.writer.write(b"".join(chunks))
                        await self.writer.drain()
                        return
                    chunks.append(frame(body))
                self.writer.write(b"".join(chunks))
                await self.writer.drain()
        except (ConnectionError, OSError):
            pass
        finally:
            try:
                self.writer.close()
            except Exception:
                pass

    async def run_reader(self) -> None:
        decoder = protocol.FrameDecoder()
        queue = self.service.queue
        try:
            while True:
                data = await self.reader.read(65536)
                if not data:
                    decoder.eof()
                    break
                for body in decoder.feed(data):
                    try:
                        msg, seq = parse_body(body)
                    except ProtocolError as exc:
                        queue.put_nowait(("proto_error", self, exc))
                    else:
                        queue.put_nowait(("msg", self, msg, seq))
        except ProtocolError as exc:  # framing integrity lost
            queue.put_nowait(("proto_fatal", self, exc))
        except (ConnectionError, OSError, asyncio.IncompleteReadError):
            pass
        finally:
            queue.put_nowait(("disconnect", self))


class TableService:
    """Everything authoritative: registry, lockout, lifecycle, engine driving."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.table = config.table_config()
        seed = config.seed
        if seed is None:
            seed = int.from_bytes(os.urandom(8), "big")
        self.seed = seed
        self.rng = Rng(seed)

        self.queue: asyncio.Queue = asyncio.Queue()
        self.phase = IDLE
        self.hand: Optional[HandState] = None
        self.hand_counter = 0
        self.hands_played = 0
        self.button: Optional[int] = None

        self.seat_conns: list[Optional[Connection]] = [None] * 6
        self.table_stacks: list[Optional[int]] = [None] * 6
        self.buyins = [0] * 6
        self.admin_conn: Optional[Connection] = None
        self.spectators: list[Connection] = []
        self.all_conns: dict[int, Connection] = {}

        self.lockout = LockoutState(
            config.lockout_max_attempts, config.lockout_lock_seconds
        )
        self.admin_sees_holes = False
        self.pending_table: Optional[TableSettings] = None
        self.pending_pause = False

        self.event_records: list[dict] = []
        self.audit_records: list[dict] = []
        self._event_file = None
        self._audit_file = None

        self._prompt_token = 0
        self._prompted_for: Optional[tuple[int, int]] = None
        self._timer_handle: Optional[asyncio.TimerHandle] = None
        self._deal_timer_armed = False
        self._stopping = False
        self._stopped = asyncio.Event()
        self._tasks: set[asyncio.Task] = set()
        self._tcp_server: Optional[asyncio.base_events.Server] = None
        self._http_server = None  # uvicorn.Server when http is enabled
        self._children: list[subprocess.Popen] = []
        self.bound_port: Optional[int] = None
        self.bound_http_port: Optional[int] = None

    # -- logging ---------------------------------------------------------

    def _open_logs(self) -> None:
        if self.config.log_dir:
            log_dir = Path(self.config.log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            self._event_file = open(log_dir / "events.jsonl", "a")
            self._audit_file = open(log_dir / "audit.jsonl", "a")

    def _log(self, record: dict) -> None:
        self.event_records.append(record)
        if self._event_file:
            self._event_file.write(protocol.canonical_json(record) + "\n")
            self._event_file.flush()

    def _audit(self, record: dict) -> None:
        record = {"ts": round(time.time(), 3), **record}
        self.audit_records.append(record)
        if self._audit_file:
            self._audit_file.write(protocol.canonical_json(record) + "\n")
            self._audit_file.flush()

    # -- lifecycle ---------------------------------------------------------

    async def start(self) -> None:
        """Bind the TCP listener, open logs, optionally spawn the clients."""
        self._open_logs()
        self._log(
            {
                "type": "session_start",
                "seat_count": self.config.seat_count,
                "sb": self.table.small_blind,
                "bb": self.table.big_blind,
                "stack": self.table.starting_stack,
                "timeout": self.table.action_timeout,
                "seed": self.seed,
            }
        )
        self._tcp_server = await asyncio.start_server(
            self._on_tcp_connect, self.config.bind_address, self.config.port
        )
        self.bound_port = self._tcp_server.sockets[0].getsockname()[1]
        self._spawn_task(self._run_loop(), name="event-loop")
        if self.config.spawn_clients:
            self._spawn_children()

    async def stop(self) -> None:
        if self._stopping:
            await self._stopped.wait()
            return
        self.queue.put_nowait(("stop",))
        await self._stopped.wait()

    async def wait_closed(self) -> None:
        await self._stopped.wait()

    def _spawn_task(self, coro, name: str) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro, name=name)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    def _spawn_children(self) -> None:
        """Launch the six seat clients successively, then the admin client."""
        child_rng = Rng((self.seed ^ 0xC11E547AB1E5EED5) & ((1 << 64) - 1))
        env = dict(os.environ)
        env["HOLOTABLE_PIN"] = self.config.pin
        base = [
            sys.executable, "-m", "holotable",
        ]
        for index in range(self.config.seat_count):
            cmd = base + [
                "bot",
                "--address", self.config.bind_address,
                "--port", str(self.bound_port),
                "--random", str(child_rng.next_u64()),
            ]
            self._children.append(
                subprocess.Popen(cmd, env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
            )
            self._log({"type": "spawn", "role": "seat", "index": index})
        cmd = base + [
            "admin",
            "--address", self.config.bind_address,
            "--port", str(self.bound_port),
            "--hold",
        ]
        self._children.append(
            subprocess.Popen(cmd, env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        )
        self._log({"type": "spawn", "role": "admin"})

    async def _on_tcp_connect(self, reader, writer) -> None:
        conn = TcpConnection(self, reader, writer)
        self.queue.put_nowait(("connect", conn))
        self._spawn_task(conn.run_writer(), name=f"writer-{conn.id}")
        self._spawn_task(conn.run_reader(), name=f"reader-{conn.id}")

    # -- the single ordered event loop --------------------------------------

    async def _run_loop(self) -> None:
        while True:
            event = await self.queue.get()
            kind = event[0]
            if kind == "stop":
                self._shutdown()
                break
            try:
                if kind == "msg":
                    self._on_message(event[1], event[2], event[3])
                elif kind == "connect":
                    self.all_conns[event[1].id] = event[1]
                elif kind == "disconnect":
                    self._on_disconnect(event[1])
                elif kind == "proto_error":
                    self._on_proto_error(event[1], event[2])
                elif kind == "proto_fatal":
                    conn, exc = event[1], event[2]
                    conn.send(Error(code=exc.code, detail=exc.detail))
                    self._drop(conn)
                elif kind == "timer":
                    self._on_timer(event[1])
                elif kind == "deal":
                    self._advance([])
            except Exception as exc:  # never die on one bad event
                print(f"holotable: error handling {kind}: {exc!r}", file=sys.stderr)
        self._stopped.set()

    def _shutdown(self) -> None:
        self.phase = SHUTTING_DOWN
        self._log({"type": "phase", "phase": SHUTTING_DOWN})
        self._cancel_timer()
        for conn in list(self.all_conns.values()):
            conn.close()
        if self._tcp_server is not None:
            self._tcp_server.close()
        if self._http_server is not None:
            self._http_server.should_exit = True
        for child in self._children:
            if child.poll() is None:
                child.terminate()
        for child in self._children:
            try:
                child.wait(timeout=5)
            except subprocess.TimeoutExpired:
                child.kill()
        if self._event_file:
            self._event_file.close()
        if self._audit_file:
            self._audit_file.close()
        self._stopping = True

    # -- connection handling -------------------------------------------------

    def _drop(self, conn: Connection) -> None:
        conn.close()
        self.queue.put_nowait(("disconnect", conn))

    def _on_disconnect(self, conn: Connection) -> None:
        if conn.id not in self.all_conns:
            return
        del self.all_conns[conn.id]
        conn.close()
        if conn.role == "seat":
            seat = conn.seat_id
            if self.seat_conns[seat] is conn:
                self.seat_conns[seat] = None
                in_hand = (
                    self.hand is not None
                    and not self.hand.complete
                    and self.hand.seats[seat].dealt
                )
                if not in_hand:
                    stack = self.table_stacks[seat]
                    self.table_stacks[seat] = None
                    self._log({"type": "leave", "role": "seat", "seat": seat, "stack": stack})
                else:
                    self._log({"type": "leave", "role": "seat", "seat": seat, "stack": None})
                    if self.hand.acting == seat:
                        # Its turns now auto-play immediately.
                        self._cancel_timer()
                        self.queue.put_nowait(("timer", self._prompt_token))
        elif conn.role == "admin":
            if self.admin_conn is conn:
                self.admin_conn = None
                self._log({"type": "leave", "role": "admin"})
        elif conn.role == "spectator":
            if conn in self.spectators:
                self.spectators.remove(conn)

    def _on_proto_error(self, conn: Connection, exc: ProtocolError) -> None:
        conn.send(Error(code=exc.code, detail=exc.detail))
        if conn.role is None:
            # Garbage before the handshake: not a client we want.
            self._drop(conn)

    def _on_message(self, conn: Connection, msg: Message, seq: int) -> None:
        if conn.id not in self.all_conns:
            return  # already dropped
        if seq <= conn.last_in_seq:
            conn.send(Error(code=protocol.BAD_SEQ, detail=f"seq {seq} not increasing"))
            return
        conn.last_in_seq = seq

        if conn.role is None:
            if isinstance(msg, Hello):
                self._on_hello(conn, msg)
            else:
                conn.send(Error(code=protocol.BAD_HELLO, detail="first message must be hello"))
                self._drop(conn)
            return

        if isinstance(msg, Hello):
            conn.send(Error(code=protocol.BAD_HELLO, detail="already joined"))
        elif isinstance(msg, Ping):
            conn.send(Pong(nonce=msg.nonce))
        elif isinstance(msg, Pong):
            pass
        elif isinstance(msg, SubmitAction):
            self._on_submit(conn, msg)
        elif isinstance(msg, AdminCmd):
            self._on_admin_cmd(conn, msg)
        else:
            # Server-to-client types echoed back at us.
            conn.send(Error(code=protocol.FORBIDDEN, detail=f"{msg.TYPE} is server-sent"))

    # -- handshake -------------------------------------------------------------

    def _on_hello(self, conn: Connection, msg: Hello) -> None:
        if msg.role == "seat":
            seat = self._free_seat()
            if seat is None:
                conn.send(Error(code=protocol.TABLE_FULL))
                self._drop(conn)
                return
            conn.role = "seat"
            conn.seat_id = seat
            self.seat_conns[seat] = conn
            if self.table_stacks[seat] is None:
                self.table_stacks[seat] = self.table.starting_stack
                self.buyins[seat] += self.table.starting_stack
            self._log({"type": "join", "role": "seat", "seat": seat})
            conn.send(Welcome(seat_id=seat, table_config=self._table_info()))
            conn.send_raw("snapshot", {"view": self._view_for(conn)})
            self._maybe_deal()
        elif msg.role == "spectator":
            conn.role = "spectator"
            self.spectators.append(conn)
            self._log({"type": "join", "role": "spectator"})
            conn.send(Welcome(table_config=self._table_info()))
            conn.send_raw("snapshot", {"view": self._view_for(conn)})
        else:  # admin
            if self.admin_conn is not None:
                conn.send(Error(code=protocol.ADMIN_PRESENT, detail="an admin is connected"))
                self._drop(conn)
                return
            now = asyncio.get_running_loop().time()
            verdict = self.lockout.attempt(msg.pin, self.config.pin, now)
            self._audit({"event": "admin_auth", "result": verdict})
            if verdict == "granted":
                conn.role = "admin"
                self.admin_conn = conn
                self._log({"type": "join", "role": "admin"})
                conn.send(Welcome(table_config=self._table_info()))
                conn.send_raw("snapshot", {"view": self._view_for(conn)})
            elif verdict == "denied":
                conn.send(Error(code=protocol.PIN_DENIED, detail="wrong or malformed pin"))
                self._drop(conn)
            else:
                remaining = self.lockout.remaining(now)
                conn.send(
                    Error(code=protocol.PIN_LOCKED, detail=f"locked for {remaining:.0f}s")
                )
                self._drop(conn)

    def _free_seat(self) -> Optional[int]:
        for seat in range(self.config.seat_count):
            if self.seat_conns[seat] is None and self.table_stacks[seat] is None:
                return seat
        return None

    def _table_info(self) -> TableInfo:
        return TableInfo(
            small_blind=self.table.small_blind,
            big_blind=self.table.big_blind,
            starting_stack=self.table.starting_stack,
            seat_count=self.table.seat_count,
            action_timeout=self.table.action_timeout,
        )

    # -- seat actions ------------------------------------------------------------

    def _on_submit(self, conn: Connection, msg: SubmitAction) -> None:
        if conn.role != "seat":
            conn.send(Error(code=protocol.FORBIDDEN, detail="seat role required"))
            return
        hand = self.hand
        if hand is None or hand.complete:
            conn.send(ActionAck(accepted=False, reason=protocol.NO_HAND))
            return
        if hand.acting != conn.seat_id:
            conn.send(ActionAck(accepted=False, reason=protocol.OUT_OF_TURN))
            return
        try:
            action = Action(msg.action.kind, msg.action.amount)
            events = apply_action(hand, conn.seat_id, action)
        except OutOfTurnError:
            conn.send(ActionAck(accepted=False, reason=protocol.OUT_OF_TURN))
            return
        except (IllegalActionError, ValueError):
            conn.send(ActionAck(accepted=False, reason=protocol.ILLEGAL_ACTION))
            return
        self._cancel_timer()
        conn.send(ActionAck(accepted=True))
        self._advance(events)

    def _on_timer(self, token: int) -> None:
        if token != self._prompt_token:
            return  # stale timer
        hand = self.hand
        if hand is None or hand.complete or hand.acting is None:
            return
        seat = hand.acting
        kinds = {t.kind for t in legal_actions(hand, seat)}
        kind = CHECK if CHECK in kinds else FOLD
        events = apply_action(hand, seat, Action(kind), auto=True)
        self._advance(events)

    # -- engine driving ------------------------------------------------------------

    def _advance(self, events: list[dict]) -> None:
        """Log and broadcast fresh engine events, then push the hand forward."""
        if events:
            self._broadcast(events)
        while True:
            if self.hand is not None and self.hand.complete:
                self._hand_boundary()
                continue
            if self.hand is None and self._can_deal():
                if self.config.hand_delay > 0:
                    self._arm_deal_timer()
                    break
                self._deal()
                continue
            break
        if self.hand is not None and self.hand.acting is not None:
            signature = (self.hand.hand_id, len(self.hand.events))
            if signature != self._prompted_for:
                self._prompted_for = signature
                self._prompt()

    def _broadcast(self, events: list[dict]) -> None:
        for record in events:
            self._log(record)
        conns = [c for c in self.all_conns.values() if c.role is not None]
        for record in events:
            if record["type"] == "deal_hole":
                public = redact_event(record, SPECTATOR)
                admin_version = redact_event(record, ADMIN, self.admin_sees_holes)
                for conn in conns:
                    if conn.role == "seat" and record["seat"] == conn.seat_id:
                        version = record
                    elif conn.role == "admin":
                        version = admin_version
                    else:
                        version = public
                    conn.send_raw("event", {"record": version})
            else:
                for conn in conns:
                    conn.send_raw("event", {"record": record})
        self._push_snapshots()

    def _push_snapshots(self) -> None:
        for conn in self.all_conns.values():
            if conn.role is not None:
                conn.send_raw("snapshot", {"view": self._view_for(conn)})

    def _view_for(self, conn: Connection) -> dict:
        admin_info = None
        if conn.role == "admin":
            admin_info = self._admin_info()
        return redact_state(
            level=conn.level,
            phase=self.phase,
            config=self.table,
            table_stacks=self.table_stacks,
            connected=[c is not None for c in self.seat_conns],
            hand=self.hand,
            admin_info=admin_info,
            admin_sees_holes=self.admin_sees_holes,
        )

    def _admin_info(self) -> dict:
        info = {
            "seats_connected": sum(c is not None for c in self.seat_conns),
            "spectators": len(self.spectators),
            "admin_connected": self.admin_conn is not None,
            "hole_visibility": self.admin_sees_holes,
            "pending_pause": self.pending_pause,
            "hands_played": self.hands_played,
        }
        if self.pending_table is not None:
            info["pending_config"] = self.pending_table.model_dump()
        return info

    def _prompt(self) -> None:
        hand = self.hand
        seat = hand.acting
        self._prompt_token += 1
        conn = self.seat_conns[seat]
        if conn is None:
            # Disconnected seat: auto-play immediately.
            self.queue.put_nowait(("timer", self._prompt_token))
            return
        templates = [t.to_payload() for t in legal_actions(hand, seat)]
        deadline_ms = int(self.table.action_timeout * 1000)
        conn.send(ActionPrompt(legal=templates, deadline_ms=deadline_ms))
        if self.table.action_timeout > 0:
            loop = asyncio.get_running_loop()
            token = self._prompt_token
            self._timer_handle = loop.call_later(
                self.table.action_timeout,
                lambda: self.queue.put_nowait(("timer", token)),
            )

    def _cancel_timer(self) -> None:
        self._prompt_token += 1
        if self._timer_handle is not None:
            self._timer_handle.cancel()
            self._timer_handle = None

    def _arm_deal_timer(self) -> None:
        if self._deal_timer_armed:
            return
        self._deal_timer_armed = True
        loop = asyncio.get_running_loop()
        loop.call_later(
            self.config.hand_delay, lambda: self.queue.put_nowait(("deal",))
        )

    # -- hand lifecycle ------------------------------------------------------------

    def _can_deal(self) -> bool:
        if self.phase not in (IDLE,):
            return False
        if self._stopping:
            return False
        if self.config.max_hands is not None and self.hands_played >= self.config.max_hands:
            return False
        funded = [
            seat
            for seat in range(self.config.seat_count)
            if self.seat_conns[seat] is not None
            and (self.table_stacks[seat] or 0) > 0
        ]
        return len(funded) >= max(2, self.config.wait_seats)

    def _maybe_deal(self) -> None:
        if self.hand is None and self._can_deal():
            self._advance([])

    def _deal(self) -> None:
        self._deal_timer_armed = False
        funded = {
            seat: self.table_stacks[seat]
            for seat in range(self.config.seat_count)
            if self.seat_conns[seat] is not None and (self.table_stacks[seat] or 0) > 0
        }
        self.button = self._next_button(set(funded))
        self.hand_counter += 1
        deck = shuffle(new_deck(), self.rng.next_u64())
        self.hand = new_hand(
            self.table, funded, self.button, deck, hand_id=self.hand_counter
        )
        self.phase = HAND_IN_PROGRESS
        self._broadcast(list(self.hand.events))

    def _next_button(self, occupied: set[int]) -> int:
        if self.button is None:
            return min(occupied)
        for off in range(1, 7):
            seat = (self.button + off) % 6
            if seat in occupied:
                return seat
        raise RuntimeError("no occupied seats")

    def _hand_boundary(self) -> None:
        """Bookkeeping after a finished hand, plus pending admin changes."""
        hand = self.hand
        for seat_state in hand.dealt_seats():
            self.table_stacks[seat_state.seat_id] = seat_state.stack
        self.hands_played += 1
        self.hand = None
        self.phase = IDLE

        if self.pending_table is not None:
            self.table = self.pending_table.to_engine(self.config.seat_count)
            self.pending_table = None
            self._log(
                {
                    "type": "config",
                    "sb": self.table.small_blind,
                    "bb": self.table.big_blind,
                    "stack": self.table.starting_stack,
                    "timeout": self.table.action_timeout,
                }
            )
        if self.pending_pause:
            self.pending_pause = False
            self.phase = PAUSED
            self._log({"type": "phase", "phase": PAUSED})

        # Seats whose connection died during the hand are freed now.
        for seat in range(6):
            if self.table_stacks[seat] is not None and self.seat_conns[seat] is None:
                self._log(
                    {
                        "type": "leave",
                        "role": "seat",
                        "seat": seat,
                        "stack": self.table_stacks[seat],
                    }
                )
                self.table_stacks[seat] = None

        # Busted seats reload to the configured stack (play chips).
        for seat in range(6):
            if self.seat_conns[seat] is not None and self.table_stacks[seat] == 0:
                self.table_stacks[seat] = self.table.starting_stack
                self.buyins[seat] += self.table.starting_stack
                self._log(
                    {"type": "reload", "seat": seat, "amount": self.table.starting_stack}
                )
        self._push_snapshots()
        if self.config.max_hands is not None and self.hands_played >= self.config.max_hands:
            self.queue.put_nowait(("stop",))

    # -- admin ------------------------------------------------------------

    def _on_admin_cmd(self, conn: Connection, msg: AdminCmd) -> None:
        if conn.role != "admin":
            conn.send(Error(code=protocol.UNAUTHORIZED, detail="admin session required"))
            return
        ok, detail = self._run_admin_cmd(msg.cmd, msg.args)
        self._audit({"event": "admin_cmd", "cmd": msg.cmd, "args": msg.args, "ok": ok})
        conn.send(AdminResult(ok=ok, detail=detail))
        if ok and msg.cmd in ("set_blinds", "set_starting_stack", "set_timeout"):
            self._push_snapshots()

    def _run_admin_cmd(self, cmd: str, args: dict):
        if cmd == "get_status":
            return True, self._status()
        if cmd in ("set_blinds", "set_starting_stack", "set_timeout"):
            return self._stage_table_change(cmd, args)
        if cmd == "pause":
            if self.phase == PAUSED:
                return True, {"phase": PAUSED}
            self.pending_pause = True
            if self.phase == IDLE:
                self.pending_pause = False
                self.phase = PAUSED
                self._log({"type": "phase", "phase": PAUSED})
            return True, {"phase": self.phase, "pending_pause": self.pending_pause}
        if cmd == "resume":
            self.pending_pause = False
            if self.phase == PAUSED:
                self.phase = IDLE
                self._log({"type": "phase", "phase": IDLE})
                self._maybe_deal()
            return True, {"phase": self.phase}
        if cmd == "kick_seat":
            seat = args.get("seat")
            if not isinstance(seat, int) or not 0 <= seat < 6:
                return False, "seat must be an integer in [0, 5]"
            conn = self.seat_conns[seat]
            if conn is None and self.table_stacks[seat] is None:
                return False, f"seat {seat} is empty"
            if conn is not None:
                self._drop(conn)
            return True, {"kicked": seat}
        if cmd == "set_hole_visibility":
            visible = args.get("visible")
            if not isinstance(visible, bool):
                return False, "visible must be a boolean"
            self.admin_sees_holes = visible
            self._push_snapshots()
            return True, {"hole_visibility": visible}
        if cmd == "shutdown":
            self.queue.put_nowait(("stop",))
            return True, {"phase": SHUTTING_DOWN}
        return False, f"unknown command: {cmd}"

    def _stage_table_change(self, cmd: str, args: dict):
        base = self.pending_table or TableSettings(
            small_blind=self.table.small_blind,
            big_blind=self.table.big_blind,
            starting_stack=self.table.starting_stack,
            action_timeout=self.table.action_timeout,
        )
        data = base.model_dump()
        try:
            if cmd == "set_blinds":
                data["small_blind"] = int(args["sb"])
                data["big_blind"] = int(args["bb"])
            elif cmd == "set_starting_stack":
                data["starting_stack"] = int(args["stack"])
            else:
                data["action_timeout"] = float(args["seconds"])
            settings = TableSettings.model_validate(data)
            settings.to_engine(self.config.seat_count)  # runs the invariants
        except (KeyError, TypeError, ValueError) as exc:
            return False, f"invalid arguments: {exc}"
        if self.hand is None:
            self.table = settings.to_engine(self.config.seat_count)
            self.pending_table = None
            self._log(
                {
                    "type": "config",
                    "sb": self.table.small_blind,
                    "bb": self.table.big_blind,
                    "stack": self.table.starting_stack,
                    "timeout": self.table.action_timeout,
                }
            )
            return True, {"applied": "now", **settings.model_dump()}
        self.pending_table = settings
        return True, {"applied": "next_hand", **settings.model_dump()}

    def _status(self) -> dict:
        now = asyncio.get_running_loop().time()
        return {
            "phase": self.phase,
            "hand_id": self.hand.hand_id if self.hand else None,
            "hands_played": self.hands_played,
            "config": {
                "small_blind": self.table.small_blind,
                "big_blind": self.table.big_blind,
                "starting_stack": self.table.starting_stack,
                "action_timeout": self.table.action_timeout,
                "seat_count": self.table.seat_count,
            },
            "pending_config": self.pending_table.model_dump() if self.pending_table else None,
            "pending_pause": self.pending_pause,
            "seats": [
                {
                    "seat": seat,
                    "occupied": self.table_stacks[seat] is not None,
                    "connected": self.seat_conns[seat] is not None,
                    "stack": self.table_stacks[seat],
                }
                for seat in range(6)
            ],
            "spectators": len(self.spectators),
            "hole_visibility": self.admin_sees_holes,
            "lockout": {
                "failed_attempts": self.lockout.failed_attempts,
                "locked_for": round(self.lockout.remaining(now), 1),
            },
        }


async def serve(config: ServerConfig) -> TableService:
    """Start a service (and its WebSocket listener when configured)."""
    service = TableService(config)
    await service.start()
    if config.http_port is not None:
        from .api import start_http  # deferred: uvicorn import is heavy

        await start_http(service)
    return service

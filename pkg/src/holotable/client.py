"""Client-side session: connect, handshake, lockstep message exchange.

Used by the bots, the admin shell and the simulation harness. A client can
record every received envelope body verbatim, which is what the wire-level
information-hiding audit runs over.
"""

from __future__ import annotations

import asyncio
from typing import Optional

from .protocol import (
    Error,
    FrameDecoder,
    Hello,
    Message,
    ProtocolError,
    Welcome,
    encode,
    parse_body,
)


class ServerClosed(Exception):
    """The server ended the session (EOF on the stream)."""


class JoinRefused(Exception):
    def __init__(self, code: str, detail: Optional[str] = None):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class TableClient:
    def __init__(self, address: str, port: int, record: bool = False):
        self.address = address
        self.port = port
        self.record = record
        self.frames: list[str] = []  # received bodies, verbatim, in order
        self.reader: Optional[asyncio.StreamReader] = None
        self.writer: Optional[asyncio.StreamWriter] = None
        self.decoder = FrameDecoder()
        self._pending: list[bytes] = []
        self.out_seq = 0
        self.last_in_seq = 0

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(self.address, self.port)

    async def send(self, msg: Message) -> None:
        self.out_seq += 1
        self.writer.write(encode(msg, self.out_seq))
        await self.writer.drain()

    async def recv(self) -> Message:
        """Next message; raises ServerClosed at EOF, ProtocolError on bad data."""
        while not self._pending:
            data = await self.reader.read(65536)
            if not data:
                self.decoder.eof()
                raise ServerClosed()
            self._pending.extend(self.decoder.feed(data))
        body = self._pending.pop(0)
        if self.record:
            self.frames.append(body.decode())
        msg, seq = parse_body(body)
        if seq <= self.last_in_seq:
            raise ProtocolError("bad_seq", f"server seq went backwards: {seq}")
        self.last_in_seq = seq
        return msg

    async def join(self, role: str, pin: Optional[str] = None) -> Welcome:
        """Hello handshake; returns the Welcome or raises JoinRefused."""
        await self.send(Hello(role=role, pin=pin))
        msg = await self.recv()
        if isinstance(msg, Welcome):
            return msg
        if isinstance(msg, Error):
            raise JoinRefused(msg.code, msg.detail)
        raise ProtocolError("malformed_body", f"expected welcome, got {msg.TYPE}")

    async def close(self) -> None:
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionError, OSError):
                pass

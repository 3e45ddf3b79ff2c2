"""HTTP face of the table: the WebSocket endpoint, health, and the browser UI.

WebSocket messages are the same canonical envelope bodies as the TCP frames,
sent as text frames without the length prefix. Browser pages live under /ui
when a built frontend is present.
"""

from __future__ import annotations

import asyncio
import socket
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .protocol import ProtocolError, parse_body
from .server import Connection, TableService

FRONTEND_DIST = Path(__file__).resolve().parents[2] / "frontend" / "dist"


class WsConnection(Connection):
    def __init__(self, service: TableService, websocket: WebSocket):
        super().__init__(service)
        self.websocket = websocket

    async def run_writer(self) -> None:
        try:
            while True:
                body = await self.outbox.get()
                if body is None:
                    break
                await self.websocket.send_text(body)
        except Exception:
            pass
        try:
            await self.websocket.close()
        except Exception:
            pass


def create_app(service: TableService, frontend_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="holotable", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    async def healthz():
        return {
            "phase": service.phase,
            "hands_played": service.hands_played,
            "seats_connected": sum(c is not None for c in service.seat_conns),
            "spectators": len(service.spectators),
        }

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        conn = WsConnection(service, websocket)
        service.queue.put_nowait(("connect", conn))
        writer = asyncio.get_running_loop().create_task(conn.run_writer())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    msg, seq = parse_body(text)
                except ProtocolError as exc:
                    service.queue.put_nowait(("proto_error", conn, exc))
                else:
                    service.queue.put_nowait(("msg", conn, msg, seq))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            service.queue.put_nowait(("disconnect", conn))
            conn.close()
            await writer

    dist = frontend_dir if frontend_dir is not None else FRONTEND_DIST
    if dist.is_dir():
        for route, page in (("/seat", "seat.html"), ("/table", "table.html"), ("/admin", "admin.html")):
            path = dist / page
            if path.is_file():
                app.get(route)(lambda path=path: FileResponse(path))
        app.mount("/ui", StaticFiles(directory=dist, html=True), name="ui")

    return app


async def start_http(service: TableService) -> int:
    """Serve the app on config.http_port within the running loop."""
    import uvicorn

    app = create_app(service)
    sock = socket.create_server(
        (service.config.bind_address, service.config.http_port), reuse_port=False
    )
    port = sock.getsockname()[1]
    service.bound_http_port = port
    config = uvicorn.Config(
        app, log_level="warning", ws="websockets-sansio", lifespan="off"
    )
    http_server = uvicorn.Server(config)
    service._http_server = http_server

    async def _serve():
        await http_server.serve(sockets=[sock])

    service._spawn_task(_serve(), name="http")
    # Give uvicorn a beat to mark itself started.
    while not http_server.started and not service._stopping:
        await asyncio.sleep(0.01)
    return port

"""Command line: the server plus its thin wire-protocol clients."""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import signal
import sys
from typing import Optional

from .bots import run_bot
from .client import JoinRefused, ServerClosed, TableClient
from .protocol import AdminCmd, AdminResult, Error, Message
from .server import ServerConfig, load_config, serve
from .sim import parse_bot_spec, simulate
from .server import TableSettings


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="holotable",
        description="Six-seat hold'em table server, admin shell, bots and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the authoritative table server")
    serve_p.add_argument("--bind", help="bind address (default 127.0.0.1)")
    serve_p.add_argument("--port", type=int, help="TCP protocol port (default 4646)")
    serve_p.add_argument("--http-port", type=int, help="WebSocket/browser port")
    serve_p.add_argument("--pin", help="6-digit admin PIN (or HOLOTABLE_PIN)")
    serve_p.add_argument("--seats", type=int, help="seat count, 2..6 (default 6)")
    serve_p.add_argument("--sb", type=int, help="small blind")
    serve_p.add_argument("--bb", type=int, help="big blind")
    serve_p.add_argument("--stack", type=int, help="starting stack")
    serve_p.add_argument("--timeout", type=float, help="action timeout seconds")
    serve_p.add_argument("--seed", type=int, help="deterministic shuffle seed")
    serve_p.add_argument(
        "--spawn-clients", action="store_const", const=True, default=None,
        help="launch 6 bot clients successively, then an admin client",
    )
    serve_p.add_argument("--log-dir", help="write events.jsonl and audit.jsonl here")
    serve_p.add_argument("--config", help="JSON config file (CLI flags override)")
    serve_p.add_argument("--hand-delay", type=float, help="pause between hands")

    admin_p = sub.add_parser("admin", help="interactive admin console")
    admin_p.add_argument("--address", default="127.0.0.1")
    admin_p.add_argument("--port", type=int, default=4646)
    admin_p.add_argument("--pin", help="6-digit PIN (or HOLOTABLE_PIN)")
    admin_p.add_argument("--hold", action="store_true", help="stay connected, no shell")
    admin_p.add_argument("--once", metavar="CMD", help="run one shell command and exit")

    bot_p = sub.add_parser("bot", help="join as a seat and play")
    bot_p.add_argument("--address", default="127.0.0.1")
    bot_p.add_argument("--port", type=int, default=4646)
    group = bot_p.add_mutually_exclusive_group()
    group.add_argument("--script", help="JSON bot script file")
    group.add_argument("--random", type=int, metavar="SEED", help="seeded random policy")
    group.add_argument(
        "--policy", choices=["check_fold", "call_any"], default=None,
        help="fallback policy (default check_fold)",
    )

    sim_p = sub.add_parser("sim", help="headless simulation with invariant checks")
    sim_p.add_argument("--hands", type=int, required=True)
    sim_p.add_argument("--bots", default="random:6", help="e.g. random:4,check_fold:2")
    sim_p.add_argument("--seed", type=int, default=1)
    sim_p.add_argument("--report", help="write the JSON report here")
    sim_p.add_argument("--sb", type=int, default=5)
    sim_p.add_argument("--bb", type=int, default=10)
    sim_p.add_argument("--stack", type=int, default=1000)
    sim_p.add_argument("--timeout", type=float, default=30.0)
    sim_p.add_argument(
        "--no-audit", action="store_true", help="skip the wire redaction audit"
    )

    args = parser.parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "admin":
        return asyncio.run(_cmd_admin(args))
    if args.command == "bot":
        return _cmd_bot(args)
    return _cmd_sim(args)


# --- serve ---------------------------------------------------------------


def _cmd_serve(args) -> int:
    cli = {
        "bind_address": args.bind,
        "port": args.port,
        "http_port": args.http_port,
        "pin": args.pin,
        "seat_count": args.seats,
        "small_blind": args.sb,
        "big_blind": args.bb,
        "starting_stack": args.stack,
        "action_timeout": args.timeout,
        "seed": args.seed,
        "spawn_clients": args.spawn_clients,
        "log_dir": args.log_dir,
        "hand_delay": args.hand_delay,
    }
    try:
        config = load_config(cli, args.config)
    except Exception as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return 2
    return asyncio.run(_serve_until_stopped(config))


async def _serve_until_stopped(config: ServerConfig) -> int:
    service = await serve(config)
    print(f"listening on {config.bind_address}:{service.bound_port}")
    if service.bound_http_port:
        print(f"websocket endpoint ws://{config.bind_address}:{service.bound_http_port}/ws")
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, lambda: service.queue.put_nowait(("stop",)))
    await service.wait_closed()
    return 0


# --- admin ---------------------------------------------------------------

ADMIN_HELP = """commands:
  status                     show phase, seats, stacks, parameters
  set-blinds SB BB           change blinds (next hand)
  set-stack N                change the starting stack (next hand)
  set-timeout SECONDS        change the action timeout (next hand)
  pause | resume             stop dealing at the next hand boundary / restart
  kick SEAT                  disconnect a seat (0-5)
  show-cards on|off          toggle hole-card visibility in the admin view
  shutdown                   stop the server
  quit                       leave the console
"""


def _parse_shell_command(line: str) -> Optional[AdminCmd]:
    parts = line.split()
    if not parts:
        return None
    name, rest = parts[0], parts[1:]
    try:
        if name == "status":
            return AdminCmd(cmd="get_status")
        if name == "set-blinds":
            return AdminCmd(cmd="set_blinds", args={"sb": int(rest[0]), "bb": int(rest[1])})
        if name == "set-stack":
            return AdminCmd(cmd="set_starting_stack", args={"stack": int(rest[0])})
        if name == "set-timeout":
            return AdminCmd(cmd="set_timeout", args={"seconds": float(rest[0])})
        if name == "pause":
            return AdminCmd(cmd="pause")
        if name == "resume":
            return AdminCmd(cmd="resume")
        if name == "kick":
            return AdminCmd(cmd="kick_seat", args={"seat": int(rest[0])})
        if name == "show-cards":
            return AdminCmd(cmd="set_hole_visibility", args={"visible": rest[0] == "on"})
        if name == "shutdown":
            return AdminCmd(cmd="shutdown")
    except (IndexError, ValueError):
        return None
    return None


async def _cmd_admin(args) -> int:
    pin = args.pin or os.environ.get("HOLOTABLE_PIN")
    client = TableClient(args.address, args.port)
    try:
        await client.connect()
    except OSError as exc:
        print(f"connection failed: {exc}", file=sys.stderr)
        return 2
    try:
        await client.join("admin", pin=pin)
    except JoinRefused as exc:
        print(f"admin access refused ({exc.code}): {exc.detail or ''}".strip(), file=sys.stderr)
        return 3
    print("admin session established")

    results: asyncio.Queue = asyncio.Queue()

    async def pump():
        try:
            while True:
                msg = await client.recv()
                if isinstance(msg, (AdminResult, Error)):
                    results.put_nowait(msg)
        except (ServerClosed, ConnectionError, OSError):
            results.put_nowait(None)

    pump_task = asyncio.get_running_loop().create_task(pump())

    async def run_one(line: str) -> bool:
        cmd = _parse_shell_command(line)
        if cmd is None:
            print(ADMIN_HELP, end="")
            return True
        await client.send(cmd)
        msg = await results.get()
        if msg is None:
            print("server closed the session")
            return False
        if isinstance(msg, AdminResult):
            print(json.dumps({"ok": msg.ok, "detail": msg.detail}, indent=2, sort_keys=True))
        else:
            print(f"error ({msg.code}): {msg.detail or ''}")
        return True

    try:
        if args.hold:
            await pump_task
            return 0
        if args.once:
            ok = await run_one(args.once)
            return 0 if ok else 1
        while True:
            try:
                line = await asyncio.to_thread(input, "holotable> ")
            except (EOFError, KeyboardInterrupt):
                break
            if line.strip() in ("quit", "exit"):
                break
            if not await run_one(line):
                break
        return 0
    finally:
        pump_task.cancel()
        await client.close()


# --- bot ---------------------------------------------------------------


def _cmd_bot(args) -> int:
    policy = args.policy or "check_fold"
    seed = 0
    if args.random is not None:
        policy = "random"
        seed = args.random
    return asyncio.run(
        run_bot(
            args.address,
            args.port,
            script_file=args.script,
            policy=policy,
            seed=seed,
        )
    )


# --- sim ---------------------------------------------------------------


def _cmd_sim(args) -> int:
    bots = []
    for name, count in parse_bot_spec(args.bots):
        bots.extend([name] * count)
    table = TableSettings(
        small_blind=args.sb,
        big_blind=args.bb,
        starting_stack=args.stack,
        action_timeout=args.timeout,
    )
    report = asyncio.run(
        simulate(
            args.hands,
            bots,
            seed=args.seed,
            table=table,
            audit_wire=not args.no_audit,
        )
    )
    payload = report.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())

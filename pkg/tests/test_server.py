"""Server behavior over real sockets: handshake, authority, admin, liveness."""

import asyncio

import pytest

from holotable.bots import Bot, BotScript, BotStep
from holotable.client import JoinRefused, ServerClosed, TableClient
from holotable.protocol import (
    ActionAck,
    ActionPrompt,
    ActionSpec,
    AdminCmd,
    AdminResult,
    Error,
    Event,
    Hello,
    Ping,
    Pong,
    Snapshot,
    SubmitAction,
)
from holotable.server import ServerConfig, TableService, TableSettings

PIN = "123456"


def run(coro, timeout=30.0):
    async def wrapped():
        return await asyncio.wait_for(coro, timeout)

    return asyncio.run(wrapped())


async def start_service(**overrides) -> TableService:
    defaults = dict(
        port=0,
        pin=PIN,
        seed=1,
        table=TableSettings(small_blind=5, big_blind=10, starting_stack=1000),
    )
    defaults.update(overrides)
    config = ServerConfig(**defaults)
    service = TableService(config)
    await service.start()
    return service


async def connect(service, record=False) -> TableClient:
    client = TableClient("127.0.0.1", service.bound_port, record=record)
    await client.connect()
    return client


async def recv_until(client, kind, limit=200):
    for _ in range(limit):
        msg = await client.recv()
        if isinstance(msg, kind):
            return msg
    raise AssertionError(f"no {kind.__name__} within {limit} messages")


class TestHandshake:
    def test_config_rejects_bad_pin(self):
        for bad in ("12345", "1234567", "abcdef", ""):
            with pytest.raises(ValueError):
                ServerConfig(port=0, pin=bad)

    def test_six_seats_assigned_in_arrival_order_then_table_full(self):
        async def scenario():
            service = await start_service(wait_seats=6)
            clients = []
            for expect in range(6):
                client = await connect(service)
                welcome = await client.join("seat")
                assert welcome.seat_id == expect
                clients.append(client)
            seventh = await connect(service)
            with pytest.raises(JoinRefused) as err:
                await seventh.join("seat")
            assert err.value.code == "table_full"
            await service.stop()

        run(scenario())

    def test_spectator_receives_snapshot_on_join(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            welcome = await client.join("spectator")
            assert welcome.seat_id is None
            snap = await recv_until(client, Snapshot)
            assert snap.view.level == "spectator"
            assert snap.view.phase == "idle"
            await service.stop()

        run(scenario())

    def test_non_hello_first_message_closes_connection(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            await client.send(Ping())
            msg = await client.recv()
            assert isinstance(msg, Error) and msg.code == "bad_hello"
            with pytest.raises(ServerClosed):
                await client.recv()
            await service.stop()

        run(scenario())

    def test_second_hello_is_rejected_but_harmless(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            await client.join("spectator")
            await client.send(Hello(role="seat"))
            msg = await recv_until(client, Error)
            assert msg.code == "bad_hello"
            await client.send(Ping(nonce=5))
            pong = await recv_until(client, Pong)
            assert pong.nonce == 5
            await service.stop()

        run(scenario())

    def test_stale_seq_is_refused(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            await client.join("spectator")
            client.out_seq -= 1  # replay an old sequence number
            await client.send(Ping())
            msg = await recv_until(client, Error)
            assert msg.code == "bad_seq"
            await service.stop()

        run(scenario())


class TestAdminGate:
    def test_correct_pin_granted(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            welcome = await client.join("admin", pin=PIN)
            assert welcome.seat_id is None
            snap = await recv_until(client, Snapshot)
            assert snap.view.level == "admin"
            await service.stop()

        run(scenario())

    def test_second_admin_rejected_while_first_connected(self):
        async def scenario():
            service = await start_service()
            first = await connect(service)
            await first.join("admin", pin=PIN)
            second = await connect(service)
            with pytest.raises(JoinRefused) as err:
                await second.join("admin", pin=PIN)
            assert err.value.code == "admin_present"
            await service.stop()

        run(scenario())

    def test_three_failures_lock_and_correct_pin_stays_locked(self):
        async def scenario():
            service = await start_service(lockout_lock_seconds=60.0)
            for attempt, expected in ((1, "pin_denied"), (2, "pin_denied"), (3, "pin_locked")):
                client = await connect(service)
                with pytest.raises(JoinRefused) as err:
                    await client.join("admin", pin="000000")
                assert err.value.code == expected, f"attempt {attempt}"
            # Correct PIN shortly after: still locked (lock is 60 s).
            client = await connect(service)
            with pytest.raises(JoinRefused) as err:
                await client.join("admin", pin=PIN)
            assert err.value.code == "pin_locked"
            await service.stop()

        run(scenario())

    def test_malformed_pin_counts_as_failure(self):
        async def scenario():
            service = await start_service()
            client = await connect(service)
            with pytest.raises(JoinRefused) as err:
                await client.join("admin", pin="abc")
            assert err.value.code == "pin_denied"
            assert service.lockout.failed_attempts == 1
            await service.stop()

        run(scenario())

    def test_lock_expiry_allows_entry_again(self):
        async def scenario():
            service = await start_service(lockout_lock_seconds=0.2)
            for _ in range(3):
                client = await connect(service)
                with pytest.raises(JoinRefused):
                    await client.join("admin", pin="999999")
            await asyncio.sleep(0.25)
            client = await connect(service)
            welcome = await client.join("admin", pin=PIN)
            assert welcome.table_config.big_blind == 10
            await service.stop()

        run(scenario())


class TestActionAuthority:
    async def _seat_two(self, service):
        a = await connect(service)
        await a.join("seat")
        b = await connect(service)
        await b.join("seat")
        return a, b

    def test_legal_action_acked_then_snapshot(self):
        async def scenario():
            service = await start_service(wait_seats=2)
            a, b = await self._seat_two(service)
            # Heads-up: seat 0 is the button and acts first.
            await recv_until(a, ActionPrompt)
            await a.send(SubmitAction(action=ActionSpec(kind="call")))
            ack = await recv_until(a, ActionAck)
            assert ack.accepted is True
            snap = await recv_until(a, Snapshot)
            assert snap.view.acting == 1
            await service.stop()

        run(scenario())

    def test_out_of_turn_rejected_without_state_change(self):
        async def scenario():
            service = await start_service(wait_seats=2)
            a, b = await self._seat_two(service)
            await recv_until(a, ActionPrompt)
            before = len(service.hand.events)
            await b.send(SubmitAction(action=ActionSpec(kind="fold")))
            ack = await recv_until(b, ActionAck)
            assert ack.accepted is False and ack.reason == "out_of_turn"
            assert len(service.hand.events) == before
            await service.stop()

        run(scenario())

    def test_illegal_action_rejected_distinctly(self):
        async def scenario():
            service = await start_service(wait_seats=2)
            a, b = await self._seat_two(service)
            await recv_until(a, ActionPrompt)
            await a.send(SubmitAction(action=ActionSpec(kind="check")))  # must call
            ack = await recv_until(a, ActionAck)
            assert ack.accepted is False and ack.reason == "illegal_action"
            await service.stop()

        run(scenario())

    def test_spectator_cannot_move_the_game(self):
        async def scenario():
            service = await start_service(wait_seats=2)
            a, b = await self._seat_two(service)
            await recv_until(a, ActionPrompt)
            spec = await connect(service)
            await spec.join("spectator")
            before = len(service.hand.events)
            await spec.send(SubmitAction(action=ActionSpec(kind="fold")))
            msg = await recv_until(spec, Error)
            assert msg.code == "forbidden"
            assert len(service.hand.events) == before
            await service.stop()

        run(scenario())


class TestTimeoutsAndDisconnects:
    def test_unresponsive_seats_complete_within_the_deadline_budget(self):
        async def scenario():
            service = await start_service(
                wait_seats=2,
                table=TableSettings(
                    small_blind=5, big_blind=10, starting_stack=1000,
                    action_timeout=0.15,
                ),
                max_hands=1,
            )
            a, b = await connect(service), await connect(service)
            await a.join("seat")
            await b.join("seat")
            # Nobody ever answers a prompt; the timeout rule plays every turn.
            started = asyncio.get_running_loop().time()
            await service.wait_closed()
            elapsed = asyncio.get_running_loop().time() - started
            decisions = sum(
                1 for r in service.event_records if r.get("auto")
            )
            assert decisions >= 1
            assert elapsed < decisions * 0.15 + 2.0
            hand_records = [r for r in service.event_records if r.get("hand_id") == 1]
            assert hand_records[-1]["type"] == "hand_end"

        run(scenario())

    def test_disconnected_seat_autoplays_and_frees_at_boundary(self):
        async def scenario():
            service = await start_service(wait_seats=2, max_hands=1)
            a, b = await connect(service), await connect(service)
            await a.join("seat")
            await b.join("seat")
            await recv_until(a, ActionPrompt)
            await a.close()  # button walks away mid-hand
            await service.wait_closed()
            autos = [r for r in service.event_records if r.get("auto")]
            assert autos and autos[0]["seat"] == 0
            leaves = [r for r in service.event_records if r["type"] == "leave"]
            assert any(r.get("seat") == 0 for r in leaves)

        run(scenario())


class TestAdminCommands:
    async def _admin(self, service):
        client = await connect(service)
        await client.join("admin", pin=PIN)
        return client

    async def _cmd(self, client, cmd, **args):
        await client.send(AdminCmd(cmd=cmd, args=args))
        return await recv_until(client, AdminResult)

    def test_get_status_reports_parameters(self):
        async def scenario():
            service = await start_service()
            admin = await self._admin(service)
            result = await self._cmd(admin, "get_status")
            assert result.ok
            assert result.detail["config"]["big_blind"] == 10
            assert result.detail["phase"] == "idle"
            await service.stop()

        run(scenario())

    def test_set_blinds_applies_at_hand_boundary(self):
        async def scenario():
            service = await start_service(wait_seats=2, max_hands=2)
            bots = []
            for _ in range(2):
                bot = Bot("127.0.0.1", service.bound_port, policy="call_any")
                await bot.join()
                bots.append(asyncio.get_running_loop().create_task(bot.loop()))
            admin = await self._admin(service)
            result = await self._cmd(admin, "set_blinds", sb=10, bb=20)
            assert result.ok
            await service.wait_closed()
            await asyncio.gather(*bots)
            starts = [r for r in service.event_records if r["type"] == "hand_start"]
            assert len(starts) == 2
            # The change landed between hands, never mid-hand.
            assert (starts[0]["sb"], starts[0]["bb"]) == (5, 10)
            assert (starts[1]["sb"], starts[1]["bb"]) == (10, 20)

        run(scenario())

    def test_bad_blinds_rejected(self):
        async def scenario():
            service = await start_service()
            admin = await self._admin(service)
            result = await self._cmd(admin, "set_blinds", sb=20, bb=10)
            assert not result.ok
            await service.stop()

        run(scenario())

    def test_pause_waits_for_the_hand_boundary(self):
        async def scenario():
            service = await start_service(wait_seats=2)
            bot_a = Bot("127.0.0.1", service.bound_port, policy="call_any")
            bot_b = Bot("127.0.0.1", service.bound_port, policy="call_any")
            await bot_a.join()
            await bot_b.join()
            task_a = asyncio.get_running_loop().create_task(bot_a.loop())
            task_b = asyncio.get_running_loop().create_task(bot_b.loop())
            admin = await self._admin(service)
            result = await self._cmd(admin, "pause")
            assert result.ok
            for _ in range(200):
                if service.phase == "paused":
                    break
                await asyncio.sleep(0.02)
            assert service.phase == "paused"
            # No dealing while paused.
            hands_before = service.hands_played
            await asyncio.sleep(0.1)
            assert service.hands_played == hands_before
            result = await self._cmd(admin, "resume")
            assert result.ok
            for _ in range(200):
                if service.hands_played > hands_before:
                    break
                await asyncio.sleep(0.02)
            assert service.hands_played > hands_before
            await service.stop()
            await asyncio.gather(task_a, task_b)

        run(scenario())

    def test_unknown_command_and_unauthorized(self):
        async def scenario():
            service = await start_service()
            admin = await self._admin(service)
            result = await self._cmd(admin, "overclock")
            assert not result.ok
            spectator = await connect(service)
            await spectator.join("spectator")
            await spectator.send(AdminCmd(cmd="get_status"))
            msg = await recv_until(spectator, Error)
            assert msg.code == "unauthorized"
            await service.stop()

        run(scenario())

    def test_kick_seat_disconnects_it(self):
        async def scenario():
            service = await start_service()
            seat = await connect(service)
            await seat.join("seat")
            admin = await self._admin(service)
            result = await self._cmd(admin, "kick_seat", seat=0)
            assert result.ok
            with pytest.raises(ServerClosed):
                for _ in range(50):
                    await seat.recv()
            await service.stop()

        run(scenario())

    def test_shutdown_stops_the_service(self):
        async def scenario():
            service = await start_service()
            admin = await self._admin(service)
            result = await self._cmd(admin, "shutdown")
            assert result.ok
            await service.wait_closed()

        run(scenario())

    def test_admin_commands_are_audit_logged(self):
        async def scenario():
            service = await start_service()
            admin = await self._admin(service)
            await self._cmd(admin, "get_status")
            await self._cmd(admin, "set_hole_visibility", visible=True)
            events = [r["event"] for r in service.audit_records]
            assert "admin_auth" in events
            cmds = [r["cmd"] for r in service.audit_records if r["event"] == "admin_cmd"]
            assert cmds == ["get_status", "set_hole_visibility"]
            assert all("ts" in r for r in service.audit_records)
            await service.stop()

        run(scenario())


class TestDeterminism:
    @staticmethod
    async def scripted_session() -> list[dict]:
        service = await start_service(wait_seats=2, max_hands=3, seed=77)
        tasks = []
        for policy_seed in (11, 22):
            bot = Bot(
                "127.0.0.1",
                service.bound_port,
                script=BotScript(fallback="random", fallback_seed=policy_seed),
            )
            await bot.join()
            tasks.append(asyncio.get_running_loop().create_task(bot.loop()))
        await service.wait_closed()
        await asyncio.gather(*tasks)
        return service.event_records

    def test_identical_runs_produce_identical_logs(self):
        first = run(self.scripted_session())
        second = run(self.scripted_session())
        assert first == second
        assert any(r["type"] == "hand_end" for r in first)

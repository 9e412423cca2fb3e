"""Teleoperation service: state streaming and magnet commands over WebSocket.

A single stepper task owns the simulation: it drains the command queue
between physics steps, paces the run at a configurable steps-per-second
rate, and broadcasts JSON state frames to every connected client at
20 Hz.  Clients never touch the world directly; their commands move the
external magnets (or session flow) through the same Simulation methods
the headless runner uses, and every physics-affecting command is written
to a step-indexed JSONL log.  Replaying that log with the scripted
runner on the same scenario reproduces the trajectory file byte for
byte.

Wire protocol (JSON):
    server -> client: {"type": "state", ...}  |  {"type": "error", "reason": ...}
    client -> server: {"type": "cmd", "cmd": "magnet_delta", "dx": ..., ...}
The "type" field on commands is optional; anything with a "cmd" key is
treated as a command.
"""

from __future__ import annotations

import asyncio
import json
import socket
from collections import deque
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from .dynamics import trajectory_line
from .errors import BindError
from .runner import RECORDED_COMMANDS, Simulation
from .scenario import ScenarioConfig

BROADCAST_PERIOD = 0.05  # s; 20 frames per second
MAX_QUEUE = 256
MAX_BURST = 200  # physics-step debt ceiling; excess real time is dropped
STEP_SLICE = 0.03  # s of stepping per tick; the rest keeps broadcasts flowing

DEFAULT_RATE_HZ = 100.0  # physics steps per wall second


class TeleopServer:
    """Session state shared between the stepper task and the endpoints."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.sim = Simulation(config)
        self.sim.rate_hz = DEFAULT_RATE_HZ
        self.queue: deque = deque()
        self.clients: list[WebSocket] = []
        self.global_step = 0
        self.coverage_rows: list[tuple] = []

        out_dir = Path(config.outputs.dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.trajectory_path = out_dir / config.outputs.trajectory
        self.commands_path = out_dir / config.outputs.commands
        self._traj_fh = open(self.trajectory_path, "w")
        self._cmd_fh = open(self.commands_path, "w")

    def close(self):
        self._traj_fh.close()
        self._cmd_fh.close()

    # --- command intake (called from websocket handlers) ---

    def enqueue(self, ws: WebSocket, cmd: dict) -> WebSocket | None:
        """Queue a command; returns the owner of a dropped command on overflow."""
        dropped = None
        if len(self.queue) >= MAX_QUEUE:
            old_ws, old_cmd = self.queue.popleft()
            dropped = old_ws
        self.queue.append((ws, cmd))
        return dropped

    # --- stepping (called only from the stepper task) ---

    def drain_commands(self) -> tuple:
        """Apply every queued command in arrival order.

        Returns (applied count, rejection list); each rejection is a
        (websocket, result) pair so the stepper can notify exactly the
        offending client.
        """
        applied = 0
        rejections = []
        while self.queue:
            ws, cmd = self.queue.popleft()
            result = self.sim.apply_command(cmd)
            if not result["ok"]:
                rejections.append((ws, result))
                continue
            applied += 1
            if cmd.get("cmd") in RECORDED_COMMANDS:
                self._cmd_fh.write(json.dumps({"step": self.global_step, **cmd}) + "\n")
                self._cmd_fh.flush()
        return applied, rejections

    def step_physics(self, n: int, deadline: float | None = None,
                     clock=None) -> int:
        """Run up to ``n`` steps; stop early once ``clock()`` passes the
        deadline (always taking at least one step so a loaded host still
        advances).  Returns the number of steps actually taken."""
        done = 0
        for _ in range(n):
            if done and deadline is not None and clock() >= deadline:
                break
            self.sim.step_once()
            self.global_step += 1
            t_log = self.global_step * self.config.dt
            self._traj_fh.write(
                trajectory_line(t_log, self.sim.state.pose) + "\n")
            if self.sim.coverage is not None:
                self.coverage_rows.append(
                    (t_log, self.sim.coverage.covered_count,
                     self.sim.coverage.total, self.sim.coverage_value()))
            done += 1
        if done:
            self._traj_fh.flush()
        return done

    def coverage_csv(self) -> str:
        lines = ["t, covered_count, total, C"]
        for t, covered, total, c in self.coverage_rows:
            lines.append(f"{t:.6f}, {covered}, {total}, {c:.9f}")
        return "\n".join(lines) + "\n"

    def record(self) -> dict:
        self._traj_fh.flush()
        self._cmd_fh.flush()
        return {
            "config_hash": self.config.config_hash(),
            "steps": self.global_step,
            "trajectory_path": str(self.trajectory_path),
            "commands_path": str(self.commands_path),
            "dt": self.config.dt,
        }

    async def broadcast(self, frame: dict):
        dead = []
        for ws in self.clients:
            try:
                await ws.send_json(frame)
            except Exception:
                dead.append(ws)
        for ws in dead:
            if ws in self.clients:
                self.clients.remove(ws)

    async def run_loop(self):
        """Pace the simulation and the 20 Hz broadcast."""
        loop = asyncio.get_running_loop()
        last = loop.time()
        budget = 0.0
        while True:
            await asyncio.sleep(BROADCAST_PERIOD)
            now = loop.time()
            elapsed, last = now - last, now

            applied, rejections = self.drain_commands()
            for ws, result in rejections:
                try:
                    await ws.send_json({"type": "error", "cmd": result.get("cmd"),
                                        "reason": result["reason"]})
                except Exception:
                    pass
            if applied:
                # commands echo back before the next physics burst, so a
                # reset is seen at t=0 and a pause at its freeze point
                await self.broadcast(self.sim.state_frame())

            if self.sim.status == "running":
                # steps owed at the configured rate; debt beyond one burst
                # is dropped, and the slice deadline keeps one tick's
                # stepping from starving the broadcast cadence
                budget = min(budget + self.sim.rate_hz * elapsed,
                             float(MAX_BURST))
                done = self.step_physics(int(budget),
                                         deadline=now + STEP_SLICE,
                                         clock=loop.time)
                budget -= done
            else:
                budget = 0.0
            await self.broadcast(self.sim.state_frame())


def create_app(server: TeleopServer) -> FastAPI:
    async def lifespan(app):
        task = asyncio.create_task(server.run_loop())
        yield
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
        server.close()

    app = FastAPI(title="capsim teleoperation service", lifespan=lifespan)

    @app.get("/scenario")
    async def scenario() -> JSONResponse:
        return JSONResponse(server.config.to_dict())

    @app.get("/coverage")
    async def coverage() -> PlainTextResponse:
        return PlainTextResponse(server.coverage_csv(), media_type="text/csv")

    @app.get("/record")
    async def record() -> JSONResponse:
        return JSONResponse(server.record())

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        server.clients.append(ws)
        await ws.send_json(server.sim.state_frame())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    cmd = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await ws.send_json({"type": "error",
                                        "reason": f"bad JSON: {exc.msg}"})
                    continue
                if not isinstance(cmd, dict) or "cmd" not in cmd:
                    await ws.send_json({"type": "error",
                                        "reason": 'message needs a "cmd" field'})
                    continue
                cmd.pop("type", None)
                dropped = server.enqueue(ws, cmd)
                if dropped is not None:
                    try:
                        await dropped.send_json(
                            {"type": "error",
                             "reason": "command queue overflow, oldest dropped"})
                    except Exception:
                        pass
        except WebSocketDisconnect:
            pass
        finally:
            if ws in server.clients:
                server.clients.remove(ws)

    return app


def serve(config: ScenarioConfig, host: str = "127.0.0.1", port: int = 8000):
    """Run the service until interrupted; raises BindError when the
    address is taken."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from None
    finally:
        probe.close()

    import uvicorn

    app = create_app(TeleopServer(config))
    uvicorn.run(app, host=host, port=port, log_level="warning")

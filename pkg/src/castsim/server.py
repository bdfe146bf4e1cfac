"""Live websocket front door for a running simulation.

One scenario, one simulation, any number of viewers.  State frames go out
every few physics steps (faster than the control tick, so viewers see the
swing, not a slideshow) and clients may retarget the catch point or
restart the run.  Messages with unknown fields are accepted as-is; frames
with an unknown "type" get an error reply rather than a dropped socket.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import math

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .scenario import TARGET_SPEED_CAP, Scenario
from .sim import CastingSim

FRAME_RATE_FLOOR = 40.0      # Hz of wall-clock state frames to aim for


def _frame_steps(scn: Scenario, time_scale: float) -> int:
    """Physics steps per published frame; bounded by one control tick."""
    steps = int(round(time_scale / (FRAME_RATE_FLOOR * scn.timing.dt)))
    tick = int(round(scn.vision.period / scn.timing.dt))
    return max(1, min(tick, steps))


class LiveSession:
    """Owns the simulation, the pacing loop, and the client set."""

    def __init__(self, scn: Scenario, time_scale: float = 1.0):
        self.scn = scn
        self.time_scale = time_scale
        self.frame_steps = _frame_steps(scn, time_scale)
        self.sim = CastingSim(scn)
        self.clients: set[WebSocket] = set()
        self.requested_target: tuple[float, float] | None = None

    # -- target handling -------------------------------------------------
    def _chase_request(self, dt_sim: float):
        """Walk the live target toward the latest request, at most at the
        scripted-target speed cap so a click cannot teleport the catch
        point across the workspace."""
        if self.requested_target is None:
            return
        cur = self.sim.true_target(self.sim.t)
        dx = self.requested_target[0] - cur[0]
        dy = self.requested_target[1] - cur[1]
        dist = math.hypot(dx, dy)
        reach = TARGET_SPEED_CAP * dt_sim
        if dist <= reach or dist == 0.0:
            self.sim.live_target = self.requested_target
        else:
            s = reach / dist
            self.sim.live_target = (cur[0] + s * dx, cur[1] + s * dy)

    def freeze_target(self):
        t = self.sim.true_target(self.sim.t)
        self.sim.live_target = (float(t[0]), float(t[1]))
        self.requested_target = None

    def reset(self):
        self.sim = CastingSim(self.scn)
        self.requested_target = None

    # -- outbound --------------------------------------------------------
    def state_frame(self) -> dict:
        sim = self.sim
        x, y, vx, vy = sim.ee_state()
        tgt = sim.true_target(sim.t)
        if sim.schedule is not None:
            schedule = [[float(ts), float(u)]
                        for ts, u in sim.schedule.segments[-8:]]
        elif sim.impulse is not None and sim.impulse.t_b is not None:
            schedule = [[float(sim.impulse.t_b), 0.0]]
        else:
            schedule = []
        frame = {"type": "state", "t": sim.t,
                 "arm": [float(sim.q[0]), float(sim.q[1]), float(sim.q[2])],
                 "ee": [float(x), float(y)],
                 "target": [float(tgt[0]), float(tgt[1])],
                 "tether_taut": bool(sim.taut),
                 "phase": sim.phase,
                 "schedule": schedule}
        if sim.outcome is not None:
            frame["outcome"] = {"result": sim.outcome.result,
                                "min_distance": sim.outcome.min_distance,
                                "t_end": sim.outcome.t_end}
        return frame

    async def broadcast(self, payload: dict):
        dead = []
        for ws in self.clients:
            try:
                await ws.send_json(payload)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    # -- pacing ----------------------------------------------------------
    async def run(self):
        loop = asyncio.get_running_loop()
        period = self.frame_steps * self.scn.timing.dt / self.time_scale
        next_at = loop.time()
        while True:
            next_at += period
            delay = next_at - loop.time()
            if delay <= 0:
                next_at = loop.time()    # fell behind; don't spiral
            # sleep(0) still yields, so a lagging stepper cannot starve
            # the receive side of the socket
            await asyncio.sleep(max(delay, 0.0))
            if self.sim.outcome is None:
                self._chase_request(self.frame_steps * self.scn.timing.dt)
                self.sim.advance_steps(self.frame_steps)
                self.sim._boundary_actuation()
            # finished runs keep heartbeating their last frame so late
            # joiners and slow clients still converge on the end state
            await self.broadcast(self.state_frame())


async def _handle_message(session: LiveSession, ws: WebSocket, raw: str):
    try:
        msg = json.loads(raw)
        if not isinstance(msg, dict):
            raise ValueError("frame must be an object")
    except ValueError as exc:
        await ws.send_json({"type": "error", "error": f"bad json: {exc}"})
        return
    kind = msg.get("type")
    if kind == "target":
        try:
            x, y = float(msg["x"]), float(msg["y"])
        except (KeyError, TypeError, ValueError):
            await ws.send_json({"type": "error",
                                "error": "target needs numeric x and y"})
            return
        session.requested_target = (x, y)
    elif kind == "cmd":
        action = msg.get("action")
        if action == "reset":
            session.reset()
            await session.broadcast(session.state_frame())
        elif action == "start":
            if session.sim.outcome is not None:
                session.reset()
                await session.broadcast(session.state_frame())
        else:
            await ws.send_json({"type": "error",
                                "error": f"unknown action: {action!r}"})
    else:
        await ws.send_json({"type": "error",
                            "error": f"unknown type: {kind!r}"})


def make_app(scn: Scenario, time_scale: float = 1.0) -> FastAPI:
    session = LiveSession(scn, time_scale=time_scale)
    app = FastAPI(title="castsim live")
    app.state.session = session

    @app.on_event("startup")
    async def _start():
        session._task = asyncio.get_running_loop().create_task(session.run())

    @app.on_event("shutdown")
    async def _stop():
        session._task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await session._task

    @app.get("/")
    async def info():
        return {"scenario": scn.label, "t": session.sim.t,
                "phase": session.sim.phase,
                "time_scale": session.time_scale,
                "clients": len(session.clients)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session.clients.add(ws)
        await ws.send_json(session.state_frame())
        try:
            while True:
                raw = await ws.receive_text()
                await _handle_message(session, ws, raw)
        except WebSocketDisconnect:
            pass
        finally:
            session.clients.discard(ws)
            if not session.clients:
                session.freeze_target()

    return app


def serve(scn: Scenario, port: int, time_scale: float = 1.0,
          host: str = "127.0.0.1"):
    import uvicorn

    uvicorn.run(make_app(scn, time_scale=time_scale),
                host=host, port=port, log_level="warning")

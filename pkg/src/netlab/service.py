"""Multi-session HTTP control service.

Each session owns one lab instance; commands and engine stepping are
serialized under the session lock, observations fan out to subscribers in
(at, seq) order from a bounded ring, and every live injection is journaled
so the interactive run stays replayable.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .errors import (
    BadState,
    LabError,
    ScenarioSyntaxError,
    SeqTooOld,
    UnknownSession,
    ValidationError,
)
from .scenario import (
    SCENARIO_SUFFIX,
    build_lab,
    catalog_names,
    dump_record,
    load_catalog_text,
    parse_scenario,
    record_of,
)

RING_CAPACITY = 100_000
DEFAULT_SPEED = 1_000_000  # ticks per real second: virtual ms per real ms
BATCH_SECONDS = 0.02
NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")

ERROR_STATUS = {
    "unknown_session": 404,
    "unknown_ref": 400,
    "out_of_range": 400,
    "bad_state": 409,
    "seq_too_old": 409,
    "syntax_error": 400,
    "past_time": 400,
}


class LabSession:
    def __init__(self, sid: str, scenario):
        self.id = sid
        self.scenario = scenario
        self.lab = build_lab(scenario)
        self.mode = "paused"  # paused | running | finished
        self.speed = DEFAULT_SPEED
        self.lock = threading.RLock()
        self.cond = threading.Condition(self.lock)
        self.run_generation = 0

    # All engine access happens under self.lock, between event dispatches.

    def control(self, cmd: str, speed: Optional[int] = None, n: Optional[int] = None) -> dict:
        with self.lock:
            if cmd == "run":
                if self.mode == "running":
                    raise BadState("already running")
                if speed is not None:
                    if speed < 1:
                        from .errors import OutOfRange

                        raise OutOfRange("speed must be >= 1 tick per second")
                    self.speed = speed
                if self.mode != "finished":
                    self.mode = "running"
                    self.run_generation += 1
                    thread = threading.Thread(
                        target=self._run_loop, args=(self.run_generation,), daemon=True
                    )
                    thread.start()
            elif cmd == "pause":
                if self.mode == "running":
                    self.mode = "paused"
                self.cond.notify_all()
            elif cmd == "step":
                if self.mode == "running":
                    raise BadState("cannot step while running")
                count = 1 if n is None else int(n)
                dispatched = 0
                for _ in range(count):
                    if self.lab.engine.step() is None:
                        self.mode = "finished"
                        break
                    dispatched += 1
                self._after_progress()
                return self._ack(dispatched=dispatched)
            elif cmd == "reset":
                if self.mode == "running":
                    self.mode = "paused"  # stops the runner at its next batch
                self.lab = build_lab(self.scenario)
                self.mode = "paused"
                self.cond.notify_all()
            else:
                from .errors import OutOfRange

                raise OutOfRange(f"unknown command {cmd!r}")
            return self._ack()

    def _run_loop(self, generation: int) -> None:
        while True:
            with self.lock:
                if self.mode != "running" or self.run_generation != generation:
                    return
                engine = self.lab.engine
                if engine.now >= self.scenario.duration or engine.pending() == 0:
                    self.mode = "finished"
                    self.cond.notify_all()
                    return
                batch = max(1, int(self.speed * BATCH_SECONDS))
                target = min(engine.now + batch, self.scenario.duration)
                engine.run_until(target)
                self._after_progress()
                if engine.now >= self.scenario.duration or engine.pending() == 0:
                    self.mode = "finished"
                    self.cond.notify_all()
                    return
            time.sleep(BATCH_SECONDS)

    def _after_progress(self) -> None:
        self.lab.engine.trim_history(RING_CAPACITY)
        self.cond.notify_all()

    def _ack(self, **extra) -> dict:
        return {"ok": True, "mode": self.mode, "at": self.lab.engine.now, **extra}

    def inject(self, action: dict) -> dict:
        with self.lock:
            if self.mode == "finished":
                raise BadState("session is finished")
            self.lab.inject(action)
            self.cond.notify_all()
            return self._ack()

    def snapshot(self) -> dict:
        with self.lock:
            snap = self.lab.snapshot()
            snap["mode"] = self.mode
            snap["next_obs_seq"] = self.lab.engine._obs_seq
            return snap

    def addendum(self) -> dict:
        """Replay bundle: injections plus the exact end boundary of this run."""
        with self.lock:
            return {
                "scenario": self.scenario.name,
                "seed": self.scenario.seed,
                "steps": self.lab.engine.dispatch_count,
                "until": self.lab.engine.now,
                "addendum": list(self.lab.addendum),
            }

    def stream(self, from_seq: int):
        with self.lock:
            if from_seq < self.lab.engine.oldest_obs_seq():
                raise SeqTooOld(
                    f"from_seq {from_seq} evicted; oldest available is "
                    f"{self.lab.engine.oldest_obs_seq()}"
                )
        cursor = from_seq

        def gen():
            nonlocal cursor
            while True:
                with self.cond:
                    batch = self.lab.engine.obs_since(cursor)
                    if not batch:
                        if self.mode == "finished":
                            return
                        self.cond.wait(timeout=0.05)
                        batch = self.lab.engine.obs_since(cursor)
                        if not batch:
                            continue
                    chunk = [dump_record(record_of(o)) for o in batch]
                    cursor = batch[-1].seq + 1
                yield "".join(f"data: {line}\n\n" for line in chunk)

        return gen()


class SessionManager:
    def __init__(self):
        self.sessions: dict[str, LabSession] = {}
        self.lock = threading.Lock()
        self._counter = 0

    def create(self, scenario) -> LabSession:
        with self.lock:
            self._counter += 1
            sid = f"s{self._counter}-{uuid.uuid4().hex[:8]}"
            session = LabSession(sid, scenario)
            self.sessions[sid] = session
            return session

    def get(self, sid: str) -> LabSession:
        session = self.sessions.get(sid)
        if session is None:
            raise UnknownSession(f"no session {sid!r}")
        return session


def _resolve_data_dir(data_dir) -> Path:
    path = Path(data_dir or os.environ.get("LAB_DATA_DIR") or "lab-data")
    path.mkdir(parents=True, exist_ok=True)
    for name in catalog_names():
        target = path / (name + SCENARIO_SUFFIX)
        if not target.exists():
            target.write_text(load_catalog_text(name))
    return path


def create_app(data_dir=None) -> FastAPI:
    app = FastAPI(title="netlab", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    manager = SessionManager()
    store = _resolve_data_dir(data_dir)
    app.state.manager = manager
    app.state.store = store

    @app.exception_handler(LabError)
    async def lab_error_handler(request: Request, exc: LabError):
        status = ERROR_STATUS.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={
                "code": exc.code,
                "message": exc.message,
                "path": getattr(exc, "path", ""),
            },
        )

    @app.post("/sessions")
    async def create_session(request: Request):
        text = (await request.body()).decode("utf-8")
        scenario = parse_scenario(text)
        session = manager.create(scenario)
        return {"id": session.id, "name": scenario.name, "mode": session.mode}

    @app.post("/sessions/{sid}/control")
    async def control(sid: str, request: Request):
        body = await request.json()
        session = manager.get(sid)
        return session.control(body.get("cmd"), speed=body.get("speed"), n=body.get("n"))

    @app.post("/sessions/{sid}/inject")
    async def inject(sid: str, request: Request):
        body = await request.json()
        session = manager.get(sid)
        return session.inject(body)

    @app.get("/sessions/{sid}/snapshot")
    async def snapshot(sid: str):
        return manager.get(sid).snapshot()

    @app.get("/sessions/{sid}/addendum")
    async def addendum(sid: str):
        return manager.get(sid).addendum()

    @app.get("/sessions/{sid}/events")
    async def events(sid: str, from_seq: int = 0):
        session = manager.get(sid)
        return StreamingResponse(session.stream(from_seq), media_type="text/event-stream")

    @app.get("/scenarios")
    async def list_scenarios():
        names = sorted(
            p.name[: -len(SCENARIO_SUFFIX)]
            for p in store.glob("*" + SCENARIO_SUFFIX)
        )
        return {"scenarios": names}

    @app.get("/scenarios/{name}")
    async def get_scenario(name: str):
        if not NAME_RE.match(name):
            raise ValidationError("out_of_range", f"bad scenario name {name!r}", "$")
        path = store / (name + SCENARIO_SUFFIX)
        if not path.exists():
            return JSONResponse(
                status_code=404,
                content={"code": "unknown_ref", "message": f"no scenario {name!r}", "path": ""},
            )
        return PlainTextResponse(path.read_text(), media_type="application/json")

    @app.put("/scenarios/{name}")
    async def put_scenario(name: str, request: Request):
        if not NAME_RE.match(name):
            raise ValidationError("out_of_range", f"bad scenario name {name!r}", "$")
        text = (await request.body()).decode("utf-8")
        parse_scenario(text)  # reject invalid documents
        (store / (name + SCENARIO_SUFFIX)).write_text(text)
        return {"ok": True, "name": name}

    return app

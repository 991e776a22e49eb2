"""Results store and live-session gateway.

Trial records persist in an append-only JSON-lines log (one record per
line); the in-memory index is rebuilt by replaying the log, and exact
duplicates (same participant, seed, experiment, steps) are suppressed
idempotently.  The HTTP API serves token issuance, record ingest, JSON/CSV
export, and grouped stats; live sessions run over a WebSocket: the server
steps physics at a fixed 60 Hz cadence, applies client input events in
client-sequence order, and streams a frame every second step.  The client
never computes physics or completion.
"""
from __future__ import annotations

import asyncio
import csv
import io
import json
import secrets
import threading
from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, WebSocket
from fastapi.responses import JSONResponse, PlainTextResponse
from starlette.websockets import WebSocketDisconnect

from .control import InputTracker, control_forces, sample_noise, total_force
from .errors import ConfigurationError, SchemaError
from .harness import (TrialConfig, TrialRecord, aggregate_stats,
                      apply_input_event, mode_detail_text, resolve_mode,
                      trial_substream)
from .observe import observation_scalars, make_observation
from .physics import step_world
from .tasks import (Phase, TaskKind, TaskStatus, evaluate_task,
                    instantiate_task)

CSV_HEADER = ("experiment,participant,duration,num_robots,mode,agent,"
              "seed,completed,steps,scenario_digest")

_FIELD_TYPES = {
    "experiment_name": str,
    "participant_id": str,
    "duration": float,
    "num_robots": int,
    "mode_detail": str,
    "agent": str,
    "seed": int,
    "completed": bool,
    "steps": int,
    "scenario_digest": str,
}


def new_token() -> str:
    """Opaque 128-bit participant identifier."""
    return secrets.token_hex(16)


def validate_record(data: dict) -> TrialRecord:
    """Schema check with field-level errors; returns the typed record."""
    if not isinstance(data, dict):
        raise SchemaError("record", "must be an object")
    for field, ftype in _FIELD_TYPES.items():
        if field not in data:
            raise SchemaError(field, "missing required field")
        value = data[field]
        if ftype is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if ftype in (int, float) and isinstance(value, bool):
            raise SchemaError(field, f"expected {ftype.__name__}, got bool")
        if not isinstance(value, ftype):
            raise SchemaError(field, f"expected {ftype.__name__}, got {type(value).__name__}")
        data = {**data, field: value}
    extra = set(data) - set(_FIELD_TYPES)
    if extra:
        raise SchemaError(sorted(extra)[0], "unknown field")
    if data["duration"] < 0 or data["steps"] < 0:
        raise SchemaError("duration", "must be nonnegative")
    return TrialRecord(**data)


class RecordStore:
    """Append-only persistent record log with a derived in-memory index.

    Appends are serialized by a lock; reads take snapshots.  Replaying the
    log at open reconstructs ids and the duplicate index exactly.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[TrialRecord] = []
        self._dupes: dict[tuple, int] = {}
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = validate_record(json.loads(line))
                        self._index(rec)
        self._fh = self.path.open("a", encoding="utf-8")

    @staticmethod
    def _dupe_key(rec: TrialRecord) -> tuple:
        return (rec.participant_id, rec.seed, rec.experiment_name, rec.steps)

    def _index(self, rec: TrialRecord) -> int:
        rid = len(self._records)
        self._records.append(rec)
        self._dupes.setdefault(self._dupe_key(rec), rid)
        return rid

    def append(self, record: TrialRecord | dict) -> int:
        """Durably store one record; returns its id.  Storing an exact
        duplicate returns the existing id without a second copy."""
        if isinstance(record, dict):
            record = validate_record(record)
        with self._lock:
            key = self._dupe_key(record)
            existing = self._dupes.get(key)
            if existing is not None and self._records[existing] == record:
                return existing
            rid = self._index(record)
            self._fh.write(json.dumps(asdict(record), separators=(",", ":")) + "\n")
            self._fh.flush()
            return rid

    def get(self, rid: int) -> TrialRecord:
        return self._records[rid]

    def records(self) -> list[TrialRecord]:
        with self._lock:
            return list(self._records)

    def query(self, experiment: str | None = None, participant: str | None = None,
              mode: str | None = None) -> list[TrialRecord]:
        """Filtered records in insertion order."""
        out = []
        for rec in self.records():
            if experiment is not None and rec.experiment_name != experiment:
                continue
            if participant is not None and rec.participant_id != participant:
                continue
            if mode is not None and rec.mode_detail.split(";", 1)[0] != mode:
                continue
            out.append(rec)
        return out

    def close(self) -> None:
        self._fh.close()


# ---- export / import --------------------------------------------------


def records_to_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=1)


def records_from_json(text: str) -> list[TrialRecord]:
    return [validate_record(obj) for obj in json.loads(text)]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in records:
        writer.writerow([r.experiment_name, r.participant_id, repr(r.duration),
                         r.num_robots, r.mode_detail, r.agent, r.seed,
                         "true" if r.completed else "false", r.steps,
                         r.scenario_digest])
    return buf.getvalue()


def records_from_csv(text: str) -> list[TrialRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER.split(","):
        raise SchemaError("header", "unexpected CSV header")
    out = []
    for row in rows[1:]:
        (exp, participant, duration, n, mode, agent, seed, completed,
         steps, digest) = row
        out.append(TrialRecord(exp, participant, float(duration), int(n), mode,
                               agent, int(seed), completed == "true",
                               int(steps), digest))
    return out


# ---- live sessions ----------------------------------------------------


class SessionError(RuntimeError):
    """Protocol violation; the session is aborted."""


class SessionEngine:
    """Single live trial advanced tick by tick; the server is the sole
    authority on physics and completion.  Input events land between ticks
    in client_sequence order; a frame is emitted every second step."""

    FRAME_EVERY = 2

    def __init__(self, config: TrialConfig, agent: str = "unknown", scenario=None):
        self.config = config
        self.agent = agent
        self.mode = resolve_mode(config, scenario)
        self.state = instantiate_task(config.kind, self.mode, config.seed, scenario)
        self.tracker = InputTracker(self.state.scheme)
        self.rng = trial_substream(config.seed, 2)
        self.last_sequence = 0
        self.status = TaskStatus.RUNNING
        self.timed_out = False

    def handshake(self) -> dict:
        world = self.state.world
        return {
            "type": "hello",
            "task": self.config.kind.value,
            "mode": self.mode.token(),
            "seed": self.config.seed,
            "max_steps": self.config.max_steps,
            "participant": self.config.participant_id,
            "scenario_digest": self.state.scenario_digest,
            "observation": self.state.observation.value,
            "scheme": self.state.scheme.value,
            "robot_radius": float(world.robot_radius[0]),
            "arena": list(world.arena),
            "workpieces": [
                {"id": int(world.wp_ids[j]),
                 "vertices": [[float(x), float(y)] for x, y in world.wp_local[j]]}
                for j in range(world.n_workpieces)
            ],
            "obstacles": [[[float(x), float(y)] for x, y in verts]
                          for verts in world.obstacles],
            "goal": self._goal_payload(),
        }

    def _goal_payload(self) -> dict:
        from .tasks import PatternGoal, PyramidGoal, RegionGoal
        goal = self.state.goal
        if isinstance(goal, RegionGoal):
            return {"kind": "region",
                    "region": [[float(x), float(y)] for x, y in goal.region]}
        if isinstance(goal, PyramidGoal):
            return {"kind": "pyramid",
                    "targets": [list(t) for t in goal.targets]}
        if isinstance(goal, PatternGoal):
            return {"kind": "pattern",
                    "points": [[float(x), float(y)] for x, y in goal.points],
                    "tolerance": goal.tolerance}
        raise ConfigurationError(f"unknown goal {goal!r}")

    def apply_event(self, event: dict) -> None:
        try:
            seq = int(event["client_sequence"])
        except (KeyError, TypeError, ValueError):
            raise SessionError("event missing client_sequence") from None
        if seq <= self.last_sequence:
            raise SessionError(f"client_sequence {seq} not increasing")
        self.last_sequence = seq
        try:
            apply_input_event(self.tracker, event)
        except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
            raise SessionError(f"malformed event: {exc}") from None

    def tick(self) -> dict | None:
        """Advance one 60 Hz step; returns a frame on every second step."""
        if self.status is not TaskStatus.RUNNING:
            return None
        state = self.state
        n = state.world.n_robots
        state.phase = Phase.SIMULATION
        noise = sample_noise(self.rng, n, state.noise, state.control_params)
        input_state = self.tracker.tick(state.world.dt)
        forces = control_forces(state.scheme, input_state,
                                state.world.robot_pos, state.control_params)
        state.world = step_world(state.world, total_force(forces, noise))
        state.step += 1
        state.phase = Phase.EVALUATION
        if evaluate_task(state) is TaskStatus.COMPLETE:
            self.status = TaskStatus.COMPLETE
        elif state.step >= self.config.max_steps:
            self.timed_out = True  # finalized as incomplete
        if state.step % self.FRAME_EVERY == 0 or self.done:
            return self.frame()
        return None

    @property
    def done(self) -> bool:
        return self.status is TaskStatus.COMPLETE or self.timed_out

    def frame(self) -> dict:
        state = self.state
        world = state.world
        obs = make_observation(state.observation, world.robot_pos,
                               float(world.robot_radius[0]), k=state.ellipse_k)
        return {
            "type": "frame",
            "step": state.step,
            "elapsed": state.step * world.dt,
            "observation": {"mode": state.observation.value,
                            "scalars": observation_scalars(obs)},
            "workpieces": [[int(world.wp_ids[j]), float(world.wp_pos[j, 0]),
                            float(world.wp_pos[j, 1]), float(world.wp_angle[j])]
                           for j in range(world.n_workpieces)],
            "goal_ref": f"{state.scenario_digest}#{state.kind.value}",
            "status": "complete" if self.status is TaskStatus.COMPLETE else "running",
        }

    def finalize(self, aborted: bool = False) -> TrialRecord:
        state = self.state
        completed = self.status is TaskStatus.COMPLETE and not aborted
        return TrialRecord(
            experiment_name=state.kind.value,
            participant_id=self.config.participant_id,
            duration=state.step * state.world.dt,
            num_robots=state.world.n_robots,
            mode_detail=mode_detail_text(state, self.config.max_steps),
            agent=self.agent,
            seed=self.config.seed,
            completed=completed,
            steps=state.step,
            scenario_digest=state.scenario_digest,
        )


def run_session_replay(config: TrialConfig, events, scenario=None) -> TrialRecord:
    """Feed a recorded event stream through the session engine as fast as
    possible (no wall clock); used by the replay-equivalence harness."""
    engine = SessionEngine(config, agent="replay", scenario=scenario)
    queue = sorted(events, key=lambda e: (int(e["tick"]), int(e["client_sequence"])))
    qi = 0
    while not engine.done:
        while qi < len(queue) and int(queue[qi]["tick"]) <= engine.state.step:
            engine.apply_event(queue[qi])
            qi += 1
        engine.tick()
    return engine.finalize()


# ---- HTTP application --------------------------------------------------


def create_app(store: RecordStore, frontend_dir: str | Path | None = None):
    app = FastAPI(title="swarm session service")

    @app.post("/token", status_code=201)
    def token():
        return {"token": new_token()}

    @app.post("/results", status_code=201)
    def post_result(payload: dict):
        try:
            rid = store.append(payload)
        except SchemaError as exc:
            raise HTTPException(status_code=422,
                                detail={"field": exc.field, "error": str(exc)})
        return {"id": rid}

    @app.get("/results.json")
    def results_json():
        return JSONResponse(json.loads(records_to_json(store.records())))

    @app.get("/results.csv")
    def results_csv():
        return PlainTextResponse(records_to_csv(store.records()),
                                 media_type="text/csv")

    @app.get("/stats")
    def stats(experiment: str | None = None, group_by: str = "mode"):
        records = store.query(experiment=experiment)
        if not records:
            return {"experiment": experiment, "rows": []}
        try:
            rows = aggregate_stats(records, group_by)
        except ConfigurationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"experiment": experiment, "rows": rows}

    @app.websocket("/session")
    async def session(ws: WebSocket,
                      task: str = Query(...),
                      mode: str = "random",
                      seed: int | None = None,
                      token: str | None = None,
                      max_steps: int = 18000,
                      turbo: int = 0):
        await ws.accept()
        try:
            kind = TaskKind(task)
        except ValueError:
            await ws.close(code=4400, reason=f"unknown task {task!r}")
            return
        config = TrialConfig(kind=kind, mode=mode,
                             seed=seed if seed is not None else secrets.randbits(62),
                             max_steps=max_steps, controller_id="human",
                             participant_id=token or new_token())
        agent = ws.headers.get("user-agent", "unknown")
        try:
            engine = SessionEngine(config, agent=agent)
        except ConfigurationError as exc:
            await ws.close(code=4400, reason=str(exc))
            return
        await ws.send_json(engine.handshake())

        events: asyncio.Queue = asyncio.Queue()
        closed = asyncio.Event()

        async def reader():
            try:
                while True:
                    msg = await ws.receive_json()
                    await events.put(msg)
            except (WebSocketDisconnect, RuntimeError):
                closed.set()
            except json.JSONDecodeError:
                await events.put({"_malformed": True})

        reader_task = asyncio.create_task(reader())
        dt = engine.state.world.dt
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        abort = False
        try:
            while not engine.done and not closed.is_set():
                if not turbo:
                    next_tick += dt
                    delay = next_tick - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)
                try:
                    while True:
                        event = events.get_nowait()
                        if "_malformed" in event:
                            raise SessionError("malformed message")
                        engine.apply_event(event)
                except asyncio.QueueEmpty:
                    pass
                frame = engine.tick()
                if frame is not None:
                    await ws.send_json(frame)
        except (SessionError, WebSocketDisconnect):
            abort = True
        finally:
            reader_task.cancel()
        if closed.is_set():
            abort = True
        record = engine.finalize(aborted=abort)
        rid = store.append(record)
        try:
            await ws.send_json({"type": "result", "id": rid,
                                "record": asdict(record)})
            await ws.close()
        except (RuntimeError, WebSocketDisconnect):
            pass  # client already gone; the record is stored regardless

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    return app

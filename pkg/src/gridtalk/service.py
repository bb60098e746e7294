"""Session-oriented HTTP API for blind human-play episodes.

A player sees only the dialogue: they pick one of the nine agent utterances,
the simulated user answers, and the grid stays hidden until the episode ends.
Completed episodes append to a JSONL transcript store so the aggregate
baseline statistics survive restarts. Reward arithmetic is the trainer's
base mode.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .dialogue import AGENT_VOCAB, episode_record, render, respond, Transcript
from .grid import EpisodeState, MoveOutcome
from .scenes import SPLITS, SceneRecord, read_scenes, record_to_obj
from .training import step_reward

DEFAULT_TTL_SECONDS = 3600.0


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class Session:
    session_id: str
    record: SceneRecord
    state: EpisodeState
    transcript: Transcript = field(default_factory=Transcript)
    cumulative_reward: float = 0.0
    status: str = "ongoing"  # ongoing | success | failure
    moves: int = 0
    created_at: float = 0.0
    last_active: float = 0.0


class PlayService:
    """In-memory sessions over a fixed dataset, with an append-only episode
    store. All mutating operations hold one lock; sessions are isolated."""

    def __init__(
        self,
        records: list[SceneRecord],
        store_path: str | Path,
        *,
        ttl_seconds: float = DEFAULT_TTL_SECONDS,
        turn_limit: int = 30,
        default_split: str = "test",
        clock=time.monotonic,
    ):
        if not records:
            raise ValueError("service needs a non-empty dataset")
        self.records = records
        self.by_id = {r.id: r for r in records}
        self.by_split = {s: [r for r in records if r.split == s] for s in SPLITS}
        self.store_path = Path(store_path)
        self.store_path.parent.mkdir(parents=True, exist_ok=True)
        self.ttl_seconds = ttl_seconds
        self.turn_limit = turn_limit
        self.default_split = default_split
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self._rng = np.random.default_rng()
        self._episodes = 0
        self._successes = 0
        self._reward_sum = 0.0
        self._scan_store()

    def _scan_store(self) -> None:
        if not self.store_path.exists():
            return
        with open(self.store_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self._episodes += 1
                self._successes += obj["outcome"] == "success"
                self._reward_sum += float(obj["reward"])

    def _persist(self, session: Session) -> None:
        record = episode_record(session.record.id, session.transcript, session.cumulative_reward)
        with open(self.store_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, separators=(", ", ": ")) + "\n")
        self._episodes += 1
        self._successes += session.status == "success"
        self._reward_sum += session.cumulative_reward

    def _expire_idle(self) -> None:
        now = self.clock()
        for sid in list(self.sessions):
            session = self.sessions[sid]
            if session.status == "ongoing" and now - session.last_active > self.ttl_seconds:
                session.status = "failure"
                session.transcript.outcome = "failure"
                self._persist(session)
                del self.sessions[sid]

    def choices(self) -> list[str]:
        return [render(u) for u in AGENT_VOCAB]

    def create_session(
        self, split: str | None = None, scene_id: str | None = None, seed: int | None = None
    ) -> dict:
        with self.lock:
            self._expire_idle()
            if scene_id is not None:
                record = self.by_id.get(scene_id)
                if record is None:
                    raise ServiceError(404, f"unknown scene_id {scene_id!r}")
            else:
                split = split or self.default_split
                if split not in SPLITS:
                    raise ServiceError(400, f"unknown split {split!r}; expected one of {list(SPLITS)}")
                pool = self.by_split[split]
                if not pool:
                    raise ServiceError(400, f"split {split!r} has no scenes in this dataset")
                rng = self._rng if seed is None else np.random.default_rng(seed)
                record = pool[int(rng.integers(0, len(pool)))]
            now = self.clock()
            session = Session(
                session_id=uuid.uuid4().hex,
                record=record,
                state=EpisodeState(record.scene, turn_limit=self.turn_limit),
                created_at=now,
                last_active=now,
            )
            self.sessions[session.session_id] = session
            return {"session_id": session.session_id, "choices": self.choices(), "turn": 0}

    def _get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"unknown session {session_id!r}")
        return session

    def act(self, session_id: str, action_index) -> dict:
        with self.lock:
            self._expire_idle()
            session = self._get(session_id)
            if session.status != "ongoing":
                raise ServiceError(409, f"session is already {session.status}")
            if not isinstance(action_index, int) or isinstance(action_index, bool):
                raise ServiceError(400, "action_index must be an integer")
            if not 0 <= action_index < len(AGENT_VOCAB):
                raise ServiceError(400, f"action_index {action_index} out of range 0..{len(AGENT_VOCAB) - 1}")
            utterance = AGENT_VOCAB[action_index]
            state = session.state
            prev_square = state.square
            user = respond(state, utterance)
            if utterance.is_move:
                session.moves += 1
                if state.succeeded:
                    outcome = MoveOutcome.COMPLETED
                elif state.square != prev_square:
                    outcome = MoveOutcome.MOVED
                else:
                    outcome = MoveOutcome.BLOCKED
            else:
                outcome = None
            delta = step_reward(outcome, state.turn, self.turn_limit)
            session.cumulative_reward += delta
            session.transcript.append(utterance, user)
            session.last_active = self.clock()
            if state.done:
                session.status = "success" if state.succeeded else "failure"
                session.transcript.outcome = session.status
                self._persist(session)
            return {
                "response_text": render(user),
                "turn": state.turn,
                "reward_delta": delta,
                "cumulative_reward": session.cumulative_reward,
                "status": session.status,
            }

    def reveal(self, session_id: str) -> dict:
        with self.lock:
            session = self._get(session_id)
            if session.status == "ongoing":
                raise ServiceError(403, "scene is hidden until the episode ends")
            return {
                "scene": record_to_obj(session.record),
                "solve_length": session.record.solve_length,
                "turns": session.state.turn,
                "moves": session.moves,
                "outcome": session.status,
                "cumulative_reward": session.cumulative_reward,
            }

    def stats(self) -> dict:
        with self.lock:
            self._expire_idle()
            n = self._episodes
            return {
                "episodes": n,
                "success_rate": (self._successes / n) if n else None,
                "avg_reward": (self._reward_sum / n) if n else None,
            }


def create_app(
    data_path: str | Path,
    store_dir: str | Path,
    *,
    ttl_seconds: float = DEFAULT_TTL_SECONDS,
    turn_limit: int = 30,
    static_dir: str | Path | None = None,
) -> FastAPI:
    records = read_scenes(data_path)
    store_dir = Path(store_dir)
    service = PlayService(
        records, store_dir / "transcripts.jsonl", ttl_seconds=ttl_seconds, turn_limit=turn_limit
    )
    app = FastAPI(title="gridtalk play service")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.post("/api/sessions")
    def create_session(body: dict | None = None):
        body = body or {}
        seed = body.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ServiceError(400, "seed must be an integer")
        return service.create_session(
            split=body.get("split"), scene_id=body.get("scene_id"), seed=seed
        )

    @app.post("/api/sessions/{session_id}/act")
    def act(session_id: str, body: dict):
        if "action_index" not in body:
            raise ServiceError(400, "body needs an action_index")
        return service.act(session_id, body["action_index"])

    @app.get("/api/sessions/{session_id}/reveal")
    def reveal(session_id: str):
        return service.reveal(session_id)

    @app.get("/api/stats")
    def stats():
        return service.stats()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app

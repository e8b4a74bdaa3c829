"""Live procedure sessions: event capture, folding into intervals, exports.

Each session is a directory holding an append-only JSON-lines event log
(written and fsynced before any acknowledgment) plus small metadata files.
The event log is the source of truth; the finalized record is derived by
folding it and cached for convenience.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..dataset import Station, StationInterval, write_labels_csv

EVENT_KINDS = ("station_start", "station_stop", "fna")


class LabelingError(Exception):
    code = "error"
    http_status = 400


class ValidationFailure(LabelingError):
    code = "validation"
    http_status = 400


class NotFound(LabelingError):
    code = "not_found"
    http_status = 404


class StateConflict(LabelingError):
    code = "state_conflict"
    http_status = 409


@dataclass(frozen=True)
class LabelEvent:
    kind: str
    t: float
    station: Station | None = None
    auto: bool = False

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "t": self.t}
        if self.station is not None:
            d["station"] = self.station.value
        if self.auto:
            d["auto"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabelEvent":
        station = Station(d["station"]) if "station" in d else None
        return cls(kind=d["kind"], t=float(d["t"]), station=station, auto=bool(d.get("auto")))


@dataclass(frozen=True)
class ProcedureRecord:
    id: str
    patient_ref: str
    intervals: tuple[StationInterval, ...]
    fna_times: tuple[float, ...]
    session_duration: float
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "patient_ref": self.patient_ref,
            "intervals": [
                {"station": iv.station.value, "t_start": iv.t_start, "t_end": iv.t_end}
                for iv in self.intervals
            ],
            "fna_times": list(self.fna_times),
            "session_duration": self.session_duration,
            "warnings": list(self.warnings),
        }


def fold_events(events: list[LabelEvent]) -> tuple[list[StationInterval], list[float], list[str]]:
    """Fold a legal event sequence into intervals, FNA times, and warnings.

    Zero-length intervals (stop at the exact start time) are dropped with a
    warning since downstream interval consumers require t_start < t_end.
    """
    intervals: list[StationInterval] = []
    fna_times: list[float] = []
    warnings: list[str] = []
    open_station: Station | None = None
    open_t = 0.0
    for ev in events:
        if ev.kind == "fna":
            fna_times.append(ev.t)
        elif ev.kind == "station_start":
            open_station, open_t = ev.station, ev.t
        elif ev.kind == "station_stop":
            if ev.auto:
                warnings.append(
                    f"open {ev.station.value} auto-closed at finalize time {ev.t:.3f}"
                )
            if ev.t > open_t:
                intervals.append(StationInterval(open_station, open_t, ev.t))
            else:
                warnings.append(
                    f"dropped zero-length {ev.station.value} interval at {ev.t:.3f}"
                )
            open_station = None
    return intervals, fna_times, warnings


@dataclass
class _Session:
    id: str
    patient_ref: str
    created_at: float
    state: str  # "live" | "finalized"
    seq: int = 0  # creation order tie-break for coarse clocks
    events: list[LabelEvent] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def open_station(self) -> Station | None:
        open_st = None
        for ev in self.events:
            if ev.kind == "station_start":
                open_st = ev.station
            elif ev.kind == "station_stop":
                open_st = None
        return open_st

    @property
    def last_t(self) -> float:
        return self.events[-1].t if self.events else 0.0


class SessionStore:
    """Durable store of procedure sessions under one root directory."""

    def __init__(self, root: str | Path, clock: Callable[[], float] = time.time):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self._sessions: dict[str, _Session] = {}
        self._registry_lock = threading.Lock()
        for session_dir in sorted(self.root.iterdir()):
            if (session_dir / "session.json").exists():
                self._load_session(session_dir)

    # -- persistence ------------------------------------------------------

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _load_session(self, session_dir: Path) -> None:
        meta = json.loads((session_dir / "session.json").read_text())
        session = _Session(
            id=meta["id"],
            patient_ref=meta["patient_ref"],
            created_at=meta["created_at"],
            state=meta["state"],
            seq=int(meta.get("seq", 0)),
        )
        log = session_dir / "events.jsonl"
        if log.exists():
            lines = log.read_bytes().split(b"\n")
            for i, line in enumerate(lines):
                if not line.strip():
                    continue
                try:
                    session.events.append(LabelEvent.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    if i == len(lines) - 1:
                        break  # partial trailing line from an interrupted write
                    raise ValueError(f"corrupt event log {log} line {i + 1}: {exc}") from exc
        self._sessions[session.id] = session

    def _write_meta(self, session: _Session) -> None:
        path = self._dir(session.id) / "session.json"
        tmp = path.with_suffix(".json.tmp")
        doc = {
            "id": session.id,
            "patient_ref": session.patient_ref,
            "created_at": session.created_at,
            "state": session.state,
            "seq": session.seq,
        }
        tmp.write_text(json.dumps(doc, sort_keys=True) + "\n")
        os.replace(tmp, path)

    def _append_event(self, session: _Session, event: LabelEvent) -> None:
        # append + fsync BEFORE the caller acknowledges the event
        log = self._dir(session.id) / "events.jsonl"
        with open(log, "a") as fh:
            fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        session.events.append(event)

    # -- operations --------------------------------------------------------

    def _get(self, session_id: str) -> _Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(f"no procedure with id {session_id!r}")
        return session

    def create_procedure(self, patient_ref: str) -> str:
        if not patient_ref or not patient_ref.strip():
            raise ValidationFailure("patient_ref must be non-empty")
        session_id = uuid.uuid4().hex
        with self._registry_lock:
            seq = 1 + max((s.seq for s in self._sessions.values()), default=0)
        session = _Session(
            id=session_id,
            patient_ref=patient_ref,
            created_at=self.clock(),
            state="live",
            seq=seq,
        )
        self._dir(session_id).mkdir(parents=True, exist_ok=True)
        self._write_meta(session)
        with self._registry_lock:
            self._sessions[session_id] = session
        return session_id

    def record_event(
        self,
        session_id: str,
        kind: str,
        station: Station | str | None = None,
        t: float | None = None,
    ) -> float:
        """Validate, persist, and acknowledge one event; returns the assigned t."""
        if kind not in EVENT_KINDS:
            raise ValidationFailure(f"unknown event kind {kind!r}")
        if isinstance(station, str):
            try:
                station = Station(station)
            except ValueError:
                raise ValidationFailure(f"unknown station {station!r}") from None
        if kind in ("station_start", "station_stop") and station is None:
            raise ValidationFailure(f"{kind} requires a station")
        if kind == "fna" and station is not None:
            raise ValidationFailure("fna events carry no station")
        session = self._get(session_id)
        with session.lock:
            if session.state != "live":
                raise StateConflict(f"procedure {session_id} is finalized and immutable")
            if t is None:
                t = max(self.clock() - session.created_at, session.last_t)
            else:
                if t < 0:
                    raise ValidationFailure(f"t must be non-negative, got {t}")
                if t < session.last_t:
                    raise StateConflict(
                        f"t={t} precedes the last recorded event at t={session.last_t}"
                    )
            open_st = session.open_station
            if kind == "station_start" and open_st is not None:
                raise StateConflict(f"{open_st.value} is already open; stop it first")
            if kind == "station_stop":
                if open_st is None:
                    raise StateConflict("no station is open")
                if station != open_st:
                    raise StateConflict(f"open station is {open_st.value}, not {station.value}")
            self._append_event(session, LabelEvent(kind=kind, t=float(t), station=station))
            return float(t)

    def finalize(self, session_id: str) -> ProcedureRecord:
        session = self._get(session_id)
        with session.lock:
            if session.state != "live":
                raise StateConflict(f"procedure {session_id} is already finalized")
            t_final = max(self.clock() - session.created_at, session.last_t)
            open_st = session.open_station
            if open_st is not None:
                self._append_event(
                    session,
                    LabelEvent(kind="station_stop", t=t_final, station=open_st, auto=True),
                )
            session.state = "finalized"
            self._write_meta(session)
            record = self._derive_record(session, t_final)
            record_path = self._dir(session_id) / "record.json"
            record_path.write_text(json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n")
            return record

    def _derive_record(self, session: _Session, duration: float | None = None) -> ProcedureRecord:
        if duration is None:
            duration = session.last_t
        intervals, fna_times, warnings = fold_events(session.events)
        return ProcedureRecord(
            id=session.id,
            patient_ref=session.patient_ref,
            intervals=tuple(intervals),
            fna_times=tuple(fna_times),
            session_duration=float(max(duration, session.last_t)),
            warnings=tuple(warnings),
        )

    def get_record(self, session_id: str) -> ProcedureRecord:
        session = self._get(session_id)
        with session.lock:
            return self._derive_record(session)

    def export_csv(self, session_id: str) -> str:
        record = self._finalized_record(session_id)
        lines = ["station,t_start,t_end"]
        for iv in record.intervals:
            lines.append(f"{iv.station.value},{iv.t_start:.3f},{iv.t_end:.3f}")
        return "\r\n".join(lines) + "\r\n"

    def export_json(self, session_id: str) -> str:
        record = self._finalized_record(session_id)
        return json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n"

    def export_labels_file(self, session_id: str, path: str | Path) -> None:
        """Write the dataset-module labels.csv for a finalized procedure."""
        record = self._finalized_record(session_id)
        write_labels_csv(record.intervals, path)

    def _finalized_record(self, session_id: str) -> ProcedureRecord:
        session = self._get(session_id)
        with session.lock:
            if session.state != "finalized":
                raise StateConflict(f"procedure {session_id} is live; finalize it first")
            return self._derive_record(session)

    def list_procedures(self, state: str | None = None) -> list[dict]:
        if state is not None and state not in ("live", "finalized"):
            raise ValidationFailure(f"unknown state filter {state!r}")
        with self._registry_lock:
            sessions = list(self._sessions.values())
        sessions.sort(key=lambda s: (s.created_at, s.seq, s.id))
        out = []
        for s in sessions:
            if state is not None and s.state != state:
                continue
            out.append(
                {
                    "id": s.id,
                    "patient_ref": s.patient_ref,
                    "state": s.state,
                    "event_count": len(s.events),
                    "created_at": s.created_at,
                }
            )
        return out

"""Annotation-study state machine.

Participants qualify through a training phase, then annotate randomly
ordered batches twice (with a configurable wall-clock gap between the two
passes). Each completed batch pair is gated on the intra-rater rank
correlation between the two passes; failing batches are superseded by a new
annotation generation and excluded from aggregation. Every mutation is an
event appended to the log, so a study can be rebuilt by replay at any time.
"""

from __future__ import annotations

import math
import time
import uuid
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import stats
from .iis import SCALE_LOWER_BOUND, derive_seed
from .stats import MoisRecord, Opinion
from .store import EventLog


class StudyError(Exception):
    """Base for protocol violations; the service maps subclasses to HTTP codes."""


class UnknownTokenError(StudyError):
    pass


class NotQualifiedError(StudyError):
    pass


class DuplicateOpinionError(StudyError):
    pass


class OutOfOrderError(StudyError):
    pass


class RepetitionLockedError(StudyError):
    def __init__(self, message: str, unlock_at: float) -> None:
        super().__init__(message)
        self.unlock_at = unlock_at


class UnknownImageError(StudyError):
    pass


class StudyStateError(StudyError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    batch_size: int = 90
    repetitions: int = 2
    min_repetition_gap_hours: float = 48.0
    reliability_threshold: float = 0.5
    opinions_per_image_target: int = 20
    slider_steps: int = 100
    scale_lower_bound: float = SCALE_LOWER_BOUND

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.repetitions != 2:
            raise ValueError("only double annotation (repetitions=2) is supported")
        if not 0.0 <= self.reliability_threshold <= 1.0:
            raise ValueError("reliability_threshold must be in [0, 1]")
        if self.slider_steps < 2:
            raise ValueError(f"slider_steps must be >= 2, got {self.slider_steps}")
        if self.min_repetition_gap_hours < 0:
            raise ValueError("min_repetition_gap_hours must be >= 0")
        if not SCALE_LOWER_BOUND <= self.scale_lower_bound < 1.0:
            raise ValueError(
                f"scale_lower_bound must be in [{SCALE_LOWER_BOUND}, 1); judgments "
                f"below {SCALE_LOWER_BOUND} are unreliable"
            )


@dataclass(frozen=True)
class TrainingItem:
    image_id: str
    low: float
    high: float
    hint: str = ""

    def __post_init__(self) -> None:
        if not SCALE_LOWER_BOUND <= self.low <= self.high <= 1.0:
            raise ValueError(
                f"training range [{self.low}, {self.high}] must sit inside "
                f"[{SCALE_LOWER_BOUND}, 1] with low <= high"
            )


@dataclass
class Participant:
    participant_id: str
    token: str
    status: str = "in_training"  # in_training | qualified | active | flagged
    training_accepted: set[str] = field(default_factory=set)


@dataclass
class Assignment:
    participant_id: str
    batch_id: str
    repetition: int
    generation: int
    image_order: list[str]
    state: str = "pending"  # pending | in_progress | complete | failed_gate | reannotation_required
    annotated: dict[str, float] = field(default_factory=dict)  # image_id -> scale
    completed_at: float | None = None  # seconds


@dataclass(frozen=True)
class GateRecord:
    participant_id: str
    batch_id: str
    generation: int
    srcc: float | None
    passed: bool
    evaluated_at: int


@dataclass(frozen=True)
class AggregationResult:
    records: tuple[MoisRecord, ...]
    unlabeled: tuple[str, ...]


def slider_to_scale(
    position: int, steps: int = 100, lower: float = SCALE_LOWER_BOUND
) -> float:
    """Geometric slider mapping: equal slider distances are equal scale ratios.

    Position 0 maps to the lower bound, position steps-1 to 1; strictly
    increasing in between.
    """
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if not 0 <= position <= steps - 1:
        raise ValueError(f"position {position} outside [0, {steps - 1}]")
    exponent = (steps - 1 - position) / (steps - 1)
    return lower**exponent


def scale_to_position(
    scale: float, steps: int = 100, lower: float = SCALE_LOWER_BOUND
) -> int:
    """Nearest slider position for a scale; inverse of slider_to_scale on
    grid points."""
    if not lower <= scale <= 1.0:
        raise ValueError(f"scale {scale} outside [{lower}, 1]")
    exponent = math.log(scale) / math.log(lower)
    return int(round((steps - 1) * (1.0 - exponent)))


def slider_grid(steps: int = 100, lower: float = SCALE_LOWER_BOUND) -> list[float]:
    return [slider_to_scale(p, steps, lower) for p in range(steps)]


def partition_batches(
    image_ids: Sequence[str], batch_size: int, seed: int
) -> dict[str, list[str]]:
    """Shuffle the corpus with the recorded seed and chunk it; the last batch
    may be smaller."""
    if not image_ids:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(derive_seed(seed, "batches"))
    ids = [image_ids[i] for i in rng.permutation(len(image_ids))]
    n_batches = math.ceil(len(ids) / batch_size)
    return {
        f"b{i + 1:03d}": ids[i * batch_size : (i + 1) * batch_size]
        for i in range(n_batches)
    }


class StudyEngine:
    """Single-study engine. All mutations are serialized by the caller (the
    service holds one lock); reads see consistent state."""

    def __init__(
        self, log: EventLog | None = None, clock: Callable[[], float] = time.time
    ) -> None:
        self._log = log if log is not None else EventLog(None)
        self._clock = clock
        self._study_id: str | None = None
        self._config = StudyConfig()
        self._seed = 0
        self._batches: dict[str, list[str]] = {}
        self._training_items: list[TrainingItem] = []
        self._participants: dict[str, Participant] = {}
        self._tokens: dict[str, str] = {}
        self._assignments: dict[tuple[str, str, int, int], Assignment] = {}
        self._duties: dict[str, list[tuple[str, int, int]]] = {}
        self._opinions: list[Opinion] = []
        self._gates: list[GateRecord] = []
        self._latest_generation: dict[tuple[str, str], int] = {}
        self._idempotent_acks: dict[str, dict] = {}
        for event in self._log.events():
            self._apply(event)

    @classmethod
    def open(cls, path, clock: Callable[[], float] = time.time) -> "StudyEngine":
        return cls(EventLog(path), clock)

    # -- properties ---------------------------------------------------------

    @property
    def study_id(self) -> str | None:
        return self._study_id

    @property
    def config(self) -> StudyConfig:
        return self._config

    @property
    def batches(self) -> dict[str, list[str]]:
        return {b: list(ids) for b, ids in self._batches.items()}

    @property
    def opinions(self) -> list[Opinion]:
        return list(self._opinions)

    @property
    def gates(self) -> list[GateRecord]:
        return list(self._gates)

    def image_ids(self) -> list[str]:
        ids: list[str] = []
        for batch_id in sorted(self._batches):
            ids.extend(self._batches[batch_id])
        return ids

    def participant_status(self, participant_id: str) -> str:
        if participant_id not in self._participants:
            raise StudyStateError(f"unknown participant {participant_id!r}")
        return self._participants[participant_id].status

    def close(self) -> None:
        self._log.close()

    # -- commands -----------------------------------------------------------

    def create_study(
        self,
        corpus_ids: Sequence[str],
        config: StudyConfig | None = None,
        training_items: Iterable[TrainingItem] = (),
        seed: int = 0,
        study_id: str | None = None,
    ) -> str:
        if self._study_id is not None:
            raise StudyStateError(f"study {self._study_id!r} already exists in this store")
        config = config or StudyConfig()
        items = list(training_items)
        batches = partition_batches(list(corpus_ids), config.batch_size, seed)
        event = self._record(
            "study_created",
            {
                "study_id": study_id or f"study-{uuid.uuid4().hex[:8]}",
                "config": asdict(config),
                "seed": seed,
                "batches": batches,
                "training_items": [asdict(item) for item in items],
                "created_at": self._now_ms(),
            },
        )
        return event["data"]["study_id"]

    def register_participant(
        self, participant_id: str, token: str | None = None
    ) -> str:
        self._require_study()
        if participant_id in self._participants:
            raise StudyStateError(f"participant {participant_id!r} already registered")
        token = token or uuid.uuid4().hex
        if token in self._tokens:
            raise StudyStateError("token already in use")
        orders = {
            f"{batch_id}:{rep}": self._presentation_order(
                participant_id, batch_id, rep, generation=1
            )
            for batch_id in sorted(self._batches)
            for rep in (1, 2)
        }
        status = "in_training" if self._training_items else "qualified"
        self._record(
            "participant_registered",
            {
                "participant_id": participant_id,
                "token": token,
                "orders": orders,
                "status": status,
            },
        )
        return token

    def submit_training_opinion(
        self,
        token: str,
        image_id: str,
        slider_position: int,
        request_token: str | None = None,
    ) -> dict:
        pid = self._resolve(token)
        participant = self._participants[pid]
        if request_token is not None and request_token in self._idempotent_acks:
            return dict(self._idempotent_acks[request_token])
        if participant.status != "in_training":
            raise StudyStateError(f"participant {pid!r} is not in the training phase")
        item = self._current_training_item(participant)
        assert item is not None
        if image_id != item.image_id:
            raise StudyStateError(
                f"current training item is {item.image_id!r}, got {image_id!r}"
            )
        scale = slider_to_scale(
            slider_position, self._config.slider_steps, self._config.scale_lower_bound
        )
        accepted = item.low <= scale <= item.high
        would_accept = participant.training_accepted | {image_id}
        qualified_after = accepted and all(
            t.image_id in would_accept for t in self._training_items
        )
        self._record(
            "training_opinion",
            {
                "participant_id": pid,
                "image_id": image_id,
                "slider_position": slider_position,
                "scale_value": scale,
                "accepted": accepted,
                "qualified_after": qualified_after,
                "submitted_at": self._now_ms(),
                "hint": None if accepted else item.hint,
                "request_token": request_token,
            },
        )
        return {
            "accepted": accepted,
            "hint": None if accepted else item.hint,
            "status": self._participants[pid].status,
        }

    def submit_opinion(
        self,
        token: str,
        batch_id: str,
        repetition: int,
        image_id: str,
        slider_position: int,
        duration_ms: int | None = None,
        request_token: str | None = None,
    ) -> dict:
        pid = self._resolve(token)
        participant = self._participants[pid]
        if participant.status == "in_training":
            raise NotQualifiedError(f"participant {pid!r} has not finished training")
        if participant.status not in ("qualified", "active"):
            raise NotQualifiedError(f"participant {pid!r} is {participant.status}")
        if request_token is not None and request_token in self._idempotent_acks:
            return dict(self._idempotent_acks[request_token])
        current = self._current_duty(pid)
        if current is None:
            raise OutOfOrderError("no open assignment: all batches are complete")
        cur_batch, cur_rep, cur_gen, locked_until = current
        if locked_until is not None and (batch_id, repetition) == (cur_batch, cur_rep):
            raise RepetitionLockedError(
                f"repetition 2 of batch {cur_batch!r} locked until the "
                f"repetition gap has passed",
                unlock_at=locked_until,
            )
        if (batch_id, repetition) != (cur_batch, cur_rep) or locked_until is not None:
            raise OutOfOrderError(
                f"expected batch {cur_batch!r} repetition {cur_rep}, "
                f"got batch {batch_id!r} repetition {repetition}"
            )
        assignment = self._assignments[(pid, batch_id, repetition, cur_gen)]
        if image_id not in assignment.image_order:
            raise UnknownImageError(f"image {image_id!r} is not in batch {batch_id!r}")
        if image_id in assignment.annotated:
            raise DuplicateOpinionError(
                f"duplicate: image {image_id!r} already annotated in repetition "
                f"{repetition} of batch {batch_id!r}"
            )
        scale = slider_to_scale(
            slider_position, self._config.slider_steps, self._config.scale_lower_bound
        )
        now_ms = self._now_ms()
        event = self._record(
            "opinion_submitted",
            {
                "study_id": self._study_id,
                "participant_id": pid,
                "image_id": image_id,
                "batch_id": batch_id,
                "repetition": repetition,
                "generation": cur_gen,
                "slider_position": slider_position,
                "scale_value": scale,
                "submitted_at": now_ms,
                "duration_ms": duration_ms,
                "request_token": request_token,
            },
        )
        ack = dict(self._idempotent_acks[f"seq:{event['seq']}"])
        if ack["batch_complete"] and repetition == 2:
            gate = self._evaluate_gate(pid, batch_id, cur_gen)
            ack["gate"] = {"srcc": gate.srcc, "passed": gate.passed}
        return ack

    def evaluate_reliability_gate(
        self, participant_id: str, batch_id: str, generation: int | None = None
    ) -> GateRecord:
        self._require_study()
        if participant_id not in self._participants:
            raise StudyStateError(f"unknown participant {participant_id!r}")
        if batch_id not in self._batches:
            raise StudyStateError(f"unknown batch {batch_id!r}")
        generation = generation or self._latest_generation.get(
            (participant_id, batch_id), 1
        )
        for gate in self._gates:
            if (gate.participant_id, gate.batch_id, gate.generation) == (
                participant_id,
                batch_id,
                generation,
            ):
                return gate
        return self._evaluate_gate(participant_id, batch_id, generation)

    def flag_participant(self, participant_id: str) -> None:
        self._require_study()
        if participant_id not in self._participants:
            raise StudyStateError(f"unknown participant {participant_id!r}")
        self._record("participant_flagged", {"participant_id": participant_id})

    # -- queries ------------------------------------------------------------

    def resolve_token(self, token: str) -> str:
        return self._resolve(token)

    def next_task(self, token: str) -> dict:
        pid = self._resolve(token)
        participant = self._participants[pid]
        if participant.status == "flagged":
            raise StudyStateError(f"participant {pid!r} is flagged")
        if participant.status == "in_training":
            item = self._current_training_item(participant)
            assert item is not None
            remaining = sum(
                1
                for t in self._training_items
                if t.image_id not in participant.training_accepted
            )
            return {
                "phase": "training",
                "item": {"image_id": item.image_id, "hint": item.hint},
                "remaining_items": remaining,
            }
        current = self._current_duty(pid)
        if current is None:
            return {"phase": "done"}
        batch_id, repetition, generation, locked_until = current
        if locked_until is not None:
            return {"phase": "locked", "unlock_at": locked_until}
        assignment = self._assignments[(pid, batch_id, repetition, generation)]
        remaining = [
            i for i in assignment.image_order if i not in assignment.annotated
        ]
        return {
            "phase": "annotation",
            "batch_id": batch_id,
            "repetition": repetition,
            "generation": generation,
            "image_ids": list(assignment.image_order),
            "remaining_image_ids": remaining,
            "annotated_count": len(assignment.annotated),
        }

    def progress(self, token: str) -> dict:
        pid = self._resolve(token)
        participant = self._participants[pid]
        duties = []
        for batch_id, rep, gen in self._duties.get(pid, []):
            a = self._assignments[(pid, batch_id, rep, gen)]
            duties.append(
                {
                    "batch_id": batch_id,
                    "repetition": rep,
                    "generation": gen,
                    "state": a.state,
                    "annotated": len(a.annotated),
                    "total": len(a.image_order),
                }
            )
        return {
            "participant_id": pid,
            "status": participant.status,
            "assignments": duties,
            "opinions_submitted": sum(
                1 for op in self._opinions if op.participant_id == pid
            ),
        }

    def aggregate(self, seed: int = 0) -> AggregationResult:
        """MOIS per image over all gate-passing opinions (both repetitions),
        with a per-image bootstrap CI. Images without any valid opinion are
        reported, never silently dropped."""
        self._require_study()
        passed = {
            (g.participant_id, g.batch_id, g.generation)
            for g in self._gates
            if g.passed
        }
        by_image: dict[str, list[float]] = {}
        for op in self._opinions:
            if (op.participant_id, op.batch_id, op.generation) in passed:
                by_image.setdefault(op.image_id, []).append(op.scale_value)
        records = []
        unlabeled = []
        for image_id in sorted(self.image_ids()):
            values = by_image.get(image_id)
            if not values:
                unlabeled.append(image_id)
                continue
            records.append(
                MoisRecord(
                    image_id=image_id,
                    mois=stats.geometric_mean(values),
                    ci95=stats.bootstrap_ci(
                        values,
                        resample_size=min(20, len(values)),
                        seed=stats.aggregate_bootstrap_seed(seed, image_id),
                    ),
                    n_opinions=len(values),
                )
            )
        return AggregationResult(tuple(records), tuple(unlabeled))

    def export_bundle(self, seed: int = 0) -> dict:
        self._require_study()
        aggregation = self.aggregate(seed)
        return {
            "study_id": self._study_id,
            "config": asdict(self._config),
            "seed": self._seed,
            "batches": self.batches,
            "participants": [
                {"participant_id": p.participant_id, "status": p.status}
                for p in self._participants.values()
            ],
            "opinions": [asdict(op) for op in self._opinions],
            "mois": [asdict(rec) for rec in aggregation.records],
            "unlabeled": list(aggregation.unlabeled),
            "gates": [asdict(g) for g in self._gates],
        }

    # -- internals ----------------------------------------------------------

    def _now_ms(self) -> int:
        return int(self._clock() * 1000)

    def _require_study(self) -> None:
        if self._study_id is None:
            raise StudyStateError("no study exists in this store yet")

    def _resolve(self, token: str) -> str:
        self._require_study()
        pid = self._tokens.get(token)
        if pid is None:
            raise UnknownTokenError("unknown participant token")
        return pid

    def _presentation_order(
        self, participant_id: str, batch_id: str, repetition: int, generation: int
    ) -> list[str]:
        images = self._batches[batch_id]
        rng = np.random.default_rng(
            derive_seed(
                self._seed, "order", participant_id, batch_id,
                str(repetition), str(generation),
            )
        )
        return [images[i] for i in rng.permutation(len(images))]

    def _current_training_item(self, participant: Participant) -> TrainingItem | None:
        for item in self._training_items:
            if item.image_id not in participant.training_accepted:
                return item
        return None

    def _current_duty(
        self, pid: str
    ) -> tuple[str, int, int, float | None] | None:
        """First open duty; the fourth element is an unlock time when the
        duty is a repetition-2 pass still inside the minimum gap."""
        gap_s = self._config.min_repetition_gap_hours * 3600.0
        for batch_id, rep, gen in self._duties.get(pid, []):
            assignment = self._assignments[(pid, batch_id, rep, gen)]
            if assignment.state in ("complete", "failed_gate"):
                continue
            if rep == 2:
                first = self._assignments[(pid, batch_id, 1, gen)]
                if first.state != "complete":
                    continue  # repetition 1 comes earlier in the duty list
                assert first.completed_at is not None
                unlock = first.completed_at + gap_s
                if self._clock() < unlock:
                    return batch_id, rep, gen, unlock
            return batch_id, rep, gen, None
        return None

    def _evaluate_gate(
        self, participant_id: str, batch_id: str, generation: int
    ) -> GateRecord:
        first = self._assignments.get((participant_id, batch_id, 1, generation))
        second = self._assignments.get((participant_id, batch_id, 2, generation))
        if (
            first is None
            or second is None
            or first.state != "complete"
            or second.state != "complete"
        ):
            raise StudyStateError(
                f"both repetitions of batch {batch_id!r} must be complete "
                f"before the reliability gate can run"
            )
        images = sorted(self._batches[batch_id])
        value = stats.srcc(
            [first.annotated[i] for i in images],
            [second.annotated[i] for i in images],
        )
        # An undefined SRCC (constant vector) carries no rank information,
        # so it cannot demonstrate reliability: treat as failed.
        passed = value is not None and value >= self._config.reliability_threshold
        reannotation = None
        if not passed:
            new_gen = generation + 1
            reannotation = {
                "generation": new_gen,
                "orders": {
                    str(rep): self._presentation_order(
                        participant_id, batch_id, rep, new_gen
                    )
                    for rep in (1, 2)
                },
            }
        event = self._record(
            "gate_evaluated",
            {
                "participant_id": participant_id,
                "batch_id": batch_id,
                "generation": generation,
                "srcc": value,
                "passed": passed,
                "evaluated_at": self._now_ms(),
                "reannotation": reannotation,
            },
        )
        data = event["data"]
        return GateRecord(
            participant_id=data["participant_id"],
            batch_id=data["batch_id"],
            generation=data["generation"],
            srcc=data["srcc"],
            passed=data["passed"],
            evaluated_at=data["evaluated_at"],
        )

    def _record(self, event_type: str, data: dict) -> dict:
        event = self._log.append(event_type, data)
        self._apply(event)
        return event

    # -- event application (replay-safe, no validation, no clock) -----------

    def _apply(self, event: dict) -> None:
        data = event["data"]
        kind = event["type"]
        if kind == "study_created":
            self._study_id = data["study_id"]
            self._config = StudyConfig(**data["config"])
            self._seed = data["seed"]
            self._batches = {b: list(ids) for b, ids in data["batches"].items()}
            self._training_items = [
                TrainingItem(**item) for item in data["training_items"]
            ]
        elif kind == "participant_registered":
            pid = data["participant_id"]
            self._participants[pid] = Participant(
                participant_id=pid, token=data["token"], status=data["status"]
            )
            self._tokens[data["token"]] = pid
            duties = []
            for rep in (1, 2):
                for batch_id in sorted(self._batches):
                    order = data["orders"][f"{batch_id}:{rep}"]
                    self._assignments[(pid, batch_id, rep, 1)] = Assignment(
                        participant_id=pid,
                        batch_id=batch_id,
                        repetition=rep,
                        generation=1,
                        image_order=list(order),
                    )
                    duties.append((batch_id, rep, 1))
                    self._latest_generation[(pid, batch_id)] = 1
            self._duties[pid] = duties
        elif kind == "training_opinion":
            participant = self._participants[data["participant_id"]]
            if data["accepted"]:
                participant.training_accepted.add(data["image_id"])
            if data["qualified_after"]:
                participant.status = "qualified"
            if data.get("request_token"):
                self._idempotent_acks[data["request_token"]] = {
                    "accepted": data["accepted"],
                    "hint": data.get("hint"),
                    "status": participant.status,
                }
        elif kind == "opinion_submitted":
            opinion = Opinion(
                study_id=data["study_id"],
                participant_id=data["participant_id"],
                image_id=data["image_id"],
                batch_id=data["batch_id"],
                repetition=data["repetition"],
                scale_value=data["scale_value"],
                slider_position=data["slider_position"],
                submitted_at=data["submitted_at"],
                duration_ms=data["duration_ms"],
                generation=data["generation"],
            )
            self._opinions.append(opinion)
            pid = opinion.participant_id
            participant = self._participants[pid]
            if participant.status == "qualified":
                participant.status = "active"
            key = (pid, opinion.batch_id, opinion.repetition, opinion.generation)
            assignment = self._assignments[key]
            assignment.annotated[opinion.image_id] = opinion.scale_value
            complete = len(assignment.annotated) == len(assignment.image_order)
            assignment.state = "complete" if complete else "in_progress"
            if complete:
                assignment.completed_at = opinion.submitted_at / 1000.0
            ack = {
                "participant_id": pid,
                "image_id": opinion.image_id,
                "slider_position": opinion.slider_position,
                "scale_value": opinion.scale_value,
                "batch_id": opinion.batch_id,
                "repetition": opinion.repetition,
                "generation": opinion.generation,
                "remaining": len(assignment.image_order) - len(assignment.annotated),
                "batch_complete": complete,
            }
            self._idempotent_acks[f"seq:{event['seq']}"] = ack
            if data.get("request_token"):
                self._idempotent_acks[data["request_token"]] = ack
        elif kind == "gate_evaluated":
            record = GateRecord(
                participant_id=data["participant_id"],
                batch_id=data["batch_id"],
                generation=data["generation"],
                srcc=data["srcc"],
                passed=data["passed"],
                evaluated_at=data["evaluated_at"],
            )
            self._gates.append(record)
            if not record.passed:
                pid, batch_id = record.participant_id, record.batch_id
                for rep in (1, 2):
                    self._assignments[(pid, batch_id, rep, record.generation)].state = (
                        "failed_gate"
                    )
                re_info = data["reannotation"]
                new_gen = re_info["generation"]
                for rep in (1, 2):
                    self._assignments[(pid, batch_id, rep, new_gen)] = Assignment(
                        participant_id=pid,
                        batch_id=batch_id,
                        repetition=rep,
                        generation=new_gen,
                        image_order=list(re_info["orders"][str(rep)]),
                        state="reannotation_required",
                    )
                    self._duties[pid].append((batch_id, rep, new_gen))
                self._latest_generation[(pid, batch_id)] = new_gen
        elif kind == "participant_flagged":
            self._participants[data["participant_id"]].status = "flagged"
        else:
            raise ValueError(f"unknown event type {kind!r}")

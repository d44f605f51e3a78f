"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class StudyConfigModel(BaseModel):
    batch_size: int = 90
    repetitions: int = 2
    min_repetition_gap_hours: float = 48.0
    reliability_threshold: float = 0.5
    opinions_per_image_target: int = 20
    slider_steps: int = 100
    scale_lower_bound: float = 0.05


class TrainingItemModel(BaseModel):
    image_id: str
    low: float
    high: float
    hint: str = ""


class StudyCreateRequest(BaseModel):
    config: StudyConfigModel = Field(default_factory=StudyConfigModel)
    training_items: list[TrainingItemModel] = Field(default_factory=list)
    seed: int = 0
    study_id: str | None = None


class StudyCreateResponse(BaseModel):
    study_id: str
    batch_ids: list[str]
    batch_sizes: dict[str, int]


class ParticipantCreateRequest(BaseModel):
    participant_id: str
    token: str | None = None


class ParticipantCreateResponse(BaseModel):
    participant_id: str
    token: str
    status: str


class OpinionRequest(BaseModel):
    batch_id: str
    repetition: int
    image_id: str
    slider_position: int
    duration_ms: int | None = None
    request_token: str | None = None


class GateResultModel(BaseModel):
    srcc: float | None
    passed: bool


class OpinionResponse(BaseModel):
    participant_id: str
    image_id: str
    slider_position: int
    scale_value: float
    batch_id: str
    repetition: int
    generation: int
    remaining: int
    batch_complete: bool
    gate: GateResultModel | None = None


class TrainingOpinionRequest(BaseModel):
    image_id: str
    slider_position: int
    request_token: str | None = None


class TrainingOpinionResponse(BaseModel):
    accepted: bool
    hint: str | None = None
    status: str


class TrainingTaskModel(BaseModel):
    image_id: str
    hint: str


class NextTaskResponse(BaseModel):
    phase: Literal["training", "annotation", "locked", "done"]
    item: TrainingTaskModel | None = None
    remaining_items: int | None = None
    batch_id: str | None = None
    repetition: int | None = None
    generation: int | None = None
    image_ids: list[str] | None = None
    remaining_image_ids: list[str] | None = None
    annotated_count: int | None = None
    unlock_at: float | None = None


class AssignmentProgressModel(BaseModel):
    batch_id: str
    repetition: int
    generation: int
    state: str
    annotated: int
    total: int


class ProgressResponse(BaseModel):
    participant_id: str
    status: str
    assignments: list[AssignmentProgressModel]
    opinions_submitted: int


class GateRecordModel(BaseModel):
    participant_id: str
    batch_id: str
    generation: int
    srcc: float | None
    passed: bool
    evaluated_at: int


class MoisRecordModel(BaseModel):
    image_id: str
    mois: float
    ci95: float
    n_opinions: int


class AggregateResponse(BaseModel):
    study_id: str
    seed: int
    records: list[MoisRecordModel]
    unlabeled: list[str]


class SliderGridResponse(BaseModel):
    slider_steps: int
    scale_lower_bound: float
    scales: list[float]


class HealthResponse(BaseModel):
    status: str
    study_id: str | None
    corpus_size: int

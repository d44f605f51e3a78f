"""HTTP service: stimulus rendering, annotation flow, and study admin.

Rendering is server-side so every participant sees bit-identical stimuli
regardless of their browser's scaler. Study mutations are serialized through
a single lock around the engine (one writer); renders run on their own
thread pool and never block submissions.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

from fastapi import Depends, FastAPI, Header, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import corpus as corpus_mod
from ..resample import KERNEL_NAMES, ResampleSpec, downscale
from ..study import (
    DuplicateOpinionError,
    NotQualifiedError,
    OutOfOrderError,
    RepetitionLockedError,
    StudyConfig,
    StudyEngine,
    StudyError,
    StudyStateError,
    TrainingItem,
    UnknownImageError,
    UnknownTokenError,
    slider_grid,
)
from . import schemas

API_PREFIX = "/api/v1"


@dataclass
class ServiceSettings:
    corpus_path: Path | None = None
    store_path: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8808
    corpus_min_width: int = corpus_mod.DEFAULT_MIN_WIDTH
    render_cache_size: int = 4096
    render_workers: int = field(default_factory=lambda: os.cpu_count() or 2)
    check_corpus_files: bool = True
    static_dir: Path | None = None

    _PATH_FIELDS = ("corpus_path", "store_path", "static_dir")

    @classmethod
    def load(
        cls, config_file: str | Path | None = None, **overrides
    ) -> "ServiceSettings":
        """Single config file, then IISA_* environment overrides, then
        explicit keyword overrides (CLI flags) on top."""
        values: dict = {}
        if config_file is not None:
            data = json.loads(Path(config_file).read_text(encoding="utf-8"))
            unknown = set(data) - {f.name for f in fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(data)
        if os.environ.get("IISA_CORPUS"):
            values["corpus_path"] = os.environ["IISA_CORPUS"]
        if os.environ.get("IISA_STORE"):
            values["store_path"] = os.environ["IISA_STORE"]
        if os.environ.get("IISA_PORT"):
            values["port"] = int(os.environ["IISA_PORT"])
        values.update({k: v for k, v in overrides.items() if v is not None})
        for name in cls._PATH_FIELDS:
            if values.get(name) is not None:
                values[name] = Path(values[name])
        return cls(**values)

    @classmethod
    def from_env(cls, **overrides) -> "ServiceSettings":
        return cls.load(None, **overrides)


class RenderCache:
    """Bounded LRU over encoded renders; cached and fresh bytes are always
    identical because keys carry the exact quantized scale and kernel."""

    def __init__(self, max_entries: int) -> None:
        self._max = max_entries
        self._data: OrderedDict[tuple, bytes] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: tuple) -> bytes | None:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
            return None

    def put(self, key: tuple, value: bytes) -> None:
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self._max:
                self._data.popitem(last=False)


_ERROR_CODES: list[tuple[type[StudyError], int]] = [
    (UnknownTokenError, 401),
    (NotQualifiedError, 403),
    (UnknownImageError, 404),
    (DuplicateOpinionError, 409),
    (OutOfOrderError, 409),
    (RepetitionLockedError, 423),
    (StudyStateError, 409),
]


def _status_for(exc: StudyError) -> int:
    for klass, code in _ERROR_CODES:
        if isinstance(exc, klass):
            return code
    return 409


def create_app(
    settings: ServiceSettings | None = None,
    clock: Callable[[], float] = time.time,
) -> FastAPI:
    settings = settings or ServiceSettings.from_env()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        render_pool.shutdown(wait=True)
        with engine_lock:
            engine.close()

    app = FastAPI(title="iisa", version="0.1.0", lifespan=lifespan)

    entries: dict[str, corpus_mod.CorpusEntry] = {}
    manifest_base: Path | None = None
    if settings.corpus_path is not None:
        manifest_base = Path(settings.corpus_path).parent
        entries = corpus_mod.entries_by_id(
            corpus_mod.load_manifest(
                settings.corpus_path,
                min_width=settings.corpus_min_width,
                check_files=settings.check_corpus_files,
            )
        )

    engine = StudyEngine.open(settings.store_path, clock=clock) if settings.store_path else StudyEngine(clock=clock)
    engine_lock = threading.Lock()
    render_pool = ThreadPoolExecutor(
        max_workers=settings.render_workers, thread_name_prefix="render"
    )
    cache = RenderCache(settings.render_cache_size)

    app.state.engine = engine
    app.state.settings = settings

    @app.exception_handler(StudyError)
    async def study_error_handler(request: Request, exc: StudyError) -> JSONResponse:
        payload = {"detail": str(exc)}
        if isinstance(exc, RepetitionLockedError):
            payload["unlock_at"] = exc.unlock_at
        return JSONResponse(status_code=_status_for(exc), content=payload)

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    def participant_token(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise UnknownTokenError("missing bearer participant token")
        return authorization.removeprefix("Bearer ").strip()

    # -- general ------------------------------------------------------------

    @app.get(f"{API_PREFIX}/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        with engine_lock:
            return schemas.HealthResponse(
                status="ok", study_id=engine.study_id, corpus_size=len(entries)
            )

    @app.get(f"{API_PREFIX}/slider-grid", response_model=schemas.SliderGridResponse)
    def get_slider_grid() -> schemas.SliderGridResponse:
        with engine_lock:
            cfg = engine.config
        return schemas.SliderGridResponse(
            slider_steps=cfg.slider_steps,
            scale_lower_bound=cfg.scale_lower_bound,
            scales=slider_grid(cfg.slider_steps, cfg.scale_lower_bound),
        )

    # -- rendering ----------------------------------------------------------

    def render_bytes(image_id: str, scale: float, spec: ResampleSpec) -> bytes:
        image = corpus_mod.load_image(entries[image_id], manifest_base)
        return corpus_mod.encode_png(downscale(image, scale, spec))

    @app.get(f"{API_PREFIX}/image/{{image_id}}/render")
    async def render(
        image_id: str,
        scale: float | None = None,
        position: int | None = None,
        kernel: str = "lanczos",
    ) -> Response:
        if image_id not in entries:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        if kernel not in KERNEL_NAMES:
            raise HTTPException(status_code=422, detail=f"unknown kernel {kernel!r}")
        with engine_lock:
            cfg = engine.config
        if position is not None:
            if not 0 <= position <= cfg.slider_steps - 1:
                raise HTTPException(
                    status_code=422,
                    detail=f"position {position} outside [0, {cfg.slider_steps - 1}]",
                )
            from ..study import slider_to_scale

            scale = slider_to_scale(position, cfg.slider_steps, cfg.scale_lower_bound)
        elif scale is None:
            raise HTTPException(status_code=422, detail="scale or position required")
        elif scale < cfg.scale_lower_bound:
            raise HTTPException(
                status_code=422,
                detail=f"scale below s_lb={cfg.scale_lower_bound}",
            )
        elif scale > 1.0:
            raise HTTPException(status_code=422, detail="scale above 1")
        else:
            # Quantize free-form scales so equal-looking requests share cache
            # keys and bytes; slider positions are already exact grid values.
            scale = round(scale, 4)
        spec = ResampleSpec(kernel=kernel)  # type: ignore[arg-type]
        key = (image_id, f"{scale:.10g}", spec.tag())
        body = cache.get(key)
        if body is None:
            loop = asyncio.get_running_loop()
            body = await loop.run_in_executor(
                render_pool, render_bytes, image_id, scale, spec
            )
            cache.put(key, body)
        return Response(content=body, media_type="image/png")

    # -- participant flow ----------------------------------------------------

    @app.get(f"{API_PREFIX}/batch/next", response_model=schemas.NextTaskResponse)
    def batch_next(token: str = Depends(participant_token)) -> schemas.NextTaskResponse:
        with engine_lock:
            return schemas.NextTaskResponse(**engine.next_task(token))

    @app.post(f"{API_PREFIX}/opinion", response_model=schemas.OpinionResponse)
    def post_opinion(
        body: schemas.OpinionRequest, token: str = Depends(participant_token)
    ) -> schemas.OpinionResponse:
        with engine_lock:
            ack = engine.submit_opinion(
                token,
                batch_id=body.batch_id,
                repetition=body.repetition,
                image_id=body.image_id,
                slider_position=body.slider_position,
                duration_ms=body.duration_ms,
                request_token=body.request_token,
            )
        return schemas.OpinionResponse(**ack)

    @app.post(
        f"{API_PREFIX}/training/opinion",
        response_model=schemas.TrainingOpinionResponse,
    )
    def post_training_opinion(
        body: schemas.TrainingOpinionRequest, token: str = Depends(participant_token)
    ) -> schemas.TrainingOpinionResponse:
        with engine_lock:
            result = engine.submit_training_opinion(
                token, body.image_id, body.slider_position,
                request_token=body.request_token,
            )
        return schemas.TrainingOpinionResponse(**result)

    @app.get(f"{API_PREFIX}/progress", response_model=schemas.ProgressResponse)
    def get_progress(token: str = Depends(participant_token)) -> schemas.ProgressResponse:
        with engine_lock:
            return schemas.ProgressResponse(**engine.progress(token))

    # -- admin ----------------------------------------------------------------

    @app.post(f"{API_PREFIX}/admin/study", response_model=schemas.StudyCreateResponse)
    def create_study(body: schemas.StudyCreateRequest) -> schemas.StudyCreateResponse:
        if not entries:
            raise StudyStateError("no corpus is loaded; cannot create a study")
        config = StudyConfig(**body.config.model_dump())
        items = [TrainingItem(**item.model_dump()) for item in body.training_items]
        with engine_lock:
            study_id = engine.create_study(
                sorted(entries),
                config=config,
                training_items=items,
                seed=body.seed,
                study_id=body.study_id,
            )
            batches = engine.batches
        return schemas.StudyCreateResponse(
            study_id=study_id,
            batch_ids=sorted(batches),
            batch_sizes={b: len(ids) for b, ids in batches.items()},
        )

    @app.post(
        f"{API_PREFIX}/admin/participant",
        response_model=schemas.ParticipantCreateResponse,
    )
    def create_participant(
        body: schemas.ParticipantCreateRequest,
    ) -> schemas.ParticipantCreateResponse:
        with engine_lock:
            token = engine.register_participant(body.participant_id, body.token)
            status = engine.participant_status(body.participant_id)
        return schemas.ParticipantCreateResponse(
            participant_id=body.participant_id, token=token, status=status
        )

    @app.get(f"{API_PREFIX}/admin/gates", response_model=list[schemas.GateRecordModel])
    def get_gates() -> list[schemas.GateRecordModel]:
        with engine_lock:
            gates = engine.gates
        return [
            schemas.GateRecordModel(
                participant_id=g.participant_id,
                batch_id=g.batch_id,
                generation=g.generation,
                srcc=g.srcc,
                passed=g.passed,
                evaluated_at=g.evaluated_at,
            )
            for g in gates
        ]

    @app.get(f"{API_PREFIX}/admin/aggregate", response_model=schemas.AggregateResponse)
    def get_aggregate(seed: int = 0) -> schemas.AggregateResponse:
        with engine_lock:
            result = engine.aggregate(seed)
            study_id = engine.study_id
        return schemas.AggregateResponse(
            study_id=study_id or "",
            seed=seed,
            records=[
                schemas.MoisRecordModel(
                    image_id=r.image_id,
                    mois=r.mois,
                    ci95=r.ci95,
                    n_opinions=r.n_opinions,
                )
                for r in result.records
            ],
            unlabeled=list(result.unlabeled),
        )

    @app.get(f"{API_PREFIX}/admin/export")
    def get_export(seed: int = 0) -> dict:
        with engine_lock:
            bundle = engine.export_bundle(seed)
        bundle["corpus"] = [
            {
                "image_id": e.image_id,
                "file_path": e.file_path,
                "width": e.width,
                "height": e.height,
                "source_tag": e.source_tag,
                "content_tags": list(e.content_tags),
            }
            for e in entries.values()
        ]
        return bundle

    if settings.static_dir is not None and Path(settings.static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=settings.static_dir, html=True), name="ui")

    return app

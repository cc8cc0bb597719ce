"""HTTP annotation service wrapping the active-learning loop.

A single background thread owns the slow phases (train / evaluate / acquire)
while the API serves the pending batch, accepts labels, and exposes run
metrics.  All state mutations go through one lock, label submissions are
journaled immediately and deduplicated by (cycle, image id), and the cycle
advances synchronously when the last batch item arrives.
"""

from __future__ import annotations

import io
import socket
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel, Field

from .dataset import class_stats, load_pixels
from .loop import LoopError, LoopState, complete_cycle, journal_label, prepare_cycle, record_to_obj


class LabelItem(BaseModel):
    id: str
    label: str
    elapsed_ms: int = Field(default=0, ge=0)


class LabelSubmission(BaseModel):
    cycle: int
    labels: list[LabelItem]
    annotator_id: str = "ui"


class LoopServer:
    """Owns the loop state; one writer thread, locked API access."""

    def __init__(self, state: LoopState, cycles: int):
        if cycles < 1:
            raise LoopError(f"cycles must be >= 1, got {cycles}")
        self.state = state
        self.cycles = cycles
        self.lock = threading.Lock()
        self.phase = "training"
        self.batch = None
        self.received: dict[str, str] = {}
        self.served_at = 0.0
        self._batch_done = threading.Event()
        self._stop = False
        self._thread: threading.Thread | None = None
        self.error: str | None = None

    # -- worker -----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._work, name="loop-worker", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop = True
        self._batch_done.set()
        if self._thread is not None:
            self._thread.join(timeout=30)

    def _work(self) -> None:
        try:
            while not self._stop and self.state.cycle < self.cycles and len(self.state.unlabeled):
                batch, _val_acc = prepare_cycle(self.state)
                with self.lock:
                    self.batch = batch
                    self.received = {}
                    self.served_at = time.monotonic()
                    self.phase = "annotating"
                self._batch_done.wait()
                self._batch_done.clear()
            with self.lock:
                if self.error is None:
                    self.phase = "idle"
        except Exception as exc:  # surfaced via /api/status
            with self.lock:
                self.phase = "idle"
                self.error = f"{type(exc).__name__}: {exc}"

    # -- api operations ----------------------------------------------------

    def batch_payload(self) -> dict:
        with self.lock:
            if self.phase != "annotating" or self.batch is None:
                return {"cycle": self.state.cycle, "items": []}
            items = [
                {
                    "id": item.id,
                    "image_url": f"/api/image/{item.id}",
                    "suggested_label": item.suggested_label,
                    "entropy": item.entropy,
                }
                for item in self.batch.items
            ]
            return {"cycle": self.batch.cycle, "items": items}

    def submit(self, body: LabelSubmission) -> dict:
        with self.lock:
            if self.phase != "annotating" or self.batch is None:
                raise HTTPException(
                    status_code=409,
                    detail={"error": "cycle_busy", "phase": self.phase},
                )
            if body.cycle != self.batch.cycle:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "error": "stale_cycle",
                        "expected": self.batch.cycle,
                        "got": body.cycle,
                    },
                )
            batch_ids = {item.id for item in self.batch.items}
            for entry in body.labels:
                if entry.id not in batch_ids:
                    raise HTTPException(
                        status_code=409,
                        detail={"error": "unknown_image", "id": entry.id},
                    )
                if entry.label not in self.state.config.classes:
                    raise HTTPException(
                        status_code=422,
                        detail={
                            "error": "unknown_label",
                            "id": entry.id,
                            "label": entry.label,
                            "classes": list(self.state.config.classes),
                        },
                    )
            accepted = 0
            for entry in body.labels:
                if entry.id in self.received:
                    continue  # resubmission of the same item: journal once
                journal_label(self.state, entry.id, entry.label, entry.elapsed_ms, body.annotator_id)
                self.received[entry.id] = entry.label
                accepted += 1
            remaining = len(self.batch.items) - len(self.received)
            if remaining == 0:
                seconds = time.monotonic() - self.served_at
                complete_cycle(self.state, dict(self.received), seconds)
                self.batch = None
                self.received = {}
                done = self.state.cycle >= self.cycles or not len(self.state.unlabeled)
                self.phase = "idle" if done else "training"
                self._batch_done.set()
            return {"accepted": accepted, "remaining": remaining}

    def image_bytes(self, image_id: str) -> bytes:
        with self.lock:
            record = None
            for ds in (self.state.unlabeled, self.state.labeled, self.state.val):
                if image_id in ds:
                    record = ds.get(image_id)
                    break
        if record is None:
            raise HTTPException(status_code=404, detail={"error": "unknown_image", "id": image_id})
        pixels = load_pixels(record)
        buf = io.BytesIO()
        Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
        return buf.getvalue()

    def metrics_payload(self) -> dict:
        with self.lock:
            stats = class_stats(self.state.labeled, classes=self.state.config.classes)
            return {
                "history": [record_to_obj(r) for r in self.state.history],
                "class_stats": {"counts": stats.counts, "fractions": stats.fractions},
            }

    def status_payload(self) -> dict:
        with self.lock:
            pending = 0
            if self.phase == "annotating" and self.batch is not None:
                pending = len(self.batch.items) - len(self.received)
            payload = {"cycle": self.state.cycle, "phase": self.phase, "pending": pending}
            if self.error:
                payload["error"] = self.error
            return payload


def create_app(server: LoopServer, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="seedloop annotation service")

    @app.get("/api/batch")
    def get_batch() -> JSONResponse:
        return JSONResponse(server.batch_payload())

    @app.get("/api/image/{image_id}")
    def get_image(image_id: str) -> Response:
        return Response(content=server.image_bytes(image_id), media_type="image/png")

    @app.post("/api/labels")
    def post_labels(body: LabelSubmission) -> JSONResponse:
        return JSONResponse(server.submit(body))

    @app.get("/api/metrics")
    def get_metrics() -> JSONResponse:
        return JSONResponse(server.metrics_payload())

    @app.get("/api/status")
    def get_status() -> JSONResponse:
        return JSONResponse(server.status_payload())

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index() -> JSONResponse:
            return JSONResponse({"service": "seedloop", "ui": "not bundled", "api": "/api/status"})

    return app


def serve(
    state: LoopState,
    cycles: int,
    host: str = "127.0.0.1",
    port: int = 8000,
    ui_dir: str | Path | None = None,
) -> None:
    """Run the annotation service until the requested cycles complete."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise LoopError(f"cannot listen on {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    server = LoopServer(state, cycles)
    app = create_app(server, ui_dir=ui_dir)
    server.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        server.stop()

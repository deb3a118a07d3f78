"""Review service: segmentation proposals, token classes, and human
corrections over HTTP.

The server holds no authoritative state of its own: every mutation is
persisted to the project's corrections files first, then the in-memory
session is re-derived by replaying the project from disk. A project plus
its corrections therefore fully determines what any client sees, and the
service can never persist a state the segmenter or classifier would
reject (mutations are validated by actually replaying them).

Single-writer model: one reviewer per project; reads are concurrent,
writes serialize on a lock.
"""
from __future__ import annotations

import base64
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from . import schemas
from .classifier import ClassAction, ClassifierParams, detect_mirror_pairs, grid_to_rle, load_inventory
from .errors import ValidationError
from .project import (
    BuildState,
    ProjectLayout,
    append_edit_log,
    apply_review,
    atomic_write_json,
    image_sha256,
    load_corrections,
    load_class_actions,
    load_segment_record,
    project,
    rebuild_state,
    save_class_actions,
    segment_image,
)
from .segmenter import CorrectionSet

FALLBACK_PAGE = """<!doctype html>
<html><head><title>glyphforge review</title></head>
<body>
<h1>glyphforge review service</h1>
<p>The review UI bundle is not built. The JSON API is live under <code>/api/</code>.</p>
</body></html>
"""


class ReviewSession:
    """Project state derived by replay; mutations persist then refresh."""

    def __init__(self, root: str | Path):
        self.layout: ProjectLayout = project(root)
        if not self.layout.line_ids():
            raise ValidationError("corrupt-project", f"no line images under {self.layout.images}")
        if not self.layout.inventory.is_file():
            raise ValidationError(
                "corrupt-project",
                f"{self.layout.inventory} is missing; run `glyphforge segment` and `glyphforge classify` first",
            )
        self.lock = threading.RLock()
        self.state: BuildState = self._replay()

    def _classifier_params(self) -> ClassifierParams:
        _, _, params = load_inventory(self.layout.inventory)
        return params

    def _replay(self) -> BuildState:
        return rebuild_state(self.layout, self._classifier_params())

    def refresh(self) -> None:
        with self.lock:
            self.state = self._replay()

    # -- queries ---------------------------------------------------------

    def line_summaries(self) -> list[schemas.LineSummary]:
        out = []
        for line_id in sorted(self.state.lines):
            rec = self.state.lines[line_id]
            out.append(
                schemas.LineSummary(
                    line_id=line_id,
                    width=rec.raster.width,
                    height=rec.raster.height,
                    occurrence_count=len(rec.occurrences),
                    cut_count=len(rec.cuts),
                    raster_sha256=rec.raster_sha256,
                    has_corrections=self.layout.correction_path(line_id).is_file(),
                )
            )
        return out

    def line_detail(self, line_id: str) -> schemas.LineDetail:
        if line_id not in self.state.lines:
            raise ValidationError("unknown-line", f"no line {line_id!r} in this project")
        rec = self.state.lines[line_id]
        png = (self.layout.images / rec.image).read_bytes()
        saved = load_corrections(self.layout, line_id) or CorrectionSet(line_id=line_id)
        return schemas.LineDetail(
            line_id=line_id,
            width=rec.raster.width,
            height=rec.raster.height,
            image_png_base64=base64.b64encode(png).decode("ascii"),
            cuts=[schemas.CutOut(start_col=c.start_col, end_col=c.end_col, kind=c.kind) for c in rec.cuts],
            occurrences=[
                schemas.OccurrenceOut(
                    index=o.index_in_line,
                    box=o.box,
                    class_id=self.state.assignment.get((line_id, o.index_in_line)),
                )
                for o in rec.occurrences
            ],
            corrections=schemas.CorrectionsOut(
                forced_cuts=saved.forced_cuts,
                forbidden_cuts=saved.forbidden_cuts,
                box_overrides=saved.box_overrides,
            ),
        )

    def inventory_out(self, mirror_suggestions: bool = False) -> schemas.InventoryOut:
        classes = self.state.classes
        suggestions = None
        if mirror_suggestions:
            params = ClassifierParams(
                similarity_threshold=self.state.classifier_params.similarity_threshold,
                normalize_side=self.state.classifier_params.normalize_side,
                mirror_detection_enabled=True,
            )
            preview = [
                type(c)(class_id=c.class_id, exemplar=c.exemplar, member_refs=list(c.member_refs))
                for c in classes
            ]
            suggestions = detect_mirror_pairs(preview, params)
        return schemas.InventoryOut(
            classes=[
                schemas.ClassOut(
                    class_id=c.class_id,
                    placeholder=c.placeholder,
                    exemplar_side=c.exemplar.side,
                    exemplar_rle=grid_to_rle(c.exemplar),
                    member_refs=list(c.member_refs),
                    mirror_of=c.mirror_of,
                )
                for c in classes
            ],
            class_count=len(classes),
            mirror_suggestions=suggestions,
        )

    # -- mutations --------------------------------------------------------

    def submit_corrections(self, body: schemas.CorrectionsIn) -> schemas.CorrectionsAck:
        with self.lock:
            if body.line_id not in self.state.lines:
                raise ValidationError("unknown-line", f"no line {body.line_id!r} in this project")
            rec = self.state.lines[body.line_id]
            image_path = self.layout.images / rec.image
            corrections = CorrectionSet(
                line_id=body.line_id,
                forced_cuts=list(body.forced_cuts),
                forbidden_cuts=list(body.forbidden_cuts),
                box_overrides=[(i, tuple(b)) for i, b in body.box_overrides],
                raster_sha256=image_sha256(image_path),
            )
            # validate by replaying against the live raster before accepting
            stored = load_segment_record(self.layout, body.line_id)
            replayed = segment_image(
                self.layout, image_path, stored.params, stored.binarize_method, stored.inverted, corrections
            )
            append_edit_log(self.layout, body.line_id, {"kind": "corrections", "corrections": corrections.to_dict()})
            atomic_write_json(self.layout.correction_path(body.line_id), corrections.to_dict())
            self.state = self._replay()
            return schemas.CorrectionsAck(line_id=body.line_id, occurrence_count=len(replayed.occurrences))

    def _class_refs(self, class_id: int) -> list:
        for c in self.state.classes:
            if c.class_id == class_id:
                return list(c.member_refs)
        raise ValidationError("unknown-class", f"no class {class_id}")

    def _append_action(self, action: ClassAction) -> schemas.ActionAck:
        actions = load_class_actions(self.layout)
        actions.append(action)
        # validate by replaying before persisting
        from .classifier import apply_class_actions

        apply_class_actions(
            self.state.classes, self.state.assignment, [action], self.state.grids, self.state.corpus_order
        )
        append_edit_log(self.layout, "classes", {"kind": "class_action", "action": action.to_dict()})
        save_class_actions(self.layout, actions)
        self.state = self._replay()
        return schemas.ActionAck(class_count=len(self.state.classes))

    def merge_classes(self, body: schemas.MergeIn) -> schemas.ActionAck:
        with self.lock:
            refs = tuple(self._class_refs(cid)[0] for cid in body.class_ids)
            return self._append_action(ClassAction(op="merge", refs=refs))

    def split_class(self, body: schemas.SplitIn) -> schemas.ActionAck:
        with self.lock:
            members = set(map(tuple, self._class_refs(body.class_id)))
            refs = tuple((str(a), int(b)) for a, b in body.member_refs)
            if not set(refs) <= members:
                raise ValidationError("bad-action", "split refs must belong to the named class")
            return self._append_action(ClassAction(op="split", refs=refs))

    def mirror_classes(self, body: schemas.MirrorIn) -> schemas.ActionAck:
        with self.lock:
            ref_a = tuple(self._class_refs(body.class_a)[0])
            ref_b = tuple(self._class_refs(body.class_b)[0])
            return self._append_action(ClassAction(op="mirror", refs=(ref_a, ref_b), value=body.value))

    def rebuild(self) -> schemas.RebuildOut:
        with self.lock:
            state, result = apply_review(self.layout)
            self.state = state
            return schemas.RebuildOut(
                lines=[
                    schemas.LineCountChange(line_id=lid, old_count=old, new_count=new)
                    for lid, old, new in result.line_counts
                ],
                class_count=result.class_count,
            )


def _http_422(exc: ValidationError) -> HTTPException:
    return HTTPException(status_code=422, detail={"reason": exc.reason, "message": exc.message})


def create_app(project_root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    session = ReviewSession(project_root)
    app = FastAPI(title="glyphforge review", version="0.1.0")
    app.state.session = session

    @app.get("/api/lines", response_model=list[schemas.LineSummary])
    def get_lines():
        return session.line_summaries()

    @app.get("/api/lines/{line_id}", response_model=schemas.LineDetail)
    def get_line(line_id: str):
        try:
            return session.line_detail(line_id)
        except ValidationError as exc:
            raise _http_422(exc)

    @app.post("/api/corrections", response_model=schemas.CorrectionsAck)
    def post_corrections(body: schemas.CorrectionsIn):
        try:
            return session.submit_corrections(body)
        except ValidationError as exc:
            raise _http_422(exc)

    @app.get("/api/inventory", response_model=schemas.InventoryOut)
    def get_inventory(mirror_suggestions: bool = False):
        return session.inventory_out(mirror_suggestions=mirror_suggestions)

    @app.post("/api/classes/merge", response_model=schemas.ActionAck)
    def post_merge(body: schemas.MergeIn):
        try:
            return session.merge_classes(body)
        except ValidationError as exc:
            raise _http_422(exc)

    @app.post("/api/classes/split", response_model=schemas.ActionAck)
    def post_split(body: schemas.SplitIn):
        try:
            return session.split_class(body)
        except ValidationError as exc:
            raise _http_422(exc)

    @app.post("/api/classes/mirror", response_model=schemas.ActionAck)
    def post_mirror(body: schemas.MirrorIn):
        try:
            return session.mirror_classes(body)
        except ValidationError as exc:
            raise _http_422(exc)

    @app.post("/api/rebuild", response_model=schemas.RebuildOut)
    def post_rebuild():
        try:
            return session.rebuild()
        except ValidationError as exc:
            raise _http_422(exc)

    ui = Path(ui_dir) if ui_dir is not None else _default_ui_dir()
    if ui is not None and ui.is_dir():
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return FALLBACK_PAGE

    return app


def _default_ui_dir() -> Path | None:
    import os

    env = os.environ.get("GLYPHFORGE_UI_DIR")
    if env:
        return Path(env)
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def serve(project_root: str | Path, bind: str = "127.0.0.1:8000") -> None:
    """Run the review service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(project_root)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")

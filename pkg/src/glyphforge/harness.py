"""Runs prompt bundles against model backends and scores the responses.

Scoring per question kind: match -> pairing accuracy (missing entries
count as wrong), multiple_choice and free -> exact match, transliterate
and translate -> normalized Levenshtein similarity. Omitted or
unparseable answers score 0; no record is ever dropped. Aggregation is a
pure fold over records and is invariant to record order.
"""
from __future__ import annotations

import hashlib
import json
import random
import re
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import TokenClass
from .dataset import DescriptionTable, PromptBundle, BundleMetadata, _key_from_json, _key_to_json
from .errors import BackendError, ValidationError
from .ioutil import atomic_write_text
from .modelclient import Backend, MockBackend, ModelRequest, send_with_retries
from .sheet import SheetLayout, render_token_sheet_png

TRANSLITERATION_METRIC = "normalized_levenshtein"


# --- description pairing -----------------------------------------------------


@dataclass
class PairingTask:
    sheet_png: bytes
    items: list[tuple[str, str]]  # (letter label, description) in presented order
    key: dict[int, str]  # class_id -> letter
    seed: int


def make_pairing_task(
    classes: list[TokenClass],
    table: DescriptionTable,
    seed: int,
    layout: SheetLayout = SheetLayout(),
) -> PairingTask:
    """Shuffle the complete description table and record the ground truth."""
    if not table.is_complete():
        raise ValidationError("incomplete-table", "pairing needs a complete description table")
    if len(table.rows) < 2:
        raise ValidationError("too-few-rows", "pairing needs at least 2 descriptions")
    if len(table.rows) > 26:
        raise ValidationError("too-many-rows", "pairing labels are single letters; at most 26 rows")
    rows = list(table.rows)
    random.Random(seed).shuffle(rows)
    letters = string.ascii_uppercase
    items = [(letters[i], r.description_text) for i, r in enumerate(rows)]
    key = {r.class_id: letters[i] for i, r in enumerate(rows)}
    return PairingTask(sheet_png=render_token_sheet_png(classes, layout), items=items, key=key, seed=seed)


PAIRING_TEMPLATE = """The attached image shows every token glyph with its placeholder labeled beneath it.
Match each token to the description that fits it best.

Descriptions:
{items}

Answer with one line per token, formatted exactly as "token_i: LETTER".
"""


def pairing_bundle(task: PairingTask, puzzle_id: str = "description-pairing") -> PromptBundle:
    """Wrap a pairing task as a picture-condition bundle so it runs and
    scores through the same path as every other prompt."""
    items = "\n".join(f"{label}. {text}" for label, text in task.items)
    text = PAIRING_TEMPLATE.format(items=items)
    digest = hashlib.sha256(text.encode("utf-8") + task.sheet_png).hexdigest()
    return PromptBundle(
        condition="picture",
        text=text,
        attachments=[("token_sheet.png", task.sheet_png)],
        answer_keys=[dict(task.key)],
        question_kinds=["match"],
        metadata=BundleMetadata(puzzle_id=puzzle_id, seed=task.seed, build_hash=digest),
    )


# --- scoring ------------------------------------------------------------------


@dataclass(frozen=True)
class PairingScore:
    accuracy: float
    correct: int
    total: int

    def as_count(self) -> str:
        return f"{self.correct}/{self.total}"


def score_pairing(parsed: dict[int, str] | None, key: dict[int, str]) -> PairingScore:
    """Fraction of key entries answered correctly; missing entries are wrong."""
    total = len(key)
    if total == 0:
        raise ValidationError("empty-key", "pairing key must be non-empty")
    parsed = parsed or {}
    correct = sum(1 for cid, letter in key.items() if str(parsed.get(cid, "")).upper() == letter.upper())
    return PairingScore(accuracy=correct / total, correct=correct, total=total)


def levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[len(b)]


def _norm_text(s: str) -> str:
    return " ".join(s.lower().split())


def score_transliteration(pred: str, gold: str) -> float:
    """1 - levenshtein / max length over lowercased, whitespace-collapsed text."""
    g = _norm_text(gold)
    if not g:
        raise ValidationError("empty-gold", "gold transliteration must be non-empty")
    p = _norm_text(pred)
    return 1.0 - levenshtein(p, g) / max(len(p), len(g))


EXACT_NORMALIZERS = ("strict", "case_fold", "alnum_only")


def score_exact(pred: str, gold: str, normalizer: str = "strict") -> int:
    if normalizer == "strict":
        return int(pred == gold)
    if normalizer == "case_fold":
        return int(pred.casefold() == gold.casefold())
    if normalizer == "alnum_only":
        keep = lambda s: "".join(c for c in s.casefold() if c.isalnum())
        return int(keep(pred) == keep(gold))
    raise ValidationError("bad-normalizer", f"unknown normalizer {normalizer!r}")


# --- answer parsing -------------------------------------------------------------


@dataclass(frozen=True)
class ParsedAnswer:
    kind: str
    value: str | dict[int, str] | None
    ok: bool


ANSWER_LINE_RE = re.compile(r"^\s*answer\s*:\s*(.*\S)\s*$", re.IGNORECASE)
PAIR_LINE_RE = re.compile(r"<?\s*token[_\s]?(\d+)\s*>?\s*(?:[:=→-]|->)+\s*([A-Za-z])\b")
CHOICE_RE = re.compile(r"\b([A-Z])\b")


def parse_answers(raw: str, kind: str) -> ParsedAnswer:
    """Extract the final answer from a free-form response.

    Total function: anything unextractable is returned unparseable and
    will score 0, never dropped.
    """
    answer_lines = [m.group(1) for line in raw.splitlines() if (m := ANSWER_LINE_RE.match(line))]
    final = answer_lines[-1] if answer_lines else None

    if kind == "match":
        pairs = {int(m.group(1)): m.group(2).upper() for m in PAIR_LINE_RE.finditer(raw)}
        return ParsedAnswer(kind, pairs, ok=bool(pairs))
    if kind == "multiple_choice":
        scope = final if final is not None else raw
        letters = CHOICE_RE.findall(scope)
        if not letters:
            return ParsedAnswer(kind, None, ok=False)
        return ParsedAnswer(kind, letters[-1], ok=True)
    # text kinds: transliterate, translate, free
    if final is not None:
        return ParsedAnswer(kind, final, ok=True)
    lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    if not lines:
        return ParsedAnswer(kind, None, ok=False)
    return ParsedAnswer(kind, lines[-1], ok=True)


def score_question(kind: str, parsed: ParsedAnswer, key: str | dict[int, str]) -> tuple[float, int | None, int | None]:
    """(score, correct, total); the count pair is set for match questions."""
    if kind == "match":
        if not isinstance(key, dict):
            raise ValidationError("bad-key", "match questions need a class_id -> letter key")
        ps = score_pairing(parsed.value if isinstance(parsed.value, dict) else {}, key)
        return ps.accuracy, ps.correct, ps.total
    value = parsed.value if isinstance(parsed.value, str) else ""
    if kind in ("transliterate", "translate"):
        return (max(0.0, score_transliteration(value, str(key))) if value else 0.0), None, None
    if kind in ("multiple_choice", "free"):
        return float(score_exact(value, str(key), "case_fold")), None, None
    raise ValidationError("bad-question", f"unknown question kind {kind!r}")


# --- evaluation records -----------------------------------------------------------


@dataclass
class QuestionResult:
    index: int
    kind: str
    parsed: str | dict[int, str] | None
    parse_ok: bool
    score: float
    correct: int | None = None
    total: int | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "parsed": _key_to_json(self.parsed) if self.parsed is not None else None,
            "parse_ok": self.parse_ok,
            "score": self.score,
            "correct": self.correct,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionResult":
        parsed = d["parsed"]
        if isinstance(parsed, dict):
            parsed = _key_from_json(parsed)
        return cls(
            index=int(d["index"]),
            kind=d["kind"],
            parsed=parsed,
            parse_ok=bool(d["parse_ok"]),
            score=float(d["score"]),
            correct=d.get("correct"),
            total=d.get("total"),
        )


@dataclass
class EvalRecord:
    puzzle_id: str
    condition: str
    model_id: str
    prompt_sha256: str
    raw_response: str  # preserved verbatim
    questions: list[QuestionResult]
    failed: bool = False
    error: str | None = None
    usage: dict = field(default_factory=dict)
    latency_s: float = 0.0
    started_at: float = 0.0
    finished_at: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "condition": self.condition,
            "model_id": self.model_id,
            "prompt_sha256": self.prompt_sha256,
            "raw_response": self.raw_response,
            "questions": [q.to_dict() for q in self.questions],
            "failed": self.failed,
            "error": self.error,
            "usage": self.usage,
            "latency_s": self.latency_s,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(
            puzzle_id=d["puzzle_id"],
            condition=d["condition"],
            model_id=d["model_id"],
            prompt_sha256=d["prompt_sha256"],
            raw_response=d["raw_response"],
            questions=[QuestionResult.from_dict(q) for q in d["questions"]],
            failed=bool(d.get("failed", False)),
            error=d.get("error"),
            usage=dict(d.get("usage", {})),
            latency_s=float(d.get("latency_s", 0.0)),
            started_at=float(d.get("started_at", 0.0)),
            finished_at=float(d.get("finished_at", 0.0)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class RunConfig:
    backend: str = "mock"
    concurrency: int = 1
    retries: int = 3
    backoff_s: float = 0.25
    timeout_s: float = 60.0
    seed: int = 0


def _prompt_hash(bundle: PromptBundle) -> str:
    h = hashlib.sha256(bundle.text.encode("utf-8"))
    for _, data in bundle.attachments:
        h.update(data)
    return h.hexdigest()


def run_condition(bundle: PromptBundle, client: Backend, cfg: RunConfig = RunConfig()) -> EvalRecord:
    """Send one bundle, parse, and score. Transport failure after retries
    yields a failed record with zero scores, never a dropped one."""
    deterministic = getattr(client, "deterministic", False)
    req = ModelRequest(
        prompt=bundle.text,
        attachments=tuple(bundle.attachments),
        model_id=getattr(client, "model_id", ""),
    )
    started = 0.0 if deterministic else time.time()
    raw = ""
    usage: dict = {}
    latency = 0.0
    failed = False
    error = None
    try:
        resp = send_with_retries(client, req, retries=cfg.retries, backoff_s=cfg.backoff_s)
        raw = resp.text
        usage = resp.usage
        latency = 0.0 if deterministic else resp.latency_s
    except BackendError as exc:
        failed = True
        error = f"{exc.reason}: {exc.message}"
    finished = 0.0 if deterministic else time.time()

    questions = []
    for i, (kind, key) in enumerate(zip(bundle.question_kinds, bundle.answer_keys)):
        if failed:
            parsed = ParsedAnswer(kind, None, ok=False)
        else:
            parsed = parse_answers(raw, kind)
        if parsed.ok:
            score, correct, total = score_question(kind, parsed, key)
        else:
            score = 0.0
            correct, total = (0, len(key)) if kind == "match" and isinstance(key, dict) else (None, None)
        questions.append(
            QuestionResult(index=i, kind=kind, parsed=parsed.value, parse_ok=parsed.ok, score=score, correct=correct, total=total)
        )
    return EvalRecord(
        puzzle_id=bundle.metadata.puzzle_id,
        condition=bundle.condition,
        model_id=getattr(client, "model_id", ""),
        prompt_sha256=_prompt_hash(bundle),
        raw_response=raw,
        questions=questions,
        failed=failed,
        error=error,
        usage=usage,
        latency_s=latency,
        started_at=started,
        finished_at=finished,
        seed=cfg.seed,
    )


def run_bundles(bundles: list[PromptBundle], client: Backend, cfg: RunConfig = RunConfig()) -> list[EvalRecord]:
    """Fan out over bundles with a concurrency cap; output order is the
    bundle order regardless of completion order."""
    clients = [_bind_mock(bundle, client, cfg) for bundle in bundles]
    if cfg.concurrency <= 1 or len(bundles) <= 1:
        return [run_condition(b, c, cfg) for b, c in zip(bundles, clients)]
    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        futures = [pool.submit(run_condition, b, c, cfg) for b, c in zip(bundles, clients)]
        return [f.result() for f in futures]


def _bind_mock(bundle: PromptBundle, client: Backend, cfg: RunConfig) -> Backend:
    if isinstance(client, MockBackend) and client.mode in ("oracle", "accuracy"):
        accuracy = 1.0 if client.mode == "oracle" else client.accuracy
        return client.bind(scripted_response(bundle, accuracy=accuracy, seed=cfg.seed))
    return client


def scripted_response(bundle: PromptBundle, accuracy: float = 1.0, seed: int = 0) -> str:
    """Response text a scripted model would produce for this bundle.

    With accuracy < 1, exactly round(accuracy * n) answers are correct per
    match question (and per question list), chosen by a seeded RNG keyed
    to the bundle so reruns are byte-identical.
    """
    token = f"{seed}:{bundle.metadata.puzzle_id}:{bundle.condition}"
    rng = random.Random(int.from_bytes(hashlib.sha256(token.encode()).digest()[:8], "big"))
    lines: list[str] = []
    for kind, key in zip(bundle.question_kinds, bundle.answer_keys):
        if kind == "match":
            assert isinstance(key, dict)
            ids = sorted(key)
            n_correct = round(accuracy * len(ids))
            correct_ids = set(rng.sample(ids, n_correct))
            letters = sorted({v.upper() for v in key.values()})
            for cid in ids:
                if cid in correct_ids:
                    lines.append(f"token_{cid}: {key[cid]}")
                else:
                    wrong = letters[(letters.index(key[cid].upper()) + 1) % len(letters)]
                    lines.append(f"token_{cid}: {wrong}")
        else:
            gold = str(key)
            if rng.random() < accuracy:
                lines.append(f"ANSWER: {gold}")
            else:
                lines.append(f"ANSWER: __wrong_{rng.randrange(1000)}__{gold[::-1]}")
    return "\n".join(lines)


# --- records I/O ------------------------------------------------------------------


def write_records(path: str | Path, records: list[EvalRecord]) -> None:
    text = "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in records)
    atomic_write_text(path, text)


def read_records(path: str | Path) -> list[EvalRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(EvalRecord.from_dict(json.loads(line)))
    return out


# --- reporting --------------------------------------------------------------------


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(sorted(values)) / len(values)


def _group_stats(records: list[EvalRecord]) -> dict:
    pairing: list[float] = []
    exact: list[float] = []
    translit: list[float] = []
    per_seed: dict[str, list[float]] = {}
    correct = 0
    total = 0
    n_questions = 0
    n_failed = 0
    for r in sorted(records, key=lambda r: (r.puzzle_id, r.condition, r.model_id, r.prompt_sha256, r.seed)):
        if r.failed:
            n_failed += 1
        for q in r.questions:
            n_questions += 1
            if q.kind == "match":
                pairing.append(q.score)
                correct += q.correct or 0
                total += q.total or 0
                per_seed.setdefault(str(r.seed), []).append(q.score)
            elif q.kind in ("multiple_choice", "free"):
                exact.append(q.score)
            else:
                translit.append(q.score)
    stats = {
        "records": len(records),
        "questions": n_questions,
        "failed_records": n_failed,
        "pairing_accuracy": _mean(pairing),
        "pairing_counts": f"{correct}/{total}" if total else None,
        "exact_match_rate": _mean(exact),
        "transliteration_similarity": _mean(translit),
    }
    if per_seed:
        stats["pairing_by_seed"] = {s: sorted(v) for s, v in sorted(per_seed.items())}
    return stats


@dataclass
class Report:
    overall: dict
    by_model: dict[str, dict]
    by_condition: dict[str, dict]
    by_puzzle: dict[str, dict]
    by_model_condition: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "metrics": {"transliteration": TRANSLITERATION_METRIC, "pairing": "fixed_point_fraction"},
            "overall": self.overall,
            "by_model": self.by_model,
            "by_condition": self.by_condition,
            "by_puzzle": self.by_puzzle,
            "by_model_condition": self.by_model_condition,
        }

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n")

    def render_table(self) -> str:
        if not self.overall["records"]:
            return "no records\n"
        headers = ["group", "pairing", "counts", "exact", "translit", "records", "failed"]
        rows = [headers]
        for name, stats in [("overall", self.overall)] + [
            (k, v) for k, v in sorted(self.by_model_condition.items())
        ]:
            rows.append(
                [
                    name,
                    _pct(stats["pairing_accuracy"]),
                    stats["pairing_counts"] or "-",
                    _pct(stats["exact_match_rate"]),
                    _pct(stats["transliteration_similarity"]),
                    str(stats["records"]),
                    str(stats["failed_records"]),
                ]
            )
        widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
        lines = []
        for i, r in enumerate(rows):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _pct(v: float | None) -> str:
    return "-" if v is None else f"{100.0 * v:.1f}%"


def aggregate_report(records: list[EvalRecord]) -> Report:
    """Pure fold over records; failed records stay in every denominator."""

    def groups(keyfn) -> dict[str, dict]:
        buckets: dict[str, list[EvalRecord]] = {}
        for r in records:
            buckets.setdefault(keyfn(r), []).append(r)
        return {k: _group_stats(v) for k, v in sorted(buckets.items())}

    return Report(
        overall=_group_stats(records),
        by_model=groups(lambda r: r.model_id),
        by_condition=groups(lambda r: r.condition),
        by_puzzle=groups(lambda r: r.puzzle_id),
        by_model_condition=groups(lambda r: f"{r.model_id}/{r.condition}"),
    )

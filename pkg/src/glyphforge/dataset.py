"""Puzzle documents and the three derived artifacts: placeholder text,
token sheets, and description tables, assembled into per-condition
prompt bundles.

Prompt templates are plain text with {{slot}} markers ({{script}},
{{glosses}}, {{questions}}, {{description_table}}, {{language}}) so
per-model tailoring needs no code change. Answer keys are never
substituted into prompt text.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import Ref, TokenClass
from .errors import ValidationError
from .ioutil import atomic_write_bytes, atomic_write_text
from .sheet import SheetLayout, render_token_sheet_png

MAX_DESCRIPTION_WORDS = 35

CONDITIONS = ("picture", "description", "placeholder_only", "unicode")

QUESTION_KINDS = ("match", "multiple_choice", "transliterate", "translate", "free")

PLACEHOLDER_RE = re.compile(r"<token_(\d+)>")


def placeholder(class_id: int) -> str:
    return f"<token_{class_id}>"


@dataclass(frozen=True)
class Question:
    kind: str
    prompt_text: str
    answer_key: str | dict[int, str]

    def __post_init__(self):
        if self.kind not in QUESTION_KINDS:
            raise ValidationError("bad-question", f"unknown question kind {self.kind!r}")
        if self.answer_key is None or self.answer_key == "":
            raise ValidationError("bad-question", "answer_key is required for every question")


@dataclass(frozen=True)
class Gloss:
    line_ids: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class ScriptLine:
    line_id: str
    refs: tuple[int, ...]  # occurrence ordinals within the line, reading order


@dataclass
class PuzzleDocument:
    puzzle_id: str
    language_name: str
    script_lines: list[ScriptLine] = field(default_factory=list)
    glosses: list[Gloss] = field(default_factory=list)
    questions: list[Question] = field(default_factory=list)
    unicode_text: list[str] | None = None  # one entry per script line
    writing_direction_hint: str | None = None  # withheld from prompts by default

    def __post_init__(self):
        if self.unicode_text is not None and len(self.unicode_text) != len(self.script_lines):
            raise ValidationError("bad-unicode-text", "unicode_text needs one entry per script line")

    def to_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "language_name": self.language_name,
            "script_lines": [{"line_id": sl.line_id, "refs": list(sl.refs)} for sl in self.script_lines],
            "glosses": [{"line_ids": list(g.line_ids), "text": g.text} for g in self.glosses],
            "questions": [
                {"kind": q.kind, "prompt_text": q.prompt_text, "answer_key": _key_to_json(q.answer_key)}
                for q in self.questions
            ],
            "unicode_text": self.unicode_text,
            "writing_direction_hint": self.writing_direction_hint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PuzzleDocument":
        return cls(
            puzzle_id=d["puzzle_id"],
            language_name=d["language_name"],
            script_lines=[ScriptLine(e["line_id"], tuple(int(r) for r in e["refs"])) for e in d["script_lines"]],
            glosses=[Gloss(tuple(e["line_ids"]), e["text"]) for e in d.get("glosses", [])],
            questions=[
                Question(e["kind"], e["prompt_text"], _key_from_json(e["answer_key"]))
                for e in d.get("questions", [])
            ],
            unicode_text=d.get("unicode_text"),
            writing_direction_hint=d.get("writing_direction_hint"),
        )

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PuzzleDocument":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _key_to_json(key: str | dict[int, str]):
    if isinstance(key, dict):
        return {str(k): v for k, v in key.items()}
    return key


def _key_from_json(key):
    if isinstance(key, dict):
        return {int(k): str(v) for k, v in key.items()}
    return str(key)


# --- placeholder text -------------------------------------------------------


def encode_placeholders(doc: PuzzleDocument, assignment: dict[Ref, int]) -> list[tuple[str, str]]:
    """Encode each script line as space-separated placeholders, doc order."""
    out: list[tuple[str, str]] = []
    for sl in doc.script_lines:
        ids = []
        for idx in sl.refs:
            ref = (sl.line_id, idx)
            if ref not in assignment:
                raise ValidationError("unresolved-ref", f"occurrence {ref} has no token class")
            ids.append(assignment[ref])
        out.append((sl.line_id, " ".join(placeholder(i) for i in ids)))
    return out


def decode_placeholders(text: str) -> list[int]:
    """Inverse of a single encoded line: placeholder string -> class ids."""
    ids: list[int] = []
    for tok in text.split():
        m = PLACEHOLDER_RE.fullmatch(tok)
        if not m:
            raise ValidationError("bad-placeholder", f"not a placeholder token: {tok!r}")
        ids.append(int(m.group(1)))
    return ids


# --- description table ------------------------------------------------------


@dataclass
class DescriptionRow:
    class_id: int
    description_text: str

    @property
    def word_count(self) -> int:
        return len(self.description_text.split())


@dataclass
class DescriptionTable:
    rows: list[DescriptionRow] = field(default_factory=list)

    def row_for(self, class_id: int) -> DescriptionRow:
        for r in self.rows:
            if r.class_id == class_id:
                return r
        raise ValidationError("unknown-class", f"no description row for class {class_id}")

    def is_complete(self) -> bool:
        return bool(self.rows) and not validate_table(self)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"class_id": r.class_id, "description_text": r.description_text, "word_count": r.word_count}
                for r in self.rows
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DescriptionTable":
        return cls(rows=[DescriptionRow(int(e["class_id"]), e["description_text"]) for e in d["rows"]])

    def save_json(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "DescriptionTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_id", "description"])
            for r in self.rows:
                writer.writerow([r.class_id, r.description_text])

    @classmethod
    def load_csv(cls, path: str | Path) -> "DescriptionTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:2] != ["class_id", "description"]:
                raise ValidationError("bad-table", "expected a class_id,description CSV header")
            return cls(rows=[DescriptionRow(int(row[0]), row[1]) for row in reader])


@dataclass(frozen=True)
class DescriptionCheck:
    word_count: int
    violations: tuple[str, ...]  # "empty" and/or "too_long"

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_description(text: str) -> DescriptionCheck:
    """Whitespace-delimited word count; empty or > 35 words is a violation."""
    count = len(text.split())
    violations = []
    if count == 0:
        violations.append("empty")
    elif count > MAX_DESCRIPTION_WORDS:
        violations.append("too_long")
    return DescriptionCheck(word_count=count, violations=tuple(violations))


def validate_table(table: DescriptionTable) -> list[tuple[int, str]]:
    """All (class_id, violation) pairs across the table."""
    out = []
    for r in table.rows:
        for v in validate_description(r.description_text).violations:
            out.append((r.class_id, v))
    return out


def scaffold_description_table(classes: list[TokenClass]) -> DescriptionTable:
    """One empty row per class, ready for human or model completion."""
    return DescriptionTable(rows=[DescriptionRow(c.class_id, "") for c in sorted(classes, key=lambda c: c.class_id)])


# --- prompt bundles ---------------------------------------------------------

DEFAULT_TEMPLATE = """You are solving a linguistic puzzle about the {{language}} writing system.
Each symbol of the script has been replaced by a placeholder written <token_i>;
identical placeholders are identical symbols.

Script:
{{script}}

Known translations:
{{glosses}}
{{description_table}}
Questions:
{{questions}}
"""

MATCH_FORMAT_NOTE = 'Answer with one line per token, formatted exactly as "token_i: LETTER".'
CHOICE_FORMAT_NOTE = 'Finish with a line formatted exactly as "ANSWER: <letter>".'
TEXT_FORMAT_NOTE = 'Finish with a line formatted exactly as "ANSWER: <your answer>".'

_FORMAT_NOTES = {
    "match": MATCH_FORMAT_NOTE,
    "multiple_choice": CHOICE_FORMAT_NOTE,
    "transliterate": TEXT_FORMAT_NOTE,
    "translate": TEXT_FORMAT_NOTE,
    "free": TEXT_FORMAT_NOTE,
}


@dataclass(frozen=True)
class BundleMetadata:
    puzzle_id: str
    seed: int
    build_hash: str
    model_hint: str | None = None


@dataclass
class PromptBundle:
    condition: str
    text: str
    attachments: list[tuple[str, bytes]]  # (name, PNG bytes)
    answer_keys: list[str | dict[int, str]]
    question_kinds: list[str]
    metadata: BundleMetadata

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValidationError("bad-condition", f"unknown condition {self.condition!r}")
        if self.condition == "picture" and len(self.attachments) != 1:
            raise ValidationError("bad-bundle", "picture condition needs exactly one token-sheet attachment")
        if self.condition != "picture" and self.attachments:
            raise ValidationError("bad-bundle", f"{self.condition} condition must not carry attachments")


def _render_script(doc: PuzzleDocument, assignment: dict[Ref, int], condition: str) -> str:
    if condition == "unicode":
        if doc.unicode_text is None:
            raise ValidationError("missing-unicode-text", "unicode condition requires unicode_text on the puzzle")
        lines = doc.unicode_text
    else:
        lines = [text for _, text in encode_placeholders(doc, assignment)]
    return "\n".join(f"({i + 1}) {line}" for i, line in enumerate(lines))


def _render_glosses(doc: PuzzleDocument) -> str:
    if not doc.glosses:
        return "(none given)"
    numbered = {sl.line_id: i + 1 for i, sl in enumerate(doc.script_lines)}
    parts = []
    for g in doc.glosses:
        ref = ", ".join(f"({numbered.get(lid, '?')})" for lid in g.line_ids)
        parts.append(f"{ref} = {g.text}")
    return "\n".join(parts)


def _render_questions(doc: PuzzleDocument) -> str:
    parts = []
    for i, q in enumerate(doc.questions):
        parts.append(f"Q{i + 1} [{q.kind}]: {q.prompt_text}\n{_FORMAT_NOTES[q.kind]}")
    return "\n\n".join(parts)


def _render_table(table: DescriptionTable) -> str:
    lines = ["Token descriptions:"]
    for r in table.rows:
        lines.append(f"{placeholder(r.class_id)}: {r.description_text}")
    return "\n".join(lines) + "\n"


def build_hash(parts: list) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(json.dumps(part, sort_keys=True, ensure_ascii=False, default=str).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def build_prompt_bundle(
    doc: PuzzleDocument,
    classes: list[TokenClass],
    assignment: dict[Ref, int],
    condition: str,
    table: DescriptionTable | None = None,
    template: str | None = None,
    seed: int = 0,
    layout: SheetLayout = SheetLayout(),
) -> PromptBundle:
    """Assemble the prompt for one input condition.

    picture: attaches the token sheet. description: embeds the complete
    table. unicode: requires unicode_text. placeholder_only: text only.
    """
    if condition not in CONDITIONS:
        raise ValidationError("bad-condition", f"unknown condition {condition!r}")
    template = template if template is not None else DEFAULT_TEMPLATE

    table_block = ""
    if condition == "description":
        if table is None or not table.is_complete():
            raise ValidationError("incomplete-table", "description condition requires a complete description table")
        table_block = "\n" + _render_table(table)

    attachments: list[tuple[str, bytes]] = []
    preamble = ""
    if condition == "picture":
        attachments.append(("token_sheet.png", render_token_sheet_png(classes, layout)))
        preamble = "The attached image shows every token glyph with its placeholder labeled beneath it.\n\n"

    text = template
    for slot, value in (
        ("language", doc.language_name),
        ("script", _render_script(doc, assignment, condition)),
        ("glosses", _render_glosses(doc)),
        ("questions", _render_questions(doc)),
        ("description_table", table_block),
    ):
        text = text.replace("{{" + slot + "}}", value)
    text = preamble + text

    digest = build_hash(
        [
            doc.to_dict(),
            {"condition": condition, "seed": seed, "template": template},
            {"classes": [(c.class_id, c.member_refs) for c in classes]},
            table.to_dict() if table is not None else None,
        ]
        + [data for _, data in attachments]
    )
    return PromptBundle(
        condition=condition,
        text=text,
        attachments=attachments,
        answer_keys=[q.answer_key for q in doc.questions],
        question_kinds=[q.kind for q in doc.questions],
        metadata=BundleMetadata(puzzle_id=doc.puzzle_id, seed=seed, build_hash=digest),
    )


# --- bundle persistence ------------------------------------------------------


def save_bundle(bundle: PromptBundle, path: str | Path) -> list[Path]:
    """Write bundle JSON plus attachment PNGs next to it, atomically.
    Attachment paths inside the JSON are relative for reproducible trees."""
    path = Path(path)
    written = [path]
    att_entries = []
    for name, data in bundle.attachments:
        att_path = path.with_name(f"{path.stem}.{name}")
        atomic_write_bytes(att_path, data)
        written.append(att_path)
        att_entries.append({"name": name, "path": att_path.name, "sha256": hashlib.sha256(data).hexdigest()})
    doc = {
        "condition": bundle.condition,
        "text": bundle.text,
        "attachments": att_entries,
        "answer_keys": [_key_to_json(k) for k in bundle.answer_keys],
        "question_kinds": bundle.question_kinds,
        "metadata": {
            "puzzle_id": bundle.metadata.puzzle_id,
            "seed": bundle.metadata.seed,
            "build_hash": bundle.metadata.build_hash,
        },
    }
    atomic_write_text(path, json.dumps(doc, ensure_ascii=False, indent=2) + "\n")
    return written


def load_bundle(path: str | Path) -> PromptBundle:
    path = Path(path)
    d = json.loads(path.read_text(encoding="utf-8"))
    attachments = []
    for e in d["attachments"]:
        data = (path.parent / e["path"]).read_bytes()
        if hashlib.sha256(data).hexdigest() != e["sha256"]:
            raise ValidationError("stale-attachment", f"attachment {e['path']} does not match its recorded hash")
        attachments.append((e["name"], data))
    return PromptBundle(
        condition=d["condition"],
        text=d["text"],
        attachments=attachments,
        answer_keys=[_key_from_json(k) for k in d["answer_keys"]],
        question_kinds=list(d["question_kinds"]),
        metadata=BundleMetadata(
            puzzle_id=d["metadata"]["puzzle_id"],
            seed=int(d["metadata"]["seed"]),
            build_hash=d["metadata"]["build_hash"],
        ),
    )

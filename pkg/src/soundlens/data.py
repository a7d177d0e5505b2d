"""Dataset manifests and localization annotations.

Manifests are JSON Lines, one record per line; annotations are JSON with
schema {id, subjects: [{subject_id, tag, boxes: [{x, y, w, h}]}]}.
Paths inside a manifest are resolved relative to the manifest file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError

TAG_OBJECT = "object"
TAG_AMBIENT = "ambient"


@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(x=int(d["x"]), y=int(d["y"]), w=int(d["w"]), h=int(d["h"]))


@dataclass(frozen=True)
class SubjectAnnotation:
    subject_id: str
    tag: str
    boxes: tuple = ()

    def __post_init__(self):
        if self.tag not in (TAG_OBJECT, TAG_AMBIENT):
            raise InputError(f"unknown annotation tag {self.tag!r}")

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "tag": self.tag,
            "boxes": [b.to_dict() for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectAnnotation":
        return cls(
            subject_id=str(d["subject_id"]),
            tag=str(d["tag"]),
            boxes=tuple(Box.from_dict(b) for b in d.get("boxes", ())),
        )


@dataclass(frozen=True)
class SampleAnnotation:
    id: str
    subjects: tuple = ()
    true_box: Box | None = None

    def object_subjects(self) -> tuple:
        return tuple(s for s in self.subjects if s.tag == TAG_OBJECT)

    def to_dict(self) -> dict:
        d = {"id": self.id, "subjects": [s.to_dict() for s in self.subjects]}
        if self.true_box is not None:
            d["true_box"] = self.true_box.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleAnnotation":
        tb = d.get("true_box")
        return cls(
            id=str(d["id"]),
            subjects=tuple(SubjectAnnotation.from_dict(s) for s in d.get("subjects", ())),
            true_box=Box.from_dict(tb) if tb else None,
        )


def load_annotation(path) -> SampleAnnotation:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"annotation file not found: {path}")
    return SampleAnnotation.from_dict(json.loads(path.read_text()))


def save_annotation(path, ann: SampleAnnotation) -> None:
    Path(path).write_text(json.dumps(ann.to_dict()) + "\n")


def load_annotation_set(path) -> dict:
    """Load a combined annotations JSON (list of sample objects) -> {id: SampleAnnotation}."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"annotation file not found: {path}")
    raw = json.loads(path.read_text())
    if isinstance(raw, dict):
        raw = [raw]
    out = {}
    for d in raw:
        ann = SampleAnnotation.from_dict(d)
        if ann.id in out:
            raise InputError(f"duplicate annotation id {ann.id!r}")
        out[ann.id] = ann
    return out


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    frame_path: Path
    audio_path: Path
    center_time_s: float
    annotation_ref: Path | None = None
    label: str | None = None

    def to_dict(self, base: Path | None = None) -> dict:
        def rel(p):
            if base is not None:
                try:
                    return str(Path(p).relative_to(base))
                except ValueError:
                    pass
            return str(p)

        d = {
            "id": self.id,
            "frame_path": rel(self.frame_path),
            "audio_path": rel(self.audio_path),
            "center_time_s": self.center_time_s,
        }
        if self.annotation_ref is not None:
            d["annotation_ref"] = rel(self.annotation_ref)
        if self.label is not None:
            d["label"] = self.label
        return d


def load_manifest(path, check_files: bool = True) -> list:
    """Load a JSONL manifest; paths resolve relative to the manifest."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent
    records = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        rid = str(d["id"])
        if rid in seen:
            raise InputError(f"{path}:{lineno}: duplicate record id {rid!r}")
        seen.add(rid)
        rec = ManifestRecord(
            id=rid,
            frame_path=base / d["frame_path"],
            audio_path=base / d["audio_path"],
            center_time_s=float(d["center_time_s"]),
            annotation_ref=(base / d["annotation_ref"]) if d.get("annotation_ref") else None,
            label=d.get("label"),
        )
        if check_files:
            for p in (rec.frame_path, rec.audio_path, rec.annotation_ref):
                if p is not None and not p.exists():
                    raise InputError(f"{path}:{lineno}: referenced file missing: {p}")
        records.append(rec)
    return records


def save_manifest(path, records, base: Path | None = None) -> None:
    path = Path(path)
    base = base if base is not None else path.parent
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(base)) + "\n")


def strip_annotations(records, keep_ids=()) -> list:
    """Return records with annotation_ref removed except for keep_ids."""
    keep = set(keep_ids)
    out = []
    for rec in records:
        if rec.id in keep:
            out.append(rec)
        else:
            out.append(
                ManifestRecord(
                    id=rec.id,
                    frame_path=rec.frame_path,
                    audio_path=rec.audio_path,
                    center_time_s=rec.center_time_s,
                    annotation_ref=None,
                    label=rec.label,
                )
            )
    return out

"""Dataset manifest: one CSV row per image with subject, modality,
pair id, and landmark coordinates in the source image."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError
from .preprocess import Landmarks, Modality

HEADER = ["path", "subject", "modality", "pair_id", "lex", "ley", "rex", "rey", "mx", "my"]


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    subject: int
    modality: Modality
    pair_id: int
    landmarks: Landmarks


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise ManifestError(f"{path}: bad header {header}, expected {HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise ManifestError(f"{path}:{lineno}: expected {len(HEADER)} fields")
            try:
                img_path, subject, modality, pair_id = row[0], int(row[1]), row[2], int(row[3])
                coords = [float(v) for v in row[4:10]]
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            try:
                mod = Modality(modality.lower())
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: unknown modality {modality!r}") from None
            entries.append(
                ManifestEntry(
                    path=(path.parent / img_path),
                    subject=subject,
                    modality=mod,
                    pair_id=pair_id,
                    landmarks=Landmarks(
                        left_eye=(coords[0], coords[1]),
                        right_eye=(coords[2], coords[3]),
                        mouth=(coords[4], coords[5]),
                    ),
                )
            )
    return entries


def write_manifest(path, rows: list[dict]) -> None:
    """rows: dicts keyed by HEADER names; paths stored relative to the
    manifest's directory."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for row in rows:
            writer.writerow([row[k] for k in HEADER])

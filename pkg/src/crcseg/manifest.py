"""Dataset manifests and reproducible calibration/test splits.

A manifest is a UTF-8 JSONL file, one dataset example per line with a
unique id, a scores path, a mask path, and an optional photo path.
Splitting first sorts entries by id, so the outcome depends only on the
set of entries and the seed, never on file order; the shuffle itself
runs on the pinned generator from ``crcseg.rng``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .errors import DegenerateSplit, ManifestError
from .rng import Xoshiro256StarStar, fisher_yates


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset example: where its tensors live, under a unique id."""

    id: str
    scores_path: str
    mask_path: str
    image_path: str | None = None

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise ManifestError(f"entry id must be a nonempty string, got {self.id!r}")
        for name in ("scores_path", "mask_path"):
            value = getattr(self, name)
            if not value or not isinstance(value, str):
                raise ManifestError(f"{name} must be a nonempty string, got {value!r}")

    def to_dict(self) -> dict:
        data = {"id": self.id, "scores_path": self.scores_path, "mask_path": self.mask_path}
        if self.image_path is not None:
            data["image_path"] = self.image_path
        return data


@dataclass(frozen=True)
class SplitSpec:
    """Seeded split: the first ceil(cal_fraction * N) shuffled entries calibrate."""

    seed: int
    cal_fraction: float

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        fraction = float(self.cal_fraction)
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"cal_fraction must lie in (0, 1), got {fraction!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "cal_fraction", fraction)


def _check_unique(entries) -> None:
    seen = set()
    for entry in entries:
        if entry.id in seen:
            raise ManifestError(f"duplicate manifest id {entry.id!r}")
        seen.add(entry.id)


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a JSONL manifest; paths are returned verbatim."""
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ManifestError(f"{path}:{lineno}: line must hold a JSON object")
            try:
                entries.append(
                    ManifestEntry(
                        id=record["id"],
                        scores_path=record["scores_path"],
                        mask_path=record["mask_path"],
                        image_path=record.get("image_path"),
                    )
                )
            except KeyError as exc:
                raise ManifestError(f"{path}:{lineno}: missing key {exc}") from None
    _check_unique(entries)
    return entries


def write_manifest(path, entries) -> None:
    entries = list(entries)
    _check_unique(entries)
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


def resolve_paths(entries, base) -> list[ManifestEntry]:
    """Interpret relative entry paths against ``base`` (a manifest's directory)."""

    def fix(path: str | None) -> str | None:
        if path is None or os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(base, path))

    return [
        ManifestEntry(
            id=e.id,
            scores_path=fix(e.scores_path),
            mask_path=fix(e.mask_path),
            image_path=fix(e.image_path),
        )
        for e in entries
    ]


def split(entries, spec: SplitSpec) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Partition entries into (calibration, test) deterministically.

    Entries are sorted by id, shuffled by the pinned generator seeded
    with ``spec.seed``, and the first ceil(cal_fraction * N) go to
    calibration. Both sides must end up nonempty.
    """
    entries = list(entries)
    _check_unique(entries)
    n = len(entries)
    if n < 2:
        raise DegenerateSplit(f"need at least 2 entries to split, got {n}")
    ordered = sorted(entries, key=lambda e: e.id)
    shuffled = fisher_yates(ordered, Xoshiro256StarStar(spec.seed))
    n_cal = math.ceil(spec.cal_fraction * n)
    if n_cal < 1 or n_cal >= n:
        raise DegenerateSplit(
            f"cal_fraction {spec.cal_fraction:g} of {n} entries leaves an empty side"
        )
    return shuffled[:n_cal], shuffled[n_cal:]

"""Dataset builders, benchmark loading, and all on-disk formats.

Generated datasets are JSONL (UTF-8, one object per line) with a manifest
JSON alongside recording seed, quotas, and format version. Every sample's
seed is derived from the master seed and the sample's coordinates, so
samples are independent: changing one never reshuffles the others.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anomalies import CATEGORIES, AnomalyPlan, apply_plan, sample_anomaly_plan
from .detectors import estimate_period_fft
from .explain import ExplanationBundle, build_bundle
from .generator import derive_seed, generate_base, sample_base_spec, spec_to_dict
from .prompts import build_finetune_sample

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
EVAL_LENGTHS = (100, 200, 400)
INSTRUCTION_LENGTHS = (180, 360, 720)
SAMPLES_PER_TYPE = 20
NO_ANOMALY_PROB = 1 / 6
SEGMENT_WINDOW_FACTOR = 4
TOP_SEGMENT_COUNT = 100


class DatasetFormatError(Exception):
    """A dataset file does not match its declared format."""


def write_atomic(path, text: str):
    """Write text to path via a temp file and rename; never a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_jsonl(path, rows):
    text = "".join(json.dumps(r) + "\n" for r in rows)
    write_atomic(path, text)


def load_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
    return out


@dataclass(frozen=True)
class DatasetManifest:
    kind: str
    sample_count: int
    lengths: tuple[int, ...]
    master_seed: int
    format_version: int = FORMAT_VERSION
    samples_per_type: int | None = None
    categories: tuple[str, ...] = ()
    allow_no_anomaly: bool | None = None
    files: tuple[str, ...] = ()
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "format_version": self.format_version,
            "sample_count": self.sample_count,
            "lengths": list(self.lengths),
            "master_seed": self.master_seed,
            "samples_per_type": self.samples_per_type,
            "categories": list(self.categories),
            "allow_no_anomaly": self.allow_no_anomaly,
            "files": list(self.files),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            kind=d["kind"],
            sample_count=d["sample_count"],
            lengths=tuple(d["lengths"]),
            master_seed=d["master_seed"],
            format_version=d.get("format_version", FORMAT_VERSION),
            samples_per_type=d.get("samples_per_type"),
            categories=tuple(d.get("categories", ())),
            allow_no_anomaly=d.get("allow_no_anomaly"),
            files=tuple(d.get("files", ())),
            notes=d.get("notes", ""),
        )


def save_manifest(path, manifest: DatasetManifest):
    write_atomic(path, json.dumps(manifest.to_dict(), indent=2) + "\n")


def load_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        return DatasetManifest.from_dict(json.load(fh))


def build_labeled_sample(length: int, seed: int, category: str | None = None,
                         anomalies: bool = True):
    """One labeled series plus its explanation bundle, fully seed-determined."""
    rng = np.random.default_rng(seed)
    spec = sample_base_spec(rng, length)
    base = generate_base(spec)
    if not anomalies:
        plan = AnomalyPlan(length=length, insertions=())
    elif category is not None:
        plan = sample_anomaly_plan(rng, base, categories=(category,))
    else:
        plan = sample_anomaly_plan(rng, base)
    labeled = apply_plan(base, plan)
    return labeled, build_bundle(labeled)


def sample_record(labeled, bundle: ExplanationBundle, seed: int) -> dict:
    row = {
        "values": [float(v) for v in labeled.values],
        "labels": [int(v) for v in labeled.labels],
        "types": list(labeled.types),
        "base_explanation": bundle.base_text,
        "anomaly_explanation": bundle.anomaly_text,
        "combined_explanation": bundle.combined_text,
        "spec": spec_to_dict(labeled.spec),
        "seed": int(seed),
    }
    if bundle.rewritten_text is not None:
        row["rewritten_explanation"] = bundle.rewritten_text
    return row


def build_eval_dataset(master_seed: int, out_dir) -> DatasetManifest:
    """Three JSONL files (lengths 100/200/400), 20 samples per anomaly type."""
    out = Path(out_dir)
    files = []
    for length in EVAL_LENGTHS:
        rows = []
        for category in CATEGORIES:
            for i in range(SAMPLES_PER_TYPE):
                seed = derive_seed(master_seed, "eval", length, category, i)
                labeled, bundle = build_labeled_sample(length, seed,
                                                       category=category)
                rows.append(sample_record(labeled, bundle, seed))
        name = f"eval_{length}.jsonl"
        save_jsonl(out / name, rows)
        files.append(name)
    manifest = DatasetManifest(
        kind="eval",
        sample_count=len(EVAL_LENGTHS) * len(CATEGORIES) * SAMPLES_PER_TYPE,
        lengths=EVAL_LENGTHS,
        master_seed=master_seed,
        samples_per_type=SAMPLES_PER_TYPE,
        categories=CATEGORIES,
        files=tuple(files),
    )
    save_manifest(out / "manifest.json", manifest)
    return manifest


def build_instruction_dataset(n: int, master_seed: int, out_path,
                              allow_no_anomaly: bool = True,
                              no_anomaly_prob: float = NO_ANOMALY_PROB,
                              ) -> DatasetManifest:
    """JSONL of instruction samples; lengths drawn from {180, 360, 720}."""
    if n < 1:
        raise ValueError("need at least one sample")
    out_path = Path(out_path)
    rows = []
    for i in range(n):
        # separate meta/sample streams so the length draw cannot correlate
        # with the sample's own spec draws
        meta_rng = np.random.default_rng(derive_seed(master_seed, "instruction",
                                                     i, "meta"))
        seed = derive_seed(master_seed, "instruction", i, "sample")
        length = int(meta_rng.choice(INSTRUCTION_LENGTHS))
        with_anomalies = not (allow_no_anomaly
                              and meta_rng.random() < no_anomaly_prob)
        labeled, bundle = build_labeled_sample(length, seed,
                                               anomalies=with_anomalies)
        rows.append(build_finetune_sample(labeled, bundle).to_dict())
    save_jsonl(out_path, rows)
    manifest = DatasetManifest(
        kind="instruction",
        sample_count=n,
        lengths=INSTRUCTION_LENGTHS,
        master_seed=master_seed,
        allow_no_anomaly=allow_no_anomaly,
        files=(out_path.name,),
    )
    save_manifest(out_path.with_name(out_path.stem + "_manifest.json"), manifest)
    return manifest


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_benchmark_series(path) -> tuple[list[float], list[int]]:
    """Two-column CSV (value, binary label), optional header, strict labels."""
    values: list[float] = []
    labels: list[int] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected 2 columns, got {len(row)}"
                )
            vtext, ltext = row[0].strip(), row[1].strip()
            if lineno == 1 and not _looks_numeric(vtext):
                continue  # header
            try:
                v = float(vtext)
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: bad value {vtext!r}"
                ) from exc
            if not math.isfinite(v):
                raise DatasetFormatError(
                    f"{path}: line {lineno}: non-finite value {vtext!r}"
                )
            if ltext in ("0", "1"):
                lab = int(ltext)
            elif ltext in ("0.0", "1.0"):
                lab = int(float(ltext))
            else:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: label must be 0 or 1, got {ltext!r}"
                )
            values.append(v)
            labels.append(lab)
    if not values:
        raise DatasetFormatError(f"{path}: no data rows")
    return values, labels


def median_fft_window(series_list) -> int:
    """Median FFT-derived window over a dataset's member series."""
    windows = []
    for s in series_list:
        x = np.asarray(s, dtype=float)
        if x.size < 8:
            log.warning("series of length %d too short for a window estimate",
                        x.size)
            continue
        windows.append(estimate_period_fft(x).window)
    if not windows:
        raise ValueError("no series long enough for a window estimate")
    return int(round(float(np.median(windows))))


def segment_series(values, labels, median_window: int):
    """Consecutive non-overlapping segments of 4x the median window.

    The trailing remainder is dropped; a series shorter than one segment
    yields nothing (with a warning) rather than an error.
    """
    x = np.asarray(values, dtype=float)
    y = np.asarray(labels)
    if x.size != y.size:
        raise ValueError("values and labels must have equal length")
    if median_window < 1:
        raise ValueError("median window must be positive")
    seg_len = SEGMENT_WINDOW_FACTOR * median_window
    count = x.size // seg_len
    if count == 0:
        log.warning("series of length %d shorter than one segment of %d, skipped",
                    x.size, seg_len)
        return []
    return [(x[k * seg_len:(k + 1) * seg_len].copy(),
             y[k * seg_len:(k + 1) * seg_len].copy())
            for k in range(count)]


def select_top_variable_segments(segments, k: int = TOP_SEGMENT_COUNT):
    """Deterministic stand-in for manual curation: top-k by standard deviation."""
    ranked = sorted(range(len(segments)),
                    key=lambda i: (-float(np.std(segments[i][0])), i))
    return [segments[i] for i in ranked[:k]]

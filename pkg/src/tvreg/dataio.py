"""Serialization: line-delimited dataset files, TSV tables, JSON manifests.

The dataset format is one JSON object per line.  The first line is a header
carrying the task kind and dimensions; every following line is one record
``{"t": ..., "x": {index: value, ...}, "y": ...}`` with a real response for
the Gaussian task or a token-index list for the text task (token ``-1``
marks an out-of-vocabulary item and is ignored by all computations).

All writers are deterministic: keys are sorted and floats use their shortest
round-trip representation, so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import os

import numpy as np

from tvreg.errors import InputError, ParseError, ValidationError
from tvreg.likelihoods import CoefficientSheet, Instance, TimedDataset

FORMAT_NAME = "tvreg-dataset"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_dataset(path: str, data: TimedDataset, task: str | None = None) -> None:
    if task is None:
        task = "sage" if data.vocab_size > 0 else "gaussian"
    header = {
        "format": FORMAT_NAME,
        "version": 1,
        "task": task,
        "n_timesteps": data.n_timesteps,
        "n_features": data.n_features,
        "vocab_size": data.vocab_size,
    }
    if data.feature_names is not None:
        header["feature_names"] = list(data.feature_names)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for inst in data.instances:
            rec = {
                "t": inst.t,
                "x": {str(i): float(inst.features[i]) for i in sorted(inst.features)},
                "y": list(int(w) for w in inst.response) if inst.is_text else float(inst.response),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def ingest(path: str) -> TimedDataset:
    """Parse a dataset file; failures name the offending line (1-based)."""
    if not os.path.exists(path):
        raise InputError(f"no such dataset file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise InputError(f"empty dataset file: {path}")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"line 1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise ParseError(f"line 1: not a {FORMAT_NAME} header")
    task = header.get("task")
    if task not in ("gaussian", "sage"):
        raise ValidationError(f"line 1: unknown task {task!r}")
    try:
        n_t = int(header["n_timesteps"])
        n_feat = int(header["n_features"])
        vocab = int(header.get("vocab_size", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line 1: bad header dimensions: {exc}") from exc
    names = header.get("feature_names")
    if names is not None:
        names = tuple(str(n) for n in names)
    if task == "sage" and vocab < 1:
        raise ValidationError("line 1: text task needs a positive vocab_size")

    if len(lines) == 1:
        raise InputError(f"dataset file {path} contains a header but no records")

    instances = []
    for ln_no, raw in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {ln_no}: malformed record: {exc}") from exc
        if not isinstance(rec, dict) or not {"t", "x", "y"} <= set(rec):
            raise ParseError(f"line {ln_no}: record must have fields t, x, y")
        try:
            t = int(rec["t"])
        except (TypeError, ValueError):
            raise ParseError(f"line {ln_no}: timestep {rec['t']!r} is not an integer")
        if not 1 <= t <= n_t:
            raise ValidationError(f"line {ln_no}: timestep {t} outside 1..{n_t}")
        feats = {}
        if not isinstance(rec["x"], dict):
            raise ParseError(f"line {ln_no}: feature map must be an object")
        for key, val in rec["x"].items():
            try:
                idx = int(key)
                feats[idx] = float(val)
            except (TypeError, ValueError):
                raise ParseError(f"line {ln_no}: bad feature entry {key!r}: {val!r}")
            if not 0 <= idx < n_feat:
                raise ValidationError(f"line {ln_no}: feature index {idx} outside 0..{n_feat - 1}")
        y = rec["y"]
        if task == "gaussian":
            if isinstance(y, (list, tuple)) or not isinstance(y, (int, float)):
                raise ValidationError(f"line {ln_no}: gaussian task needs a numeric response")
            response = float(y)
        else:
            if not isinstance(y, (list, tuple)):
                raise ValidationError(f"line {ln_no}: text task needs a token-index list")
            toks = []
            for w in y:
                if not isinstance(w, int):
                    raise ValidationError(f"line {ln_no}: token {w!r} is not an integer")
                if w != -1 and not 0 <= w < vocab:
                    raise ValidationError(f"line {ln_no}: token index {w} outside 0..{vocab - 1}")
                toks.append(w)
            response = tuple(toks)
        instances.append(Instance(t, feats, response, uid=ln_no - 2))

    return TimedDataset(instances, n_t, n_feat, vocab, None, names)


def write_table(path: str, columns, rows) -> None:
    """Tab-separated table with a header row; floats keep full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def read_table(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InputError(f"empty table file: {path}")
    columns = lines[0].split("\t")
    return columns, [ln.split("\t") for ln in lines[1:]]


def write_sheet(path: str, sheet: CoefficientSheet, feature_names=None) -> None:
    names = feature_names or [f"x{i:03d}" for i in range(sheet.n_features)]
    rows = []
    if sheet.values.ndim == 2:
        cols = ("feature", "t", "value")
        for i in range(sheet.n_features):
            for t in range(sheet.n_timesteps):
                rows.append((names[i], t + 1, sheet.values[i, t]))
    else:
        cols = ("feature", "t", "word", "value")
        for i in range(sheet.n_features):
            for t in range(sheet.n_timesteps):
                for w in range(sheet.n_classes):
                    rows.append((names[i], t + 1, w, sheet.values[i, t, w]))
    write_table(path, cols, rows)


def read_sheet(path: str) -> tuple[CoefficientSheet, tuple]:
    cols, rows = read_table(path)
    if list(cols[:2]) != ["feature", "t"] or cols[-1] != "value":
        raise ParseError(f"{path}: not a coefficient sheet table")
    has_word = "word" in cols
    names = []
    index = {}
    for row in rows:
        if row[0] not in index:
            index[row[0]] = len(names)
            names.append(row[0])
    n_t = max(int(r[1]) for r in rows)
    if has_word:
        n_w = max(int(r[2]) for r in rows) + 1
        values = np.zeros((len(names), n_t, n_w))
        for r in rows:
            values[index[r[0]], int(r[1]) - 1, int(r[2])] = float(r[3])
    else:
        values = np.zeros((len(names), n_t))
        for r in rows:
            values[index[r[0]], int(r[1]) - 1] = float(r[2])
    return CoefficientSheet(values), tuple(names)


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_truth_table(path: str, spec) -> None:
    """Ground-truth table for a generator spec: one row per feature."""
    rows = []
    for i, ft in enumerate(spec.features):
        rows.append(
            (
                f"x{i:03d}",
                int(ft.active),
                ft.alpha if ft.active else 0.0,
                ft.lam if ft.active else 0.0,
            )
        )
    write_table(path, ("feature", "active", "alpha", "lam"), rows)

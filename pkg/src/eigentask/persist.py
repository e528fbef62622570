"""File formats: CSV tables with a provenance comment, JSON sidecars, JSONL records.

Every write goes to a temporary file in the target directory and is moved
into place with ``os.replace``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np

from . import __version__
from .sampling import (MULTINOMIAL, FeatureMatrix, InputEnsemble, ShotRecord, check_shots,
                       is_infinite)
from .spectral import NsrSpectrum


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v) -> str:
    """Round-trip exact text for numbers; inf written as 'inf'."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def shots_json(S):
    return "inf" if is_infinite(S) else int(S)


def write_csv(path, header, rows, cfg_hash: str = "", notes=()) -> None:
    buf = io.StringIO()
    buf.write(f"# eigentask {__version__} config={cfg_hash or '-'}\n")
    for note in notes:
        buf.write(f"# note: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def read_csv(path):
    """Return (header, rows, comments); rows are lists of strings."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise FormatError(f"{path}: no rows (file is empty)")
    rows = list(csv.reader(body))
    return rows[0], rows[1:], comments


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def sidecar_path(csv_path) -> str:
    base, _ = os.path.splitext(os.fspath(csv_path))
    return base + ".json"


# --------------------------------------------------------------------------
# features and records

def write_features(path, fm: FeatureMatrix, cfg_hash: str = "", extra: dict | None = None) -> None:
    header = ["u"] + [f"X{k}" for k in range(fm.K)]
    rows = (np.concatenate([[u], x]) for u, x in zip(fm.ensemble.values, fm.data))
    write_csv(path, header, rows, cfg_hash)
    meta = {"N": fm.N, "K": fm.K, "S": shots_json(fm.shots), "seed": fm.seed,
            "model": fm.model, "ensemble": fm.ensemble.to_dict(),
            "weights": "uniform" if np.allclose(fm.ensemble.weights, 1.0 / fm.N, rtol=0, atol=1e-15)
            else fm.ensemble.weights.tolist()}
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)


def read_features(path) -> FeatureMatrix:
    header, rows, _ = read_csv(path)
    if not rows:
        raise FormatError(f"{path}: no rows")
    if header[0] != "u" or any(h != f"X{k}" for k, h in enumerate(header[1:])):
        raise FormatError(f"{path}: expected header u,X0,...,X{{K-1}}")
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry ({exc})") from None
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise FormatError(f"{path}: ragged rows")
    side = sidecar_path(path)
    meta = read_json(side) if os.path.exists(side) else {}
    S = check_shots(meta.get("S", "inf"))
    w = meta.get("weights", "uniform")
    weights = None if w == "uniform" else np.asarray(w, dtype=float)
    ens = InputEnsemble.from_values(arr[:, 0], weights)
    ekind = meta.get("ensemble", {}).get("kind")
    if ekind:
        ens = InputEnsemble(ens.values, ens.weights, ekind, meta.get("ensemble", {}).get("seed"))
    if "K" in meta and meta["K"] != arr.shape[1] - 1:
        raise FormatError(f"{path}: sidecar says K={meta['K']}, file has {arr.shape[1] - 1} columns")
    return FeatureMatrix(arr[:, 1:], S, ens, meta.get("model", MULTINOMIAL), meta.get("seed"))


def write_records(path, records) -> None:
    lines = []
    for r in records:
        key = "counts" if r.kind == "poisson" else "outcomes"
        obj = {"input_index": int(r.input_index), "u": r.u, key: r.outcomes.tolist()}
        lines.append(json.dumps(obj, separators=(",", ":")))
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_records(path) -> list:
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{i + 1}: {exc}") from None
            if "counts" in obj:
                out.append(ShotRecord(obj["input_index"], np.asarray(obj["counts"], dtype=np.int64),
                                      "poisson", obj.get("u")))
            elif "outcomes" in obj:
                out.append(ShotRecord(obj["input_index"], np.asarray(obj["outcomes"], dtype=np.int64),
                                      "multinomial", obj.get("u")))
            else:
                raise FormatError(f"{path}:{i + 1}: record has neither outcomes nor counts")
    return out


def write_table(path, values, table, prefix="X", cfg_hash: str = "") -> None:
    """u column followed by K value columns (probability tables, eigentasks)."""
    table = np.atleast_2d(table)
    header = ["u"] + [f"{prefix}{k}" for k in range(table.shape[1])]
    write_csv(path, header, (np.concatenate([[u], row]) for u, row in zip(values, table)), cfg_hash)


# --------------------------------------------------------------------------
# spectra

def write_spectrum(path, spec: NsrSpectrum, cfg_hash: str = "", eigvec_path=None) -> None:
    rows = ((k, spec.beta2[k], spec.correctable[k], spec.alpha[k]) for k in range(spec.K))
    write_csv(path, ["k", "beta2", "correctable", "alpha"], rows, cfg_hash)
    if eigvec_path is None:
        base, ext = os.path.splitext(os.fspath(path))
        eigvec_path = base + "_eigenvectors" + (ext or ".csv")
    header = ["feature"] + [f"r{k}" for k in range(spec.K)]
    write_csv(eigvec_path, header, ([j, *spec.r[j]] for j in range(spec.K)), cfg_hash)
    write_json(sidecar_path(path), {
        "K": spec.K, "rank_G": spec.rank_G, "noise_model": spec.noise_model,
        "S": shots_json(spec.shots), "corrected": spec.corrected, "raw": spec.raw,
        "dropped_columns": list(spec.dropped), "method": spec.method,
        "eigenvectors": os.path.basename(eigvec_path)})


def read_spectrum(path) -> NsrSpectrum:
    header, rows, _ = read_csv(path)
    if header[:2] != ["k", "beta2"]:
        raise FormatError(f"{path}: expected columns k,beta2[,correctable,alpha]")
    if not rows:
        raise FormatError(f"{path}: no rows")
    beta2 = np.array([float(r[1]) for r in rows])
    if "correctable" in header:
        c = np.array([r[header.index("correctable")] in ("1", "true", "True") for r in rows])
    else:
        c = np.isfinite(beta2)
    side = sidecar_path(path)
    meta = read_json(side) if os.path.exists(side) else {}
    K = beta2.size
    R = np.eye(K)
    ev = meta.get("eigenvectors")
    if ev:
        evp = os.path.join(os.path.dirname(os.fspath(path)), ev)
        if os.path.exists(evp):
            _, erows, _ = read_csv(evp)
            R = np.array([[float(v) for v in r[1:]] for r in erows])
            if R.shape != (K, K):
                raise FormatError(f"{evp}: eigenvector matrix is {R.shape}, expected {(K, K)}")
    return NsrSpectrum(beta2, R, c, int(meta.get("rank_G", int(c.sum()))),
                       meta.get("noise_model", MULTINOMIAL), check_shots(meta.get("S", "inf")),
                       corrected=bool(meta.get("corrected", False)), raw=bool(meta.get("raw", False)),
                       dropped=tuple(meta.get("dropped_columns", ())), method=meta.get("method", ""))


"""Text file formats for chains, walks, traces, and factorizer checkpoints.

Everything is plain text and deterministic: floats are written with %.17g
(which round-trips IEEE doubles exactly), JSON is written with sorted keys
and no timestamps, and integer states are written 1-based in files while the
in-memory API stays 0-based. Writing the same objects twice therefore
produces byte-identical files, which the CLI relies on for reproducible
manifests.
"""

from __future__ import annotations

import json

import numpy as np

from .factorize import AngleTrace, EtaSchedule, FactorizerState

FLOAT_FMT = "%.17g"


def save_matrix(path, a: np.ndarray) -> None:
    """Comma-separated rows of %.17g floats, no header."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, fmt=FLOAT_FMT, delimiter=",")


def load_matrix(path) -> np.ndarray:
    # ndmin=2 keeps single-column files as columns, which atleast_2d would not
    return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)


def save_vector(path, v: np.ndarray) -> None:
    """One %.17g float per line."""
    np.savetxt(path, np.asarray(v, dtype=float).reshape(-1), fmt=FLOAT_FMT)


def load_vector(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float).reshape(-1)


def save_walk(path, stream: np.ndarray) -> None:
    """One 1-based state per line."""
    stream = np.asarray(stream, dtype=np.int64).reshape(-1)
    np.savetxt(path, stream + 1, fmt="%d")


def load_walk(path) -> np.ndarray:
    """Read a walk written by save_walk back to 0-based states."""
    raw = np.loadtxt(path, dtype=np.int64).reshape(-1)
    if raw.size and raw.min() < 1:
        raise ValueError(f"walk file {path} contains a state below 1; "
                         "files are 1-based")
    return raw - 1


def save_pairs(path, pairs: np.ndarray) -> None:
    """CSV with header from,to; states written 1-based."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    with open(path, "w") as fh:
        fh.write("from,to\n")
        for i, j in pairs:
            fh.write(f"{i + 1},{j + 1}\n")


def load_pairs(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "from,to":
            raise ValueError(f"pair file {path} must start with 'from,to', "
                             f"got {header!r}")
        rows = [line.split(",") for line in fh.read().split() if line]
    pairs = np.array([[int(a), int(b)] for a, b in rows],
                     dtype=np.int64).reshape(-1, 2)
    if pairs.size and pairs.min() < 1:
        raise ValueError(f"pair file {path} contains a state below 1; "
                         "files are 1-based")
    return pairs - 1


def save_trace(path, trace: AngleTrace) -> None:
    """CSV with header iteration,sin2_theta."""
    with open(path, "w") as fh:
        fh.write("iteration,sin2_theta\n")
        for t, v in zip(trace.times, trace.values):
            fh.write(("%d," + FLOAT_FMT + "\n") % (t, v))


def load_trace(path, r: int) -> AngleTrace:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "iteration,sin2_theta":
            raise ValueError(f"trace file {path} must start with "
                             f"'iteration,sin2_theta', got {header!r}")
        rows = [line.split(",") for line in fh.read().split() if line]
    times = np.array([int(a) for a, _ in rows], dtype=np.int64)
    values = np.array([float(b) for _, b in rows])
    return AngleTrace(times, values, r)


def save_labels(path, labels: np.ndarray) -> None:
    """CSV with header state,block; both written 1-based."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    with open(path, "w") as fh:
        fh.write("state,block\n")
        for s, c in enumerate(labels):
            fh.write(f"{s + 1},{c + 1}\n")


def load_labels(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "state,block":
            raise ValueError(f"label file {path} must start with "
                             f"'state,block', got {header!r}")
        rows = [line.split(",") for line in fh.read().split() if line]
    out = np.full(len(rows), -1, dtype=np.int64)
    for a, b in rows:
        s = int(a) - 1
        if not (0 <= s < len(rows)):
            raise ValueError(
                f"label file {path} does not cover states 1..{len(rows)}")
        out[s] = int(b) - 1
    if (out < 0).any():
        raise ValueError(f"label file {path} does not cover states 1..{len(rows)}")
    return out


def save_json(path, payload: dict) -> None:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_state(prefix, state: FactorizerState) -> None:
    """Checkpoint a factorizer state as <prefix>.json plus <prefix>_w.csv."""
    meta = {
        "m": state.m,
        "r": state.r,
        "k": state.k,
        "eta0": state.schedule.eta0,
        "k0": state.schedule.k0,
    }
    save_json(f"{prefix}.json", meta)
    save_matrix(f"{prefix}_w.csv", state.w)


def load_state(prefix) -> FactorizerState:
    meta = load_json(f"{prefix}.json")
    w = load_matrix(f"{prefix}_w.csv")
    if w.shape != (2 * meta["m"], meta["r"]):
        raise ValueError(
            f"checkpoint {prefix}_w.csv has shape {w.shape}, expected "
            f"{(2 * meta['m'], meta['r'])}"
        )
    schedule = EtaSchedule(meta["eta0"], meta["k0"])
    return FactorizerState(w=w, k=int(meta["k"]), schedule=schedule)

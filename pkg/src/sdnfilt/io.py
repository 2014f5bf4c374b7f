"""CSV and JSON artifacts: points, edge lists, filters, signals,
preconditioners, solve traces, experiment curves and round logs.

All writes are atomic (temp file in the target directory, then rename), so
a crashed run never leaves a half-written artifact. Floats are written with
repr, which round-trips exactly through float().
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .filters import DiagonalPreconditioner, GraphFilter, Signal
from .graphs import Graph

__all__ = [
    "IngestError",
    "atomic_write_text",
    "read_points_csv",
    "write_points_csv",
    "write_edges_csv",
    "read_edges_csv",
    "write_filter_csv",
    "read_filter_csv",
    "write_signal_csv",
    "read_signal_csv",
    "write_preconditioner_csv",
    "write_trace_csv",
    "write_curves_csv",
    "write_roundlog_csv",
    "write_summary_json",
]


class IngestError(ValueError):
    """Malformed input file; the message carries the offending line number."""


def _fmt(x) -> str:
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# points: header id,x,y[,value], ids contiguous from 0
# ---------------------------------------------------------------------------


def read_points_csv(path: str):
    """Read a points file and return (coordinates, values-or-None)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise IngestError(f"{path}:1: empty points file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[:3] != ["id", "x", "y"] or header not in (
        ["id", "x", "y"], ["id", "x", "y", "value"]
    ):
        raise IngestError(
            f"{path}:1: expected header 'id,x,y' or 'id,x,y,value', got {lines[0]!r}"
        )
    has_value = len(header) == 4
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [c.strip() for c in line.split(",")]
        if len(parts) != len(header):
            raise IngestError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            ident = int(parts[0])
            x = float(parts[1])
            y = float(parts[2])
            value = float(parts[3]) if has_value else None
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        rows.append((ident, x, y, value))
    if not rows:
        raise IngestError(f"{path}:2: no data rows")
    ids = [r[0] for r in rows]
    if sorted(ids) != list(range(len(rows))):
        raise IngestError(
            f"{path}: vertex ids must be exactly 0..{len(rows) - 1} with no gaps"
        )
    rows.sort(key=lambda r: r[0])
    coords = np.array([[r[1], r[2]] for r in rows])
    values = np.array([r[3] for r in rows]) if has_value else None
    return coords, values


def write_points_csv(path: str, coords, values=None) -> None:
    coords = np.asarray(coords, dtype=np.float64)
    out = ["id,x,y,value" if values is not None else "id,x,y"]
    for i in range(coords.shape[0]):
        row = f"{i},{_fmt(coords[i, 0])},{_fmt(coords[i, 1])}"
        if values is not None:
            row += f",{_fmt(values[i])}"
        out.append(row)
    atomic_write_text(path, "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# edge lists: header i,j with i < j
# ---------------------------------------------------------------------------


def write_edges_csv(path: str, g: Graph) -> None:
    out = ["i,j"]
    out.extend(f"{i},{j}" for i, j in g.edges())
    atomic_write_text(path, "\n".join(out) + "\n")


def read_edges_csv(path: str, n: int | None = None):
    """Return (n, edges). When n is not given it is inferred as max id + 1."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "i,j":
        raise IngestError(f"{path}:1: expected header 'i,j'")
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise IngestError(f"{path}:{lineno}: expected 2 fields")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        if i >= j:
            raise IngestError(f"{path}:{lineno}: edges must satisfy i < j")
        edges.append((i, j))
    if n is None:
        n = max(max(e) for e in edges) + 1 if edges else 0
    return n, edges


# ---------------------------------------------------------------------------
# filters: one-line metadata header, then i,j,value triplets
# ---------------------------------------------------------------------------


def write_filter_csv(path: str, h: GraphFilter) -> None:
    out = [f"# n={h.graph.n} width={h.width}", "i,j,value"]
    out.extend(f"{i},{j},{_fmt(v)}" for i, j, v in h.entries())
    atomic_write_text(path, "\n".join(out) + "\n")


def read_filter_csv(path: str, graph: Graph) -> GraphFilter:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# n="):
        raise IngestError(f"{path}:1: expected metadata header '# n=... width=...'")
    try:
        meta = dict(tok.split("=") for tok in lines[0][2:].split())
        n = int(meta["n"])
        width = int(meta["width"])
    except (ValueError, KeyError) as exc:
        raise IngestError(f"{path}:1: bad metadata header: {exc}") from None
    if n != graph.n:
        raise IngestError(f"{path}: filter is for n={n}, graph has n={graph.n}")
    if lines[1].strip() != "i,j,value":
        raise IngestError(f"{path}:2: expected header 'i,j,value'")
    entries = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise IngestError(f"{path}:{lineno}: expected 3 fields")
        try:
            entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    h = GraphFilter.from_entries(graph, entries)
    if h.width != width:
        raise IngestError(
            f"{path}: recorded width {width} does not match entries "
            f"(actual {h.width})"
        )
    return h


# ---------------------------------------------------------------------------
# signals and diagonals: id,value
# ---------------------------------------------------------------------------


def write_signal_csv(path: str, x: Signal) -> None:
    out = ["id,value"]
    out.extend(f"{i},{_fmt(v)}" for i, v in enumerate(x.values))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_signal_csv(path: str, graph: Graph) -> Signal:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "id,value":
        raise IngestError(f"{path}:1: expected header 'id,value'")
    values = np.zeros(graph.n)
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise IngestError(f"{path}:{lineno}: expected 2 fields")
        try:
            i = int(parts[0])
            values[i] = float(parts[1])
        except (ValueError, IndexError) as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        seen.add(i)
    if len(seen) != graph.n:
        raise IngestError(f"{path}: expected {graph.n} rows, got {len(seen)}")
    return Signal(graph, values)


def write_preconditioner_csv(path: str, p: DiagonalPreconditioner) -> None:
    out = [f"# kind={p.kind} width={p.source_width}", "id,value"]
    out.extend(f"{i},{_fmt(v)}" for i, v in enumerate(p.diag))
    atomic_write_text(path, "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# experiment artifacts
# ---------------------------------------------------------------------------


def write_trace_csv(path: str, traces) -> None:
    """One row per (method, iteration) from a list of SolveTrace objects."""
    out = ["method,m,residual,rel_error,weighted_error,snr"]
    for tr in traces:
        for m in range(len(tr.residuals)):
            rel = tr.relative_errors[m] if tr.relative_errors else ""
            wgt = tr.weighted_errors[m] if tr.weighted_errors else ""
            snr = tr.snrs[m] if tr.snrs else ""
            out.append(
                f"{tr.method},{m},{_fmt(tr.residuals[m])},"
                f"{_fmt(rel) if rel != '' else ''},"
                f"{_fmt(wgt) if wgt != '' else ''},"
                f"{_fmt(snr) if snr != '' else ''}"
            )
    atomic_write_text(path, "\n".join(out) + "\n")


def write_curves_csv(path: str, curves: dict) -> None:
    """curves maps method -> per-iteration mean metric array."""
    out = ["method,m,mean_metric"]
    for method in curves:
        for m, v in enumerate(curves[method]):
            out.append(f"{method},{m},{_fmt(v)}")
    atomic_write_text(path, "\n".join(out) + "\n")


def write_roundlog_csv(path: str, rounds, include_values: bool = True) -> None:
    out = ["epoch,round,from,to,kind,value"]
    for r in rounds:
        for sender, receiver, kind, value in r.messages:
            tail = _fmt(value) if include_values else ""
            out.append(f"{r.epoch},{r.index},{sender},{receiver},{kind},{tail}")
    atomic_write_text(path, "\n".join(out) + "\n")


def write_summary_json(path: str, summary: dict) -> None:
    atomic_write_text(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")

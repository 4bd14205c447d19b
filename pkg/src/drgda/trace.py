"""Trace files: a JSON header line followed by one row per iteration.

CSV layout::

    # {"trace_schema": 1, ...header...}
    t,metric_total,...,wall_ms
    0,1.23,...
    # error: NumericError: ...        (only when the run aborted)

JSON-lines layout: ``{"header": {...}}`` then one object per row, then an
optional ``{"error": "..."}``.
"""

import csv
import io
import json
import math

TRACE_SCHEMA = 1
COLUMNS = (
    "t", "metric_total", "grad_norm", "primal_consensus", "dual_gap", "x_consensus_l2", "y_consensus_l2",
    "tracker_drift_u", "tracker_drift_v", "phi_hat", "comms", "wall_ms",
)
OPTIONAL_COLUMNS = ("node_grad_norm",)
INT_COLUMNS = {"t", "comms"}


class TraceReadError(ValueError):
    pass


def _fmt(value):
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _json_float(value):
    # JSON has no nan/inf; write them as strings so the header stays valid JSON
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    return _json_float(obj)


def columns(extra=False):
    return COLUMNS + (OPTIONAL_COLUMNS if extra else ())


def split_records(records):
    """Separate data rows from the trailing error marker record, if any."""
    rows = [r for r in records if r.error is None]
    errors = [r.error for r in records if r.error is not None]
    return rows, errors


def render(header, records, fmt="csv", extra=False):
    cols = columns(extra)
    header = dict(_clean(header), trace_schema=TRACE_SCHEMA, columns=list(cols))
    rows, errors = split_records(records)
    buf = io.StringIO()
    if fmt == "csv":
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
        for e in errors:
            buf.write("# error: " + e.replace("\n", " ") + "\n")
    elif fmt == "jsonl":
        buf.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for r in rows:
            buf.write(json.dumps({c: _json_float(getattr(r, c)) for c in cols}) + "\n")
        for e in errors:
            buf.write(json.dumps({"error": e}) + "\n")
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return buf.getvalue()


def write_trace(path, header, records, fmt="csv", extra=False):
    text = render(header, records, fmt, extra)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _parse_number(col, text):
    if col in INT_COLUMNS:
        return int(text)
    return float(text)


def read_trace(path):
    """Return ``(header, rows, errors)``; rows are dicts keyed by column name."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise TraceReadError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise TraceReadError(f"{path}: empty trace")
    try:
        if lines[0].startswith("# "):
            return _read_csv(lines)
        return _read_jsonl(lines)
    except (ValueError, KeyError, IndexError) as exc:
        if isinstance(exc, TraceReadError):
            raise
        raise TraceReadError(f"{path}: malformed trace ({exc})") from exc


def _read_csv(lines):
    header = json.loads(lines[0][2:])
    cols = lines[1].split(",")
    if tuple(cols[: len(COLUMNS)]) != COLUMNS:
        raise TraceReadError("column schema mismatch")
    rows, errors = [], []
    for line in lines[2:]:
        if line.startswith("# error:"):
            errors.append(line[len("# error:"):].strip())
            continue
        cells = line.split(",")
        if len(cells) != len(cols):
            raise TraceReadError(f"row has {len(cells)} cells, expected {len(cols)}")
        rows.append({c: _parse_number(c, v) for c, v in zip(cols, cells)})
    return header, rows, errors


def _read_jsonl(lines):
    header = json.loads(lines[0])["header"]
    rows, errors = [], []
    for line in lines[1:]:
        obj = json.loads(line)
        if "error" in obj:
            errors.append(obj["error"])
        else:
            rows.append({c: float(v) if c not in INT_COLUMNS else int(v) for c, v in obj.items()})
    return header, rows, errors


def data_section(path, mask=("wall_ms",)):
    """Everything after the header line, with the named (timing) columns blanked.

    Wall time is the one column that is not a function of the config, so
    determinism is compared with it masked.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()[1:]
    if not lines:
        return ""
    if lines[0].startswith("{"):
        out = []
        for line in lines:
            if line.startswith("{"):
                obj = json.loads(line)
                for m in mask:
                    if m in obj:
                        obj[m] = None
                line = json.dumps(obj)
            out.append(line)
        return "\n".join(out)
    cols = lines[0].split(",")
    idx = [cols.index(m) for m in mask if m in cols]
    out = [lines[0]]
    for line in lines[1:]:
        if line.startswith("#"):
            out.append(line)
            continue
        cells = line.split(",")
        for i in idx:
            cells[i] = ""
        out.append(",".join(cells))
    return "\n".join(out)

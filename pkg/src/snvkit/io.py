"""File formats: binary photon streams, delimited spectra and series.

Binary stream records are packed little-endian (u64 timestamp in
picoseconds, u8 channel index), 9 bytes per record, no header. CSV readers
raise :class:`ParseError` with 1-based line and column so callers can point
at the offending cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .units import PhotonStream, Spectrum

STREAM_DTYPE = np.dtype([("timestamp_ps", "<u8"), ("channel", "u1")])


class ParseError(ValueError):
    """Malformed input file; carries 1-based line/column of the bad token."""

    def __init__(self, message: str, line: int, column: int, path: str | Path | None = None):
        self.line = int(line)
        self.column = int(column)
        self.path = str(path) if path is not None else None
        where = f"line {self.line}, column {self.column}"
        if self.path:
            where = f"{self.path}: {where}"
        super().__init__(f"{where}: {message}")


def write_stream(stream: PhotonStream, path: str | Path) -> None:
    rec = np.empty(len(stream), dtype=STREAM_DTYPE)
    rec["timestamp_ps"] = stream.timestamps_ps
    rec["channel"] = stream.channels
    payload = rec.tobytes()
    Path(path).write_bytes(payload)


def read_stream(path: str | Path, duration_s: float | None = None) -> PhotonStream:
    payload = Path(path).read_bytes()
    if len(payload) % STREAM_DTYPE.itemsize != 0:
        raise ParseError(
            f"file size {len(payload)} is not a multiple of the "
            f"{STREAM_DTYPE.itemsize}-byte record size",
            line=1, column=1, path=path,
        )
    rec = np.frombuffer(payload, dtype=STREAM_DTYPE)
    ts = rec["timestamp_ps"].astype(np.int64)
    if np.any(np.diff(ts) < 0):
        bad = int(np.argmax(np.diff(ts) < 0)) + 2
        raise ParseError("timestamps decrease", line=bad, column=1, path=path)
    return PhotonStream(
        timestamps_ps=ts,
        channels=rec["channel"].copy(),
        duration_s=duration_s,
    )


def write_stream_csv(stream: PhotonStream, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("timestamp_ps,channel\n")
        for t, c in zip(stream.timestamps_ps, stream.channels):
            fh.write(f"{int(t)},{int(c)}\n")


def _split_csv_line(line: str) -> list[tuple[str, int]]:
    """Fields with their 1-based starting columns."""
    out = []
    col = 1
    for field in line.split(","):
        out.append((field.strip(), col))
        col += len(field) + 1
    return out


def _parse_float(token: str, line_no: int, col: int, path, allow_empty=False) -> float:
    if token == "":
        if allow_empty:
            return float("nan")
        raise ParseError("empty field", line_no, col, path)
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line_no, col, path) from None


def _is_header(fields: list[tuple[str, int]]) -> bool:
    for token, _ in fields:
        if token == "":
            continue
        try:
            float(token)
        except ValueError:
            return True
    return False


def read_stream_csv(path: str | Path, duration_s: float | None = None) -> PhotonStream:
    ts: list[int] = []
    ch: list[int] = []
    at_line: list[int] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split_csv_line(line)
            if line_no == 1 and _is_header(fields):
                continue
            if len(fields) < 2:
                raise ParseError("expected 2 columns (timestamp_ps, channel)",
                                 line_no, 1, path)
            t_tok, t_col = fields[0]
            c_tok, c_col = fields[1]
            try:
                t = int(t_tok)
            except ValueError:
                raise ParseError(f"not an integer timestamp: {t_tok!r}",
                                 line_no, t_col, path) from None
            try:
                c = int(c_tok)
            except ValueError:
                raise ParseError(f"not an integer channel: {c_tok!r}",
                                 line_no, c_col, path) from None
            if t < 0:
                raise ParseError("negative timestamp", line_no, t_col, path)
            if not 0 <= c <= 255:
                raise ParseError("channel outside 0..255", line_no, c_col, path)
            ts.append(t)
            ch.append(c)
            at_line.append(line_no)
    arr = np.array(ts, dtype=np.int64)
    if np.any(np.diff(arr) < 0):
        # blame the later record of the first out-of-order pair
        bad = int(np.argmax(np.diff(arr) < 0)) + 1
        raise ParseError("timestamps decrease", at_line[bad], 1, path)
    return PhotonStream(timestamps_ps=arr,
                        channels=np.array(ch, dtype=np.uint8),
                        duration_s=duration_s)


def write_spectrum_csv(spec: Spectrum, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("wavelength_nm,counts\n")
        for w, c in zip(spec.wavelength_nm, spec.counts):
            fh.write(f"{w:.6f},{c:.6f}\n")


def read_spectrum_csv(path: str | Path, instrument_fwhm_ghz: float = 1.0) -> Spectrum:
    wl: list[float] = []
    counts: list[float] = []
    at_line: list[int] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split_csv_line(line)
            if line_no == 1 and _is_header(fields):
                continue
            if len(fields) < 2:
                raise ParseError("expected 2 columns (wavelength_nm, counts)",
                                 line_no, 1, path)
            w_tok, w_col = fields[0]
            c_tok, c_col = fields[1]
            w = _parse_float(w_tok, line_no, w_col, path)
            c = _parse_float(c_tok, line_no, c_col, path)
            if w <= 0:
                raise ParseError("wavelength must be > 0", line_no, w_col, path)
            if c < 0:
                raise ParseError("counts must be >= 0", line_no, c_col, path)
            wl.append(w)
            counts.append(c)
            at_line.append(line_no)
    if len(wl) < 2:
        raise ParseError("need at least 2 samples", 1, 1, path)
    w_arr = np.array(wl)
    if np.any(np.diff(w_arr) <= 0):
        bad = int(np.argmax(np.diff(w_arr) <= 0)) + 1
        raise ParseError("wavelength grid must be strictly increasing",
                         at_line[bad], 1, path)
    return Spectrum(wavelength_nm=w_arr, counts=np.array(counts),
                    instrument_fwhm_ghz=instrument_fwhm_ghz)


# Temperature-series files: one row per temperature, empty cells allowed for
# quantities not measured at that point (become NaN).
SERIES_COLUMNS = ("temperature_k", "linewidth_ghz", "linewidth_err_ghz",
                  "shift_ghz", "shift_err_ghz", "dw", "dw_err")


def write_series_csv(rows: dict[str, np.ndarray], path: str | Path) -> None:
    n = len(rows["temperature_k"])
    with open(path, "w") as fh:
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for i in range(n):
            cells = []
            for col in SERIES_COLUMNS:
                arr = rows.get(col)
                if arr is None:
                    cells.append("")
                    continue
                v = float(arr[i])
                cells.append("" if np.isnan(v) else f"{v:.9g}")
            fh.write(",".join(cells) + "\n")


def read_series_csv(path: str | Path) -> dict[str, np.ndarray]:
    cols: dict[str, list[float]] = {c: [] for c in SERIES_COLUMNS}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split_csv_line(line)
            if line_no == 1 and _is_header(fields):
                continue
            t_tok, t_col = fields[0]
            t = _parse_float(t_tok, line_no, t_col, path)
            if t <= 0:
                raise ParseError("temperature must be > 0", line_no, t_col, path)
            cols["temperature_k"].append(t)
            for name, idx in zip(SERIES_COLUMNS[1:], range(1, len(SERIES_COLUMNS))):
                if idx < len(fields):
                    tok, col = fields[idx]
                    cols[name].append(_parse_float(tok, line_no, col, path,
                                                   allow_empty=True))
                else:
                    cols[name].append(float("nan"))
    if not cols["temperature_k"]:
        raise ParseError("no data rows", 1, 1, path)
    return {k: np.array(v) for k, v in cols.items()}


def write_correlation_csv(tau_ns: np.ndarray, g2: np.ndarray,
                          err: np.ndarray | None, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("tau_ns,g2,g2_err\n")
        for i in range(len(tau_ns)):
            e = "" if err is None or np.isnan(err[i]) else f"{err[i]:.9g}"
            fh.write(f"{tau_ns[i]:.9g},{g2[i]:.9g},{e}\n")


def read_correlation_csv(path: str | Path):
    tau: list[float] = []
    g2: list[float] = []
    err: list[float] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split_csv_line(line)
            if line_no == 1 and _is_header(fields):
                continue
            if len(fields) < 2:
                raise ParseError("expected at least 2 columns (tau_ns, g2)",
                                 line_no, 1, path)
            tau.append(_parse_float(fields[0][0], line_no, fields[0][1], path))
            g2.append(_parse_float(fields[1][0], line_no, fields[1][1], path))
            if len(fields) > 2:
                err.append(_parse_float(fields[2][0], line_no, fields[2][1],
                                        path, allow_empty=True))
            else:
                err.append(float("nan"))
    if not tau:
        raise ParseError("no data rows", 1, 1, path)
    return np.array(tau), np.array(g2), np.array(err)


def write_xy_csv(path: str | Path, columns: dict[str, np.ndarray],
                 float_format: str = "%.9g") -> None:
    """Generic delimited writer: named columns of equal length."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("columns differ in length")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            cells = []
            for a in arrays:
                v = a[i]
                if isinstance(v, (np.floating, float)) and np.isnan(v):
                    cells.append("")
                elif isinstance(v, (np.integer, int)):
                    cells.append(str(int(v)))
                else:
                    cells.append(float_format % float(v))
            fh.write(",".join(cells) + "\n")


def read_xy_csv(path: str | Path, n_columns: int = 2):
    """Generic numeric reader: first n_columns numeric fields per row."""
    data: list[list[float]] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split_csv_line(line)
            if line_no == 1 and _is_header(fields):
                continue
            if len(fields) < n_columns:
                raise ParseError(f"expected {n_columns} columns", line_no, 1, path)
            row = [_parse_float(tok, line_no, col, path)
                   for tok, col in fields[:n_columns]]
            data.append(row)
    if not data:
        raise ParseError("no data rows", 1, 1, path)
    arr = np.array(data)
    return tuple(arr[:, j] for j in range(n_columns))


@dataclass(frozen=True)
class DelayHistogram:
    """Pulsed-excitation arrival delay histogram."""

    bin_centers_ns: np.ndarray
    counts: np.ndarray
    pulse_period_ns: float
    n_pulses: int

    def __post_init__(self):
        if len(self.bin_centers_ns) != len(self.counts):
            raise ValueError("bin/count length mismatch")

    @property
    def bin_width_ns(self) -> float:
        return float(self.bin_centers_ns[1] - self.bin_centers_ns[0])


def write_histogram_csv(hist: DelayHistogram, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# pulse_period_ns={hist.pulse_period_ns:.9g} "
                 f"n_pulses={hist.n_pulses}\n")
        fh.write("delay_ns,counts\n")
        for t, c in zip(hist.bin_centers_ns, hist.counts):
            fh.write(f"{t:.9g},{c:.10g}\n")


def read_histogram_csv(path: str | Path) -> DelayHistogram:
    period = None
    n_pulses = 0
    t: list[float] = []
    c: list[float] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.lstrip().startswith("#"):
                for tok in line.lstrip("# ").split():
                    if tok.startswith("pulse_period_ns="):
                        period = float(tok.split("=", 1)[1])
                    elif tok.startswith("n_pulses="):
                        n_pulses = int(tok.split("=", 1)[1])
                continue
            if not line.strip():
                continue
            fields = _split_csv_line(line)
            if _is_header(fields):
                continue
            t.append(_parse_float(fields[0][0], line_no, fields[0][1], path))
            c.append(_parse_float(fields[1][0], line_no, fields[1][1], path))
    if period is None:
        period = (t[-1] + (t[1] - t[0]) / 2.0) if len(t) > 1 else 0.0
    return DelayHistogram(bin_centers_ns=np.array(t), counts=np.array(c),
                          pulse_period_ns=period, n_pulses=n_pulses)


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())

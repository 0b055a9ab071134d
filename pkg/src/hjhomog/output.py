"""Deterministic CSV, SVG and manifest writing for experiment records.

Floats are written with 17 significant digits ('%.17g'), which round-trips
IEEE doubles exactly; NaN is written as the literal ``nan`` and infinities as
``inf`` / ``-inf``.  Lines end with LF.  The manifest is written last, through
a temporary file and an atomic rename, so its presence marks a complete run.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST = "manifest.json"


class OutputExists(FileExistsError):
    """The output directory already holds files and overwriting was not requested."""


@dataclass
class RunManifest:
    tool_version: str
    kind: str
    config_hash: str
    seed: int
    started: str
    finished: str
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    passed: bool = True
    wall_clock: float = 0.0
    replica_seeds: list = field(default_factory=list)


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def csv_text(table) -> str:
    lines = []

    class _Sink:
        def write(self, s):
            lines.append(s)

    w = csv.writer(_Sink(), lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError(f"row {row!r} does not match columns {table.columns!r}")
        w.writerow([format_value(v) for v in row])
    return "".join(lines)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def prepare_dir(path, force: bool = False) -> Path:
    """Create the output directory; refuse a non-empty one unless ``force``."""
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise NotADirectoryError(f"{path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()) and not force:
        raise OutputExists(f"{path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_outputs(record, out_dir, *, config_text: str | None = None, plot: bool = False,
                  started: str | None = None, force: bool = False) -> RunManifest:
    """Write one CSV per table (plus checks.csv, optional SVGs), then the manifest."""
    out = prepare_dir(out_dir, force)
    started = started or utc_now()
    written = []

    def emit(name, text):
        _write(out / name, text)
        written.append(name)

    if config_text is not None:
        emit("config.yaml", config_text)
    for name in sorted(record.tables):
        emit(f"{name}.csv", csv_text(record.tables[name]))
    checks = [(k, int(v)) for k, v in sorted(record.checks.items())]
    emit("checks.csv", csv_text(_Rows(("check", "passed"), checks)))
    if plot:
        for name, svg in sorted(plots_for(record).items()):
            emit(f"{name}.svg", svg)

    files = [{"name": n, "sha256": sha256_file(out / n), "bytes": (out / n).stat().st_size}
             for n in written]
    manifest = RunManifest(tool_version=__version__, kind=record.kind,
                           config_hash=record.config_hash, seed=record.seed, started=started,
                           finished=utc_now(), files=files,
                           checks={k: bool(v) for k, v in sorted(record.checks.items())},
                           passed=record.passed, wall_clock=record.wall_clock,
                           replica_seeds=[list(s) for s in record.replica_seeds])
    tmp = out / (MANIFEST + ".tmp")
    _write(tmp, json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / MANIFEST)
    return manifest


@dataclass
class _Rows:
    columns: tuple
    rows: list


# ---------------------------------------------------------------------------
# SVG


_W, _H, _PAD = 480, 360, 50


def _scale(vals, lo_px, hi_px, log):
    v = np.log10(vals) if log else np.asarray(vals, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    return lambda x: lo_px + (hi_px - lo_px) * ((np.log10(x) if log else x) - lo) / (hi - lo)


def scatter_svg(xs, ys, *, title: str, xlabel: str, ylabel: str, fit=None, log: bool = True) -> str:
    """Scatter plot with an optional power-law line y = exp(intercept) x^exponent."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    if log:
        ok &= (xs > 0) & (ys > 0)
    xs, ys = xs[ok], ys[ok]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
             f'<text x="14" y="{_H / 2}" font-size="12" transform="rotate(-90 14 {_H / 2})" '
             f'text-anchor="middle">{ylabel}</text>',
             f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
             f'fill="none" stroke="black"/>']
    if xs.size:
        yfit = None
        if fit is not None and math.isfinite(fit.exponent) and math.isfinite(fit.intercept):
            yfit = np.exp(fit.intercept) * xs ** fit.exponent
        yall = ys if yfit is None else np.concatenate([ys, yfit])
        sx = _scale(xs, _PAD, _W - _PAD, log)
        sy = _scale(yall, _H - _PAD, _PAD, log)
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="steelblue"/>')
        if yfit is not None:
            order = np.argsort(xs)
            pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs[order], yfit[order]))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="crimson"/>')
            parts.append(f'<text x="{_W - _PAD}" y="{_PAD - 6}" text-anchor="end" font-size="11">'
                         f'slope {fit.exponent:.3f}</text>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def heatmap_svg(values: np.ndarray, *, title: str) -> str:
    """Grayscale heatmap of a 2-D field, one rectangle per node (dark = small)."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    span = hi - lo if hi > lo else 1.0
    nx, ny = v.shape
    cell = max(1.0, min((_W - 2 * _PAD) / nx, (_H - 2 * _PAD) / ny))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell + 2 * _PAD:.0f}" '
             f'height="{ny * cell + 2 * _PAD:.0f}">',
             f'<text x="{_PAD}" y="20" font-size="14">{title}</text>']
    for i in range(nx):
        for j in range(ny):
            g = int(round(255 * (v[i, j] - lo) / span))
            parts.append(f'<rect x="{_PAD + i * cell:.2f}" y="{_PAD + (ny - 1 - j) * cell:.2f}" '
                         f'width="{cell:.2f}" height="{cell:.2f}" fill="rgb({g},{g},{g})"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def _column(table, name):
    k = table.columns.index(name)
    return np.array([row[k] for row in table.rows], dtype=float)


def plots_for(record) -> dict:
    """SVG plots appropriate to the record's kind, keyed by file stem."""
    t = record.tables
    out = {}
    needed = {"fluctuations": ("summary", "tail"), "bias": ("curve",), "cell_rate": ("summary",),
              "evolve_rate": ("summary",), "straszewicz": ("rows",), "metric": ("field",)}
    if not all(name in t for name in needed.get(record.kind, ())):
        return out
    if record.kind == "fluctuations":
        out["variance"] = scatter_svg(_column(t["summary"], "R"), _column(t["summary"], "variance"),
                                      title="variance of passage values", xlabel="R",
                                      ylabel="variance", fit=record.fits.get("variance"))
        out["tail"] = scatter_svg(_column(t["tail"], "lambda_sq"), _column(t["tail"], "log_frequency"),
                                  title="exceedance frequencies", xlabel="lambda^2",
                                  ylabel="log frequency", log=False)
    elif record.kind == "bias":
        out["bias"] = scatter_svg(_column(t["curve"], "R"), _column(t["curve"], "bias"),
                                  title="bias against R", xlabel="R", ylabel="bias",
                                  fit=record.fits.get("bias"))
    elif record.kind in ("cell_rate", "evolve_rate"):
        x = t["summary"].columns[0]
        name = "corrector" if record.kind == "cell_rate" else "homogenization"
        out[name] = scatter_svg(_column(t["summary"], x), _column(t["summary"], "mean"),
                                title=f"{name} error", xlabel=x, ylabel="mean error",
                                fit=record.fits.get(name))
    elif record.kind == "straszewicz":
        out["gap"] = scatter_svg(_column(t["rows"], "bound"), _column(t["rows"], "gap"),
                                 title="gap against bound", xlabel="diam^2 / r", ylabel="gap")
    elif record.kind == "metric" and "y" in t["field"].columns:
        xs, ys, m = (_column(t["field"], c) for c in ("x", "y", "m"))
        n = int(round(math.sqrt(len(m))))
        out["field"] = heatmap_svg(m.reshape(n, n), title="metric field")
    return out

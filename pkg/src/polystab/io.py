"""File formats: polygon and domain JSON, CSV/JSON/SVG outputs.

Every writer is atomic (temporary file in the target directory, then
``os.replace``), formats floats with 17 significant digits and records the
hash of the configuration that produced it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .geometry import DomainBoundary, Polygon


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    return p.read_text()


def read_json(path) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def polygon_from_data(data) -> Polygon:
    if isinstance(data, dict):
        if "vertices" not in data:
            raise ConfigError("polygon JSON needs a 'vertices' list")
        data = data["vertices"]
    return Polygon(np.asarray(data, float))


def load_polygon(path) -> Polygon:
    """Polygon from JSON (``{"vertices": [[x, y], ...]}``) or a two-column CSV."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        rows = [r for r in csv.reader(io.StringIO(_read_text(p))) if r and not r[0].startswith("#")]
        try:
            vals = [[float(a), float(b)] for a, b in rows]
        except ValueError:
            vals = [[float(a), float(b)] for a, b in rows[1:]]
        return Polygon(np.asarray(vals))
    return polygon_from_data(read_json(p))


def load_domain(path=None) -> DomainBoundary:
    """Domain boundary from JSON; ``None`` gives the unit circle."""
    if path is None:
        return DomainBoundary.circle()
    spec = read_json(path)
    return DomainBoundary.from_dict(spec)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return fmt(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _canonical(obj.tolist())
    return obj


def config_hash(config) -> str:
    """Short SHA-256 of a canonical JSON rendering of ``config``."""
    text = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def fmt(x: float) -> str:
    if x is None or not math.isfinite(x):
        return "nan" if x is None or math.isnan(x) else ("inf" if x > 0 else "-inf")
    return "%.17g" % x


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows, chash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, chash: str) -> Path:
    return write_atomic(path, csv_text(header, rows, chash))


_MARK = "\x00f:"


def _encode_floats(obj):
    if isinstance(obj, dict):
        return {str(k): _encode_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _encode_floats(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _MARK + ("%.17g" % x) if math.isfinite(x) else None
    return obj


def json_text(obj: dict, chash: str) -> str:
    data = {"config_hash": chash, **_encode_floats(obj)}
    text = json.dumps(data, indent=2, sort_keys=True)
    # unquote the marked floats so they appear as JSON numbers with 17 digits
    return _unmark(text) + "\n"


def _unmark(text: str) -> str:
    out = []
    token = json.dumps(_MARK)[:-1]  # opening quote plus escaped marker
    i = 0
    while True:
        j = text.find(token, i)
        if j < 0:
            out.append(text[i:])
            return "".join(out)
        end = text.find('"', j + len(token))
        out.append(text[i:j])
        out.append(text[j + len(token):end])
        i = end + 1


def write_json(path, obj: dict, chash: str) -> Path:
    return write_atomic(path, json_text(obj, chash))


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def svg_text(polygons: dict, boundary: DomainBoundary, chash: str, size: int = 480) -> str:
    """Overlay of named polygons inside the domain boundary."""
    curve = boundary.curve(np.linspace(0.0, 2.0 * np.pi, 361))
    lo = curve.min(axis=0)
    hi = curve.max(axis=0)
    span = float(max(hi - lo)) * 1.05
    mid = 0.5 * (lo + hi)

    def to_px(p):
        q = (np.asarray(p) - mid) / span * size + size / 2
        return [(float(x), float(size - y)) for x, y in q]

    def path(points, closed=True):
        pts = to_px(points)
        d = "M " + " L ".join(f"{x:.6f} {y:.6f}" for x, y in pts)
        return d + (" Z" if closed else "")

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f"<!-- config_hash={chash} -->",
        f'<path d="{path(curve[:-1])}" fill="none" stroke="#444" stroke-width="1"/>',
    ]
    for i, (name, poly) in enumerate(polygons.items()):
        color = _COLORS[i % len(_COLORS)]
        dash = ' stroke-dasharray="4 3"' if name == "initial" else ""
        lines.append(f'<path d="{path(poly.vertices)}" fill="none" stroke="{color}" stroke-width="1.5"{dash}>'
                     f"<title>{name}</title></path>")
        lines.append(f'<text x="8" y="{18 + 16 * i}" fill="{color}" font-size="13">{name}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path, polygons: dict, boundary: DomainBoundary, chash: str) -> Path:
    return write_atomic(path, svg_text(polygons, boundary, chash))

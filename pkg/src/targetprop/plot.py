"""Learning curves as a standalone SVG: train dashed, test solid, one colour per run."""
import csv
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import FormatError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 60, "right": 170, "top": 20, "bottom": 45}


def read_metrics(path):
    """``{"epoch": [...], "train": [...], "test": [...]}`` from a metrics.csv file.

    Uses the error columns when they are filled, the loss columns otherwise.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        need = ("epoch", "train_err", "test_err", "train_loss", "test_loss")
        if header is None or any(k not in header for k in need):
            raise FormatError(f"{path}: line 1: missing metrics header")
        col = {k: header.index(k) for k in need}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append({k: (float(row[i]) if row[i] != "" else None) for k, i in col.items()})
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-numeric value") from None
    use_err = bool(rows) and all(r["test_err"] is not None for r in rows)
    tr, te = ("train_err", "test_err") if use_err else ("train_loss", "test_loss")
    return {
        "epoch": [r["epoch"] for r in rows],
        "train": [r[tr] for r in rows],
        "test": [r[te] for r in rows],
        "ylabel": "error (%)" if use_err else "loss",
    }


def _nice_range(lo, hi):
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.02 * (hi - lo)
    return lo - pad, hi + pad


def render_svg(series, title=""):
    """``series``: list of ``(label, metrics_dict)``; returns SVG text."""
    xs = [x for _, m in series for x in m["epoch"]]
    ys = [y for _, m in series for k in ("train", "test") for y in m[k] if y is not None]
    x0, x1 = _nice_range(min(xs, default=0.0), max(xs, default=1.0))
    y0, y1 = _nice_range(min(ys, default=0.0), max(ys, default=1.0))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}"'
        f' data-xmin="{x0!r}" data-xmax="{x1!r}" data-ymin="{y0!r}" data-ymax="{y1!r}">',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN["left"]}" y="14" font-size="12">{escape(title)}</text>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{px(xv):.1f}" y="{HEIGHT - MARGIN["bottom"] + 16}" font-size="10" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(yv) + 3:.1f}" font-size="10" text-anchor="end">{yv:.3g}</text>')
    ylabel = series[0][1].get("ylabel", "") if series else ""
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 8}" font-size="11" text-anchor="middle">epoch</text>')
    out.append(f'<text x="14" y="{MARGIN["top"] + ph / 2:.1f}" font-size="11" transform="rotate(-90 14 {MARGIN["top"] + ph / 2:.1f})" text-anchor="middle">{escape(ylabel)}</text>')
    for n, (label, m) in enumerate(series):
        color = PALETTE[n % len(PALETTE)]
        for kind, dash in (("train", ' stroke-dasharray="5,4"'), ("test", "")):
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(m["epoch"], m[kind]) if y is not None)
            out.append(f'<polyline class="{kind}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 18 * n
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}" font-size="11">{escape(label)}</text>')
    ly = MARGIN["top"] + 14 + 18 * len(series) + 6
    lx = WIDTH - MARGIN["right"] + 12
    out.append(f'<text x="{lx}" y="{ly + 4}" font-size="10" fill="#555">dashed: train, solid: test</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_metrics(paths, out_svg, title=""):
    if not paths:
        raise FormatError("plot needs at least one metrics file")
    series = [(Path(p).parent.name if Path(p).stem == "metrics" else Path(p).stem, read_metrics(p)) for p in paths]
    text = render_svg(series, title)
    Path(out_svg).write_text(text)
    return text

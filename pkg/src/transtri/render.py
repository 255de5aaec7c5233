"""Figure and mesh artifact writers (SVG for the plane, OBJ for space).

Edges are curved after perturbation, so the SVG samples each edge as a
polyline.  All writers go through a temp file and an atomic rename.
"""

import os
import tempfile

import numpy as np

__all__ = ["atomic_write", "write_svg", "write_obj", "write_curve_csv"]


def atomic_write(path, text):
    """Write text to path via temp file + rename, never leaving partials."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _edge_polyline(state, s, samples):
    b, A = state.realization.simplex_frame(s)
    return np.array([state.eval_eta(b + A @ np.array([u]))
                     for u in np.linspace(0.0, 1.0, samples)])


def write_svg(path, state, h=None, report=None, edge_samples=16, size=800):
    """Plane figure: perturbed mesh edges, map image, intersection marks."""
    lo, hi = state.realization.bbox()
    span = float(max(hi - lo))
    pad = 0.06 * span
    lo = lo - pad
    width = span + 2 * pad

    def pix(p):
        x = (p[0] - lo[0]) / width * size
        y = size - (p[1] - lo[1]) / width * size
        return f"{x:.2f},{y:.2f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for s in state.complex.by_dim(1):
        pts = _edge_polyline(state, s, edge_samples)
        parts.append('<polyline fill="none" stroke="#444" stroke-width="1" points="'
                     + " ".join(pix(p) for p in pts) + '"/>')
    for v in state.realization.vertex_ids:
        p = state.eval_eta(state.realization.point(v))
        parts.append(f'<circle cx="{pix(p).split(",")[0]}" cy="{pix(p).split(",")[1]}" '
                     f'r="2" fill="#888"/>')
    if h is not None:
        ys = h.sample_domain(512) if h.domain.kind != "point" else h.sample_domain(1)
        img = h.eval_batch(ys)
        if img.shape[0] > 1:
            closed = h.domain.kind == "interval" and h.domain.periodic
            pts = np.vstack([img, img[:1]]) if closed else img
            parts.append('<polyline fill="none" stroke="#1f6fd6" stroke-width="1.5" points="'
                         + " ".join(pix(p) for p in pts) + '"/>')
        else:
            parts.append(f'<circle cx="{pix(img[0]).split(",")[0]}" '
                         f'cy="{pix(img[0]).split(",")[1]}" r="4" fill="#1f6fd6"/>')
    if report is not None:
        color = {"transverse": "#2d9b38", "tangent": "#e08b00", "skeleton-hit": "#d62718"}
        for r in report.records:
            c = pix(np.array(r.point))
            x, y = c.split(",")
            parts.append(f'<circle cx="{x}" cy="{y}" r="3" fill="none" '
                         f'stroke="{color[r.classification]}" stroke-width="1.5"/>')
    parts.append("</svg>")
    atomic_write(path, "\n".join(parts) + "\n")


def write_obj(path, state):
    """Space mesh: perturbed vertices, one face line per 2-simplex."""
    vids = state.realization.vertex_ids
    remap = {v: i + 1 for i, v in enumerate(vids)}
    lines = []
    for v in vids:
        p = state.eval_eta(state.realization.point(v))
        lines.append("v " + " ".join(f"{c:.12g}" for c in p))
    for s in state.complex.by_dim(2):
        lines.append("f " + " ".join(str(remap[v]) for v in s.vertices))
    atomic_write(path, "\n".join(lines) + "\n")


def write_curve_csv(path, h, density=256):
    """Samples of the map image, one row per parameter point."""
    ys = h.sample_domain(density) if h.domain.kind != "point" else h.sample_domain(1)
    img = h.eval_batch(ys)
    n = ys.shape[1]
    header = ",".join([f"y{i}" for i in range(n)] + [f"x{i}" for i in range(img.shape[1])])
    rows = [header]
    for y, p in zip(ys, img):
        rows.append(",".join([repr(float(c)) for c in y] + [repr(float(c)) for c in p]))
    atomic_write(path, "\n".join(rows) + "\n")

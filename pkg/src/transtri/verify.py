"""Numerical transversality certification.

Finds intersections of a parametric map with the embedded open simplices
of a triangulation state by grid-seeded Gauss-Newton refinement, tests
the spanning (rank) condition on the combined differentials, and runs
smoothness and Jacobian diagnostics.

Verdicts are threshold-relative.  A root of |h(y) - f(t)| below the solve
tolerance counts as an intersection; when the domain dimensions cannot
span the ambient space (n + l < m) transversality demands separation, and
the stricter clearance threshold applies.  At an intersection where
spanning is possible, the test is that the column-normalized matrix
[dh | df] has its m-th singular value above tol_rank.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import bump
from .config import PipelineConfig
from .simplicial import Simplex, simplex_sort_key

log = logging.getLogger(__name__)

__all__ = [
    "IntersectionRecord",
    "SimplexStatus",
    "TransversalityReport",
    "Patch",
    "simplex_patch",
    "patch_roots",
    "interior_lattice",
    "find_intersections",
    "check_transverse_at",
    "transversality_margin",
    "verify_triangulation",
    "fd_jacobian",
    "fd_jacobian_check",
    "boundary_decay_check",
    "min_distance_to_image",
    "boundary_crossing_counts",
    "report_to_csv",
    "report_summary",
]


# ---------------------------------------------------------------------------
# rank condition


def transversality_margin(dh, df):
    """Smallest singular value of the column-normalized [dh | df].

    Returns 0.0 when the combined columns cannot span the row space.
    Invariant under rescaling of individual columns.
    """
    dh = np.asarray(dh, float)
    df = np.asarray(df, float)
    if dh.shape[0] != df.shape[0]:
        raise ValueError("row counts differ")
    m = dh.shape[0]
    cols = np.hstack([dh, df])
    if cols.shape[1] < m:
        return 0.0
    norms = np.linalg.norm(cols, axis=0)
    norms[norms == 0.0] = 1.0
    sv = np.linalg.svd(cols / norms, compute_uv=False)
    return float(sv[m - 1])


def check_transverse_at(dh, df, tol_rank):
    """Spanning test for the differentials at a common image point."""
    return transversality_margin(dh, df) >= tol_rank


# ---------------------------------------------------------------------------
# embedded patches and root finding


@dataclass(frozen=True, eq=False)
class Patch:
    """A parametric patch t -> R^m over the standard l-simplex."""

    l: int
    eval: object
    jac: object


def simplex_patch(state, s):
    """The current embedding of a simplex: eta composed with its frame."""
    b, A = state.realization.simplex_frame(s)

    def ev(t):
        return state.eval_eta(b + A @ np.asarray(t, float))

    def ja(t):
        _, J = state.eval_eta_with_jacobian(b + A @ np.asarray(t, float))
        return J @ A

    return Patch(l=s.dim, eval=ev, jac=ja)


def interior_lattice(l, per_dim):
    """Strictly interior lattice points of the standard l-simplex."""
    if l == 0:
        return [np.zeros(0)]
    n = per_dim + l
    pts = []

    def rec(prefix, remaining):
        if len(prefix) == l:
            pts.append(np.array(prefix, float) / n)
            return
        for i in range(1, remaining):
            rec(prefix + [i], remaining - i)

    rec([], n)
    return pts


def _simplex_seed_count(config, l):
    return max(2, config.simplex_seed_density // max(1, 2 ** (l - 1))) if l else 0


def _domain_seeds(h, config):
    if h.domain.kind == "point":
        return h.sample_domain(1)
    if h.domain.kind == "interval":
        lo, hi = h.domain.lo[0], h.domain.hi[0]
        n = max(4, int(round(config.curve_density * (hi - lo))))
        return h.sample_domain(n)
    return h.sample_domain(config.surface_density)


def _gauss_newton(h, patch, y0, t0, config, scale):
    """Refine a seed toward h(y) = f(t); returns (y, t, residual) or None."""
    y = np.array(y0, float)
    t = np.array(t0, float)
    n = y.size
    best = None
    best_r = np.inf
    stall = 0
    step_cap = 0.75 * scale
    for _ in range(config.gn_max_iter):
        r = h.eval_raw(y) - patch.eval(t)
        rn = float(np.linalg.norm(r))
        if rn < 0.9999 * best_r:
            stall = 0
        else:
            stall += 1
        if rn < best_r:
            best, best_r = (y.copy(), t.copy()), rn
        if rn < 1e-14 or stall >= 3:
            break
        if rn > 50.0 * (best_r + scale):
            return None
        J = np.hstack([h.jacobian_raw(y), -patch.jac(t)]) if n + patch.l > 0 else None
        if J is None or J.size == 0:
            break
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        sn = float(np.linalg.norm(step))
        if sn > step_cap:
            step *= step_cap / sn
        y = y + step[:n]
        t = t + step[n:]
        y = h.domain.wrap(y)
        if patch.l and np.any(np.abs(t) > 10.0):
            return None
        if sn < 1e-15:
            break
    if best is None:
        return None
    y, t = best
    if not h.domain.contains(y, tol=1e-6 * (1.0 + scale)):
        return None
    return y, t, best_r


def _pair_seeds(h, patch, config, scale, hy_cache=None, t_per_dim=None):
    """Seed (y, t) pairs whose images are close enough to share a root.

    At most a handful of map-parameter seeds are kept per simplex seed;
    extra seeds in the same basin only repeat the refinement.
    """
    ys = _domain_seeds(h, config) if hy_cache is None else hy_cache[0]
    hy = h.eval_batch(ys) if hy_cache is None else hy_cache[1]
    if t_per_dim is None:
        t_per_dim = _simplex_seed_count(config, patch.l)
    ts = interior_lattice(patch.l, t_per_dim)
    ft = np.array([patch.eval(t) for t in ts])
    gap = 0.0
    if len(hy) > 1:
        gap = float(np.linalg.norm(np.diff(hy, axis=0), axis=1).max())
    t_gap = scale / max(1, t_per_dim) if patch.l else 0.0
    prune = 1.5 * (gap + t_gap) + 1e-9
    d = np.linalg.norm(hy[:, None, :] - ft[None, :, :], axis=2)
    pairs = []
    for it in range(len(ts)):
        col = d[:, it]
        keep = np.nonzero(col <= prune)[0]
        if keep.size > 6:
            keep = keep[np.argsort(col[keep])[:6]]
        pairs.extend((int(iy), it) for iy in keep)
    return ys, ts, pairs, float(d.min()) if d.size else np.inf


def _inside_closed_simplex(t, slack=1e-6):
    t = np.asarray(t, float)
    if t.size == 0:
        return True
    return float(t.min()) >= -slack and float(t.sum()) <= 1.0 + slack


def patch_roots(h, patch, config, scale, hy_cache=None, t_per_dim=None):
    """Gauss-Newton roots of h(y) = patch(t) from pruned grid seeds.

    Returns (roots, min_residual) with roots deduplicated in parameter
    space; every converged local minimum is reported, thresholding is the
    caller's business.  Refinements that leave the closed parameter
    simplex are dropped: a root on the line extension of the patch says
    nothing about the patch (its own face or neighbor owns that point).
    min_residual includes the coarse seed distances, so it is meaningful
    even when no seed pair survives pruning.
    """
    ys, ts, pairs, coarse = _pair_seeds(h, patch, config, scale, hy_cache, t_per_dim)
    roots = []
    min_resid = coarse
    for iy, it in pairs:
        out = _gauss_newton(h, patch, ys[iy], ts[it], config, scale)
        if out is None:
            log.debug("seed (y=%s, t=%s) discarded: refinement left the domain "
                      "or diverged", ys[iy], ts[it])
            continue
        y, t, resid = out
        if not _inside_closed_simplex(t):
            log.debug("root at t=%s discarded: outside the closed simplex", t)
            continue
        min_resid = min(min_resid, resid)
        roots.append((y, t, resid))
    roots.sort(key=lambda r: r[2])
    return _cluster(roots, config.dedupe_radius, _domain_period(h)), float(min_resid)


def _param_dist(a, b, y_period):
    dy = np.asarray(a[0]) - np.asarray(b[0])
    if y_period is not None and dy.size:
        dy = np.abs(dy) % y_period
        dy = np.minimum(dy, y_period - dy)
    dt = np.asarray(a[1]) - np.asarray(b[1])
    return float(np.sqrt(np.sum(dy ** 2) + np.sum(dt ** 2)))


def _cluster(items, radius, y_period=None):
    """Greedy dedupe of (y, t, ...) parameter tuples.

    Periodic parameter axes fold, so roots found from both sides of the
    seam collapse to one record.
    """
    kept = []
    for it in items:
        if any(_param_dist(it, k, y_period) <= radius for k in kept):
            continue
        kept.append(it)
    return kept


def _domain_period(h):
    if h.domain.kind == "interval" and h.domain.periodic:
        return h.domain.hi[0] - h.domain.lo[0]
    return None


# ---------------------------------------------------------------------------
# records and per-simplex search


@dataclass(frozen=True, eq=False)
class IntersectionRecord:
    """One located intersection, attributed to a carrier simplex."""

    simplex: Simplex
    y: tuple
    t: tuple
    point: tuple
    residual: float
    margin: float
    classification: str  # transverse | tangent | skeleton-hit


def _face_and_coords(s, t, tol):
    """Carrier face of a parameter point and its coordinates there.

    Barycentric coordinates below tol drop the corresponding vertices;
    coordinates of the root inside the face are renormalized.
    """
    t = np.asarray(t, float)
    lam = np.concatenate([[1.0 - t.sum()], t])
    lam = np.clip(lam, 0.0, None)
    keep = [i for i, v in enumerate(lam) if v > tol]
    if not keep:
        keep = [int(np.argmax(lam))]
    face = Simplex(tuple(s.vertices[i] for i in keep))
    sub = lam[keep]
    sub = sub / sub.sum()
    return face, sub[1:]


def _make_record(state, h, s, y, t, resid, config):
    """Classify a root and attribute it to the carrier face of s."""
    tol = config.barycentric_tol
    lam_min = min(1.0 - float(np.sum(t)), float(np.min(t))) if s.dim else 0.0
    if s.dim and lam_min < -1e-8:
        return None  # converged outside this simplex; owned by a neighbor
    face, t_face = _face_and_coords(s, t, tol) if s.dim else (s, np.zeros(0))
    n = h.domain.dim
    m = state.ambient_dim
    b, A = state.realization.simplex_frame(face)
    base_pt = b + (A @ t_face if face.dim else 0.0)
    point, Jeta = state.eval_eta_with_jacobian(base_pt)
    if n + face.dim < m:
        margin = 0.0
        cls = "skeleton-hit"
    else:
        dh = h.jacobian_raw(y)
        df = Jeta @ A
        margin = transversality_margin(dh, df)
        cls = "transverse" if margin >= config.tol_rank else "tangent"
    return IntersectionRecord(
        simplex=face,
        y=tuple(float(v) for v in np.atleast_1d(y)),
        t=tuple(float(v) for v in t_face),
        point=tuple(float(v) for v in point),
        residual=float(resid),
        margin=float(margin),
        classification=cls,
    )


def find_intersections(state, s, h, config=None, hy_cache=None):
    """Roots of h(y) = eta(iota_s(t)) with t in the closed simplex.

    Returns (records, min_residual).  Roots landing on the simplex
    boundary are attributed to the corresponding face.  The intersection
    threshold is the solve tolerance when spanning is possible and the
    clearance threshold when it is not; min_residual reports the best
    approach found (used for vertex distance diagnostics).
    """
    config = config or PipelineConfig()
    n = h.domain.dim
    m = state.ambient_dim
    patch = simplex_patch(state, s)
    t_per_dim = _simplex_seed_count(config, s.dim)
    if n + s.dim > m:
        # intersections come in positive-dimensional families; a sparse
        # sample of the family is enough for the rank verdict
        t_per_dim = max(2, t_per_dim // 4)
    roots, min_resid = patch_roots(h, patch, config, state.mesh_scale, hy_cache, t_per_dim)
    threshold = config.solve_tol if n + s.dim >= m else config.vertex_clearance
    records = []
    for y, t, resid in roots:
        if resid >= threshold:
            continue
        rec = _make_record(state, h, s, y, t, resid, config)
        if rec is not None:
            records.append(rec)
    return records, min_resid


# ---------------------------------------------------------------------------
# whole-triangulation verification


@dataclass(frozen=True, eq=False)
class SimplexStatus:
    simplex: Simplex
    passed: bool
    records: tuple
    min_distance: float | None = None  # populated for vertices


@dataclass(frozen=True, eq=False)
class TransversalityReport:
    passed: bool
    statuses: dict
    records: tuple
    diagnostics: dict

    def status(self, s):
        return self.statuses[s]


def verify_triangulation(state, h, config=None):
    """Transversality verdict for every simplex of the complex.

    A simplex with n + l < m passes when no intersection is found (and,
    for vertices, when the map image keeps its distance); otherwise it
    passes when every attributed intersection is transverse.
    """
    config = config or PipelineConfig()
    n = h.domain.dim
    m = state.ambient_dim
    cplx = state.complex
    ys = _domain_seeds(h, config)
    hy_cache = (ys, h.eval_batch(ys))
    by_simplex = {}
    vertex_dist = {}
    for s in sorted(cplx.simplices, key=simplex_sort_key):
        records, min_resid = find_intersections(state, s, h, config, hy_cache)
        for rec in records:
            by_simplex.setdefault(rec.simplex, []).append(rec)
        if s.dim == 0:
            vertex_dist[s] = min_resid
    statuses = {}
    all_records = []
    period = _domain_period(h)
    for s in sorted(cplx.simplices, key=simplex_sort_key):
        recs = _cluster([(np.array(r.y), np.array(r.t), r) for r in by_simplex.get(s, [])],
                        config.dedupe_radius, period)
        recs = tuple(r for _, _, r in recs)
        all_records.extend(recs)
        if n + s.dim < m:
            ok = len(recs) == 0
            if s.dim == 0 and vertex_dist.get(s, np.inf) <= config.vertex_clearance:
                ok = False
        else:
            ok = all(r.classification == "transverse" for r in recs)
        statuses[s] = SimplexStatus(
            simplex=s, passed=ok, records=recs,
            min_distance=vertex_dist.get(s) if s.dim == 0 else None,
        )
    margins = [r.margin for r in all_records if r.classification == "transverse"]
    finite_dists = [d for d in vertex_dist.values() if np.isfinite(d)]
    diagnostics = {
        "n_records": len(all_records),
        "n_transverse": sum(r.classification == "transverse" for r in all_records),
        "n_tangent": sum(r.classification == "tangent" for r in all_records),
        "n_skeleton_hits": sum(r.classification == "skeleton-hit" for r in all_records),
        "min_margin": min(margins) if margins else None,
        "min_vertex_distance": min(finite_dists) if finite_dists else None,
    }
    passed = all(st.passed for st in statuses.values())
    return TransversalityReport(
        passed=passed,
        statuses=statuses,
        records=tuple(all_records),
        diagnostics=diagnostics,
    )


def min_distance_to_image(h, point, config=None):
    """Refined minimum distance from a fixed point to the image of h."""
    config = config or PipelineConfig()

    class _Const:
        l = 0

        @staticmethod
        def eval(t):
            return np.asarray(point, float)

        @staticmethod
        def jac(t):
            return np.zeros((np.asarray(point).size, 0))

    best = np.inf
    ys = _domain_seeds(h, config)
    hy = h.eval_batch(ys)
    d = np.linalg.norm(hy - np.asarray(point, float), axis=1)
    order = np.argsort(d)[: max(3, d.size // 8)]
    for i in order:
        out = _gauss_newton(h, _Const, ys[i], np.zeros(0), config, 1.0)
        if out is not None:
            best = min(best, out[2])
    return float(min(best, d.min() if d.size else np.inf))


def boundary_crossing_counts(cplx, report):
    """Transverse crossings on the boundary edges of each 2-simplex.

    For a closed curve avoiding the 0-skeleton, each count is even.
    """
    counts = {}
    for s in cplx.by_dim(2):
        edges = [Simplex(e) for e in
                 [(s.vertices[0], s.vertices[1]), (s.vertices[0], s.vertices[2]),
                  (s.vertices[1], s.vertices[2])]]
        c = 0
        for e in edges:
            st = report.statuses.get(e)
            if st is not None:
                c += sum(r.classification == "transverse" for r in st.records)
        counts[s] = c
    return counts


# ---------------------------------------------------------------------------
# Jacobian and smoothness diagnostics


def fd_jacobian(f, x, step=None):
    """Central finite-difference Jacobian of f at x."""
    x = np.asarray(x, float)
    fx = np.asarray(f(x), float)
    J = np.zeros((fx.size, x.size))
    for j in range(x.size):
        h = step if step is not None else 1e-6 * (1.0 + abs(float(x[j])))
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        J[:, j] = (np.asarray(f(xp), float) - np.asarray(f(xm), float)) / (2.0 * h)
    return J


def fd_jacobian_check(f, jac, points, step=None):
    """Max relative Frobenius error of the analytic Jacobian vs central
    differences over the given points."""
    worst = 0.0
    for x in points:
        Ja = np.asarray(jac(np.asarray(x, float)), float)
        Jn = fd_jacobian(f, x, step)
        denom = max(np.linalg.norm(Ja), 1e-30)
        worst = max(worst, float(np.linalg.norm(Ja - Jn) / denom))
    return worst


def _fd_tensor(f, t, order, h):
    """Nested central differences: order-j derivative tensor of f at t."""
    if order == 0:
        return np.asarray(f(t), float)
    t = np.asarray(t, float)
    slices = []
    for j in range(t.size):
        tp = t.copy(); tp[j] += h
        tm = t.copy(); tm[j] -= h
        d = (_fd_tensor(f, tp, order - 1, h) - _fd_tensor(f, tm, order - 1, h)) / (2.0 * h)
        slices.append(d)
    return np.stack(slices, axis=-1)


def boundary_decay_check(pert, max_i=3, max_j=3, n_rays=10, n_steps=8, required_drop=1e-6):
    """Decay of rho^(-i) * |grad^j s| along rays toward the simplex boundary.

    Walks geometrically spaced points from the barycenter toward boundary
    targets and records the first and last ratios for each (i, j).  The
    check passes when the final ratio fell below required_drop times the
    initial one; exact underflow to zero counts as a pass.
    Returns {(i, j): (initial, final, passed)} plus an overall 'passed'.
    """
    l = pert.chart.l
    if l < 1:
        raise ValueError("decay check needs a positive-dimensional simplex")
    bary = np.full(l, 1.0 / (l + 1))
    verts = [np.zeros(l)] + [np.eye(l)[i] for i in range(l)]
    targets = list(verts)
    if l >= 2:
        # facet barycenters, then skewed facet points until rays run out
        for k in range(l + 1):
            pts = [verts[i] for i in range(l + 1) if i != k]
            targets.append(np.mean(pts, axis=0))
        i = 0
        while len(targets) < n_rays:
            k = i % (l + 1)
            pts = [verts[j] for j in range(l + 1) if j != k]
            w = np.roll(np.arange(1.0, len(pts) + 1.0), i)
            targets.append(sum(wi * p for wi, p in zip(w / w.sum(), pts)))
            i += 1
    seen = set()
    rays = []
    for q in targets[:n_rays]:
        key = tuple(np.round(q, 12))
        if key not in seen:
            seen.add(key)
            rays.append(q)

    def s_func(t):
        return pert.shift(t)

    table = {}
    overall = True
    for i in range(max_i + 1):
        for j in range(max_j + 1):
            first = last = None
            for q in rays:
                ratios = []
                for k in range(n_steps + 1):
                    u = 1.0 - 0.5 ** k
                    t = bary + u * (q - bary)
                    rho_val = bump.rho_l(t)
                    if rho_val <= 0.0:
                        ratios.append(0.0)
                        continue
                    if j == 0:
                        norm = float(np.linalg.norm(pert.shift(t)))
                    else:
                        tens = _fd_tensor(s_func, t, j, 1e-6)
                        norm = float(np.abs(tens).max())
                    if norm == 0.0:
                        ratios.append(0.0)
                    else:
                        expo = np.log(norm) - i * np.log(rho_val)
                        ratios.append(float(np.exp(min(expo, 700.0))))
                if first is None:
                    first, last = ratios[0], ratios[-1]
                else:
                    first = max(first, ratios[0])
                    last = max(last, ratios[-1])
            ok = last == 0.0 or (first > 0.0 and last < required_drop * first)
            table[(i, j)] = (first, last, ok)
            overall = overall and ok
    table["passed"] = overall
    return table


# ---------------------------------------------------------------------------
# report serialization


def report_to_csv(report):
    """One row per intersection record."""
    lines = ["simplex;dim;classification;residual;margin;y;t;point"]
    for r in sorted(report.records, key=lambda r: simplex_sort_key(r.simplex)):
        lines.append(";".join([
            "-".join(str(v) for v in r.simplex.vertices),
            str(r.simplex.dim),
            r.classification,
            repr(r.residual),
            repr(r.margin),
            "|".join(repr(v) for v in r.y),
            "|".join(repr(v) for v in r.t),
            "|".join(repr(v) for v in r.point),
        ]))
    return "\n".join(lines) + "\n"


def report_summary(report):
    """Human-readable structured-text summary."""
    d = report.diagnostics
    lines = [
        f"result: {'PASS' if report.passed else 'FAIL'}",
        f"simplices: {len(report.statuses)}",
        f"records: {d['n_records']} (transverse {d['n_transverse']},"
        f" tangent {d['n_tangent']}, skeleton-hit {d['n_skeleton_hits']})",
        f"min-crossing-margin: {d['min_margin']!r}",
        f"min-vertex-distance: {d['min_vertex_distance']!r}",
    ]
    failing = [s for s, st in sorted(report.statuses.items(), key=lambda kv: simplex_sort_key(kv[0]))
               if not st.passed]
    lines.append(f"failing-simplices: {len(failing)}")
    for s in failing:
        st = report.statuses[s]
        kinds = ",".join(sorted({r.classification for r in st.records})) or "separation"
        lines.append(f"  {'-'.join(str(v) for v in s.vertices)} dim={s.dim} cause={kinds}")
    return "\n".join(lines) + "\n"

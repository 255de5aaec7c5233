"""Abstract and geometric simplicial complexes.

Construction from top simplices with automatic face closure, skeleta,
stars, barycenters, barycentric subdivision, point location with
barycentric coordinates, grid mesh generators (Freudenthal/Kuhn splits
of squares and cubes), and a small OFF-style text format for mesh
import/export.

All types are immutable after construction and safe for concurrent reads.
"""

from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np

from .errors import MeshError

__all__ = [
    "Simplex",
    "SimplicialComplex",
    "GeometricRealization",
    "PointLocation",
    "build_complex",
    "skeleton",
    "star",
    "barycenter",
    "barycentric_subdivision",
    "point_locate",
    "locate_in_simplex",
    "grid_triangulation",
    "write_mesh",
    "read_mesh",
    "simplex_sort_key",
]


@dataclass(frozen=True, order=True)
class Simplex:
    """A simplex as a strictly increasing tuple of vertex ids."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple(int(v) for v in self.vertices)
        if len(vs) == 0:
            raise MeshError("empty simplex")
        if any(b <= a for a, b in zip(vs, vs[1:])):
            raise MeshError(f"vertex ids must be strictly increasing, got {vs}")
        object.__setattr__(self, "vertices", vs)

    @property
    def dim(self):
        return len(self.vertices) - 1

    def faces(self):
        """All nonempty faces, including the simplex itself."""
        for k in range(1, len(self.vertices) + 1):
            for combo in combinations(self.vertices, k):
                yield Simplex(combo)

    def proper_faces(self):
        for k in range(1, len(self.vertices)):
            for combo in combinations(self.vertices, k):
                yield Simplex(combo)

    def has_face(self, other):
        return set(other.vertices) <= set(self.vertices)


def simplex_sort_key(s):
    return (s.dim, s.vertices)


class SimplicialComplex:
    """A finite simplicial complex, closed under taking faces.

    Use :func:`build_complex` to construct one from top simplices; the
    constructor trusts its input to already be face-closed.
    """

    def __init__(self, simplices):
        simplices = frozenset(simplices)
        if not simplices:
            raise MeshError("complex needs at least one simplex")
        self._simplices = simplices
        by_dim = {}
        for s in simplices:
            by_dim.setdefault(s.dim, []).append(s)
        self._by_dim = {d: tuple(sorted(v)) for d, v in by_dim.items()}
        self.dim = max(self._by_dim)
        self.vertex_ids = tuple(sorted(s.vertices[0] for s in self._by_dim.get(0, ())))
        self._tops = None

    @property
    def simplices(self):
        return self._simplices

    def by_dim(self, l):
        return self._by_dim.get(l, ())

    def top_simplices(self):
        """Maximal simplices (those that are faces of nothing bigger).

        In a face-closed complex a simplex is maximal iff it never occurs
        as a facet of another simplex, which keeps this linear.
        """
        if self._tops is None:
            facet_of_something = set()
            for s in self._simplices:
                if s.dim == 0:
                    continue
                for fv in combinations(s.vertices, len(s.vertices) - 1):
                    facet_of_something.add(fv)
            self._tops = tuple(s for s in sorted(self._simplices, key=simplex_sort_key)
                               if s.vertices not in facet_of_something)
        return self._tops

    def __contains__(self, s):
        return s in self._simplices

    def __len__(self):
        return len(self._simplices)

    def counts(self):
        """Number of simplices per dimension, as a dict."""
        return {d: len(v) for d, v in self._by_dim.items()}


def build_complex(vertex_count, top_simplices):
    """Build a complex from top simplices, generating all faces.

    Raises MeshError for out-of-range vertex ids or duplicate top
    simplices (the report lists every duplicate).
    """
    raw_tops = [tuple(int(v) for v in t) for t in top_simplices]
    for raw in raw_tops:
        if len(set(raw)) != len(raw):
            raise MeshError(f"repeated vertex id inside simplex {raw}")
    tops = [Simplex(tuple(sorted(raw))) for raw in raw_tops]
    seen, dupes = set(), []
    for t in tops:
        if t in seen and t.vertices not in dupes:
            dupes.append(t.vertices)
        seen.add(t)
    if dupes:
        raise MeshError(f"duplicate top simplices: {sorted(dupes)}")
    bad = [t.vertices for t in tops if t.vertices[-1] >= vertex_count or t.vertices[0] < 0]
    if bad:
        raise MeshError(f"vertex ids out of range 0..{vertex_count - 1}: {bad}")
    closure = set()
    for t in tops:
        closure.update(t.faces())
    return SimplicialComplex(closure)


def skeleton(cplx, l):
    """Subcomplex of all simplices of dimension <= l."""
    if not 0 <= l <= cplx.dim:
        raise MeshError(f"skeleton dimension {l} out of range 0..{cplx.dim}")
    return SimplicialComplex(s for s in cplx.simplices if s.dim <= l)


def star(cplx, s):
    """All simplices having s as a face (the open-star index set).

    A point belongs to the open star exactly when the carrier simplex of
    its location (see :func:`point_locate`) is a member of this set.
    """
    if s not in cplx:
        raise MeshError(f"simplex {s.vertices} not in complex")
    sset = set(s.vertices)
    return frozenset(o for o in cplx.simplices if sset <= set(o.vertices))


class GeometricRealization:
    """Vertex coordinates in R^m for a complex.

    Checks that every top simplex is affinely independent (faces inherit
    independence).  Interior disjointness is a desk-scale sampling check
    left to the test suite, not the constructor.
    """

    def __init__(self, coords, cplx=None):
        self._coords = {int(v): np.asarray(p, dtype=float) for v, p in coords.items()}
        dims = {p.shape for p in self._coords.values()}
        if len(dims) != 1:
            raise MeshError("inconsistent coordinate dimensions")
        (shape,) = dims
        if len(shape) != 1:
            raise MeshError("coordinates must be flat vectors")
        self.ambient_dim = shape[0]
        if cplx is not None:
            self._validate(cplx)

    def _validate(self, cplx):
        missing = [v for v in cplx.vertex_ids if v not in self._coords]
        if missing:
            raise MeshError(f"vertices without coordinates: {missing}")
        by_d = {}
        for s in cplx.top_simplices():
            if s.dim >= 1:
                by_d.setdefault(s.dim, []).append(s)
        for d, group in by_d.items():
            mats = np.stack([self.simplex_frame(s)[1] for s in group])
            scale = max(1.0, float(np.abs(mats).max()))
            sv = np.linalg.svd(mats, compute_uv=False)
            bad = np.nonzero(sv[:, -1] <= 1e-12 * scale)[0]
            if bad.size:
                s = group[int(bad[0])]
                raise MeshError(f"degenerate simplex {s.vertices}: vertices affinely dependent")

    def point(self, v):
        return self._coords[v]

    @property
    def vertex_ids(self):
        return tuple(sorted(self._coords))

    def simplex_points(self, s):
        return np.array([self._coords[v] for v in s.vertices])

    def simplex_frame(self, s):
        """Affine frame (b, A): the map t -> b + A t carries the standard
        simplex onto the realized simplex, vertices to vertices."""
        pts = self.simplex_points(s)
        b = pts[0]
        A = (pts[1:] - b).T if s.dim > 0 else np.zeros((self.ambient_dim, 0))
        return b, A

    def bbox(self):
        pts = np.array([self._coords[v] for v in sorted(self._coords)])
        return pts.min(axis=0), pts.max(axis=0)

    def min_edge_length(self, cplx):
        lengths = [np.linalg.norm(self.point(a) - self.point(b))
                   for s in cplx.by_dim(1) for a, b in [s.vertices]]
        return min(lengths) if lengths else 1.0


def barycenter(s, realization):
    """Coordinate mean of the simplex's vertices."""
    return realization.simplex_points(s).mean(axis=0)


def barycentric_subdivision(cplx, realization):
    """Barycentric subdivision with its realization and barycenter ids.

    New vertices are the barycenters of all simplices of the input, in
    (dim, vertex-tuple) order; top simplices of the subdivision are the
    complete flags inside each maximal simplex.  Returns
    (sd_complex, sd_realization, barycenter_ids) where barycenter_ids maps
    each original simplex to its new vertex id.
    """
    ordered = sorted(cplx.simplices, key=simplex_sort_key)
    ids = {s: i for i, s in enumerate(ordered)}
    coords = {ids[s]: barycenter(s, realization) for s in ordered}
    tops = []
    for top in cplx.top_simplices():
        for perm in permutations(top.vertices):
            flag = [Simplex(tuple(sorted(perm[: k + 1]))) for k in range(len(perm))]
            tops.append(tuple(sorted(ids[f] for f in flag)))
    sd = build_complex(len(ordered), tops)
    return sd, GeometricRealization(coords, sd), ids


@dataclass(frozen=True)
class PointLocation:
    """Result of locating a point: the carrier simplex whose open interior
    holds the point, barycentric coordinates w.r.t. that carrier, the
    smallest coordinate (margin), and the affine residual of the solve."""

    simplex: Simplex
    coords: tuple
    margin: float
    residual: float


def _barycentric_in(pts, x):
    # Solve for barycentric coordinates of x w.r.t. rows of pts; returns
    # (lam, residual) where residual measures distance from the affine hull.
    k = pts.shape[0]
    A = np.vstack([pts.T, np.ones((1, k))])
    rhs = np.concatenate([x, [1.0]])
    lam, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.linalg.norm(pts.T @ lam - x))
    return lam, resid


def locate_in_simplex(realization, s, x, tol=1e-10):
    """Barycentric coordinates of x in the closed simplex s, or None."""
    pts = realization.simplex_points(s)
    lam, resid = _barycentric_in(pts, np.asarray(x, dtype=float))
    scale = max(1.0, float(np.abs(pts).max()))
    if resid > tol * scale or lam.min() < -tol:
        return None
    return lam, resid


class _TopIndex:
    """Bounding boxes of a set of simplices for fast candidate pruning."""

    def __init__(self, realization, tops):
        self.tops = tuple(tops)
        boxes = [realization.simplex_points(s) for s in self.tops]
        self.lo = np.array([b.min(axis=0) for b in boxes])
        self.hi = np.array([b.max(axis=0) for b in boxes])

    def candidates(self, x, tol):
        mask = np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=1)
        return np.nonzero(mask)[0]


def _locate_among(realization, tops, x, tol, index=None):
    x = np.asarray(x, dtype=float)
    scale_tol = tol * 10.0
    idx = index.candidates(x, scale_tol) if index is not None else range(len(tops))
    for i in idx:
        s = tops[i]
        hit = locate_in_simplex(realization, s, x, tol)
        if hit is None:
            continue
        lam, resid = hit
        keep = [j for j, lj in enumerate(lam) if lj > tol]
        if not keep:
            keep = [int(np.argmax(lam))]
        carrier = Simplex(tuple(s.vertices[j] for j in keep))
        sub = np.array([lam[j] for j in keep])
        sub = sub / sub.sum()
        return PointLocation(carrier, tuple(float(c) for c in sub),
                             float(sub.min()), resid)
    return None


def point_locate(cplx, realization, x, tol=1e-10):
    """Locate x in the realized complex.

    Returns a PointLocation whose simplex is the carrier (the unique
    simplex whose open interior contains x, up to tol), or None when x
    lies outside every closed simplex.  The tolerance separates interior
    from boundary: barycentric coordinates below tol are treated as zero
    and the corresponding vertices dropped from the carrier.
    """
    tops = sorted(cplx.top_simplices(), key=simplex_sort_key)
    return _locate_among(realization, tops, x, tol)


def grid_triangulation(box_lo, box_hi, resolution):
    """Standard triangulated grid over an axis-aligned box.

    Each square is split into 2 triangles, each cube into 6 tetrahedra
    (Freudenthal/Kuhn split along coordinate permutations), which is
    face-to-face compatible across cells without extra vertices.
    """
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    m = lo.size
    if m not in (2, 3):
        raise MeshError(f"unsupported ambient dimension {m} (need 2 or 3)")
    if hi.size != m or np.any(hi <= lo):
        raise MeshError("invalid box bounds")
    n = int(resolution)
    if n < 1:
        raise MeshError("resolution must be >= 1")

    shape = (n + 1,) * m

    def vid(idx):
        out = 0
        for i in idx:
            out = out * (n + 1) + i
        return out

    coords = {}
    for idx in product(range(n + 1), repeat=m):
        coords[vid(idx)] = lo + (hi - lo) * np.array(idx, dtype=float) / n

    tops = []
    axes = list(range(m))
    for cell in product(range(n), repeat=m):
        for perm in permutations(axes):
            path = [tuple(cell)]
            cur = list(cell)
            for ax in perm:
                cur[ax] += 1
                path.append(tuple(cur))
            tops.append(tuple(vid(p) for p in path))
    # identical simplices can arise only if permutation paths collide, which
    # they do not; duplicates would be a bug caught by build_complex.
    cplx = build_complex((n + 1) ** m, tops)
    return cplx, GeometricRealization(coords, cplx)


def write_mesh(path, cplx, realization):
    """Write an OFF-style text mesh: counts, coordinates, top simplices."""
    tops = sorted(cplx.top_simplices(), key=simplex_sort_key)
    vids = realization.vertex_ids
    remap = {v: i for i, v in enumerate(vids)}
    lines = [f"{len(vids)} {len(tops)}"]
    for v in vids:
        lines.append(" ".join(repr(float(c)) for c in realization.point(v)))
    for s in tops:
        lines.append(" ".join([str(len(s.vertices))] + [str(remap[v]) for v in s.vertices]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read a mesh written by :func:`write_mesh`."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        nv, ns = int(rows[0][0]), int(rows[0][1])
        coords = {i: np.array([float(c) for c in rows[1 + i]]) for i in range(nv)}
        tops = []
        for r in rows[1 + nv : 1 + nv + ns]:
            k = int(r[0])
            tops.append([int(v) for v in r[1 : 1 + k]])
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    cplx = build_complex(nv, tops)
    return cplx, GeometricRealization(coords, cplx)

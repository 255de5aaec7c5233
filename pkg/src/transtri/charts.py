"""Tubular charts and the evolving triangulation map.

A TriangulationState tracks the current map eta from the realized complex
into R^m: the base realization composed with an ordered chain of ambient
diffeomorphisms, each compactly supported near one simplex.

Every chain link is the conjugate of a local normal-fiber diffeomorphism
by the affine frame of its simplex in *base* coordinates.  Because each
ambient diffeomorphism is defined as (current eta) o link o (current
eta)^-1 at the moment it is appended, the full composition telescopes:

    eta_n = L_1 o L_2 o ... o L_n        (newest link applied first),

so evaluation never needs to invert earlier chain entries.  Each link is
exactly the identity outside its support box, which makes evaluation
cheap: per level, one vectorized box test selects the few active links.

A TubularChart for a simplex of dimension l < m is the affine slab map

    (t, v) -> b + A t + N v

pushed through the chain present when the chart was made, with A the
simplex edge matrix and N an orthonormal basis of its orthogonal
complement (QR completion, sign-fixed for determinism).  By construction
chart(t, 0) = eta(iota(t)) on the standard simplex.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, NewtonDivergenceError
from .simplicial import Simplex, simplex_sort_key

__all__ = [
    "TubularChart",
    "AmbientDiffeo",
    "TriangulationState",
    "make_chart",
    "point_in_star",
    "dump_chain_metadata",
]


def _normal_completion(A, m):
    """Orthonormal basis of the orthogonal complement of the columns of A.

    Signs are fixed so the largest-magnitude entry of each column is
    positive, for deterministic frames.
    """
    l = A.shape[1]
    if l == 0:
        return np.eye(m)
    Q, R = np.linalg.qr(A, mode="complete")
    # align the leading columns with A's orientation (diag of R positive)
    for j in range(l):
        if R[j, j] < 0:
            Q[:, j] = -Q[:, j]
            R[j, :] = -R[j, :]
    N = Q[:, l:]
    for j in range(N.shape[1]):
        k = int(np.argmax(np.abs(N[:, j])))
        if N[k, j] < 0:
            N[:, j] = -N[:, j]
    return N


class ChainOps:
    """Masked evaluation of an ordered chain of compactly supported links.

    The chain is split into contiguous same-level runs; within a run
    supports are pairwise disjoint by construction, so one vectorized box
    test per run finds every link acting on a point.  Masks are refreshed
    between runs because earlier links can move points by more than later
    slab widths.
    """

    def __init__(self, links):
        self.links = tuple(links)
        runs = []
        for i, lk in enumerate(self.links):
            if runs and runs[-1][0] == lk.level:
                runs[-1][1].append(i)
            else:
                runs.append((lk.level, [i]))
        self.runs = [
            (idx,
             np.array([self.links[i].support_lo for i in idx]),
             np.array([self.links[i].support_hi for i in idx]))
            for _, idx in runs
        ]

    @staticmethod
    def _active(run, x):
        idx, lo, hi = run
        mask = np.all((x >= lo) & (x <= hi), axis=1)
        hits = np.nonzero(mask)[0]
        return [idx[i] for i in hits]

    def apply(self, x):
        x = np.asarray(x, float)
        for run in reversed(self.runs):
            for i in reversed(self._active(run, x)):
                x = self.links[i].apply(x)
        return x

    def apply_with_jacobian(self, x):
        x = np.asarray(x, float)
        J = np.eye(x.size)
        for run in reversed(self.runs):
            for i in reversed(self._active(run, x)):
                J = self.links[i].jacobian(x) @ J
                x = self.links[i].apply(x)
        return x, J

    def invert(self, x):
        x = np.asarray(x, float)
        for run in self.runs:
            for i in self._active(run, x):
                x = self.links[i].invert(x)
        return x


_EMPTY_OPS = None


def _chain_ops(links):
    global _EMPTY_OPS
    if not links:
        if _EMPTY_OPS is None:
            _EMPTY_OPS = ChainOps(())
        return _EMPTY_OPS
    return ChainOps(links)


@dataclass(frozen=True, eq=False)
class TubularChart:
    """Affine tubular frame for one simplex, tied to a chain snapshot."""

    simplex: Simplex
    base: np.ndarray          # frame origin b
    tangent: np.ndarray       # m x l edge matrix A
    normal: np.ndarray        # m x (m-l) orthonormal completion N
    links: tuple              # chain snapshot (links recorded before this chart)
    dilation: float = 1.1     # open slab: standard simplex dilated about its barycenter

    def __post_init__(self):
        M = np.hstack([self.tangent, self.normal])
        object.__setattr__(self, "_M", M)
        object.__setattr__(self, "_Minv", np.linalg.inv(M))
        object.__setattr__(self, "_ops", _chain_ops(self.links))

    @property
    def l(self):
        return self.tangent.shape[1]

    @property
    def m(self):
        return self.base.size

    @property
    def frame_matrix(self):
        return self._M

    def frame_point(self, t, v):
        """Base-coordinate point b + A t + N v."""
        return self.base + self.tangent @ np.asarray(t, float) + self.normal @ np.asarray(v, float)

    def frame_coords(self, x):
        """Invert the affine frame: returns (t, v)."""
        tv = self._Minv @ (np.asarray(x, float) - self.base)
        return tv[: self.l], tv[self.l :]

    def forward(self, t, v):
        """Chart value: frame point pushed through the chain snapshot."""
        return self._ops.apply(self.frame_point(t, v))

    def forward_jacobian(self, t, v):
        """d(chart) as an m x m matrix in (t, v) block order."""
        x, J = self._ops.apply_with_jacobian(self.frame_point(t, v))
        return J @ self._M

    def inverse(self, x):
        """Chart coordinates (t, v) of an ambient point."""
        return self.frame_coords(self._ops.invert(np.asarray(x, float)))

    def in_slab(self, t):
        """Whether t lies in the dilated open parameter simplex."""
        t = np.asarray(t, float)
        if t.size == 0:
            return True
        c = np.full(t.size, 1.0 / (t.size + 1))
        s = c + (t - c) / self.dilation
        return bool(np.all(s > 0.0) and s.sum() < 1.0)


@dataclass(frozen=True, eq=False)
class AmbientDiffeo:
    """One recorded chain link: a compactly supported diffeomorphism.

    ``local`` acts on (t, v) frame coordinates and is the identity
    whenever t leaves the open simplex or |v| exceeds the fade profile;
    the link conjugates it by the affine frame.  The ambient action (the
    conjugate by the chart's chain snapshot) is available as
    ``ambient_apply`` for reporting and tests.
    """

    simplex: Simplex
    level: int
    chart: TubularChart
    local: object             # eval/jacobian/invert in (t, v) coordinates
    support_lo: np.ndarray
    support_hi: np.ndarray
    meta: dict = field(default_factory=dict)

    def _split(self, x):
        return self.chart.frame_coords(x)

    def in_box(self, x):
        return bool(np.all(x >= self.support_lo) and np.all(x <= self.support_hi))

    def apply(self, x):
        x = np.asarray(x, float)
        if not self.in_box(x):
            return x
        t, v = self._split(x)
        t2, v2 = self.local.eval(t, v)
        if v2 is v:
            return x
        return self.chart.frame_point(t2, v2)

    def jacobian(self, x):
        x = np.asarray(x, float)
        m = x.size
        if not self.in_box(x):
            return np.eye(m)
        t, v = self._split(x)
        Jl = self.local.jacobian(t, v)
        return self.chart._M @ Jl @ self.chart._Minv

    def invert(self, x):
        x = np.asarray(x, float)
        if not self.in_box(x):
            return x
        t, w = self._split(x)
        try:
            v = self.local.invert(t, w)
        except NewtonDivergenceError as exc:
            exc.link = self
            raise
        if v is w:
            return x
        return self.chart.frame_point(t, v)

    def ambient_apply(self, x):
        """Action as a diffeomorphism of the ambient space at append time."""
        y = self.chart._ops.invert(np.asarray(x, float))
        return self.chart._ops.apply(self.apply(y))

    def ambient_invert(self, x):
        y = self.chart._ops.invert(np.asarray(x, float))
        return self.chart._ops.apply(self.invert(y))


class TriangulationState:
    """Base realization plus an ordered chain of ambient diffeomorphisms.

    Immutable between pipeline stages: appending a link returns a new
    state.  Reads are safe to share across threads.
    """

    def __init__(self, cplx, realization, links=()):
        self.complex = cplx
        self.realization = realization
        self.links = tuple(links)
        self.ambient_dim = realization.ambient_dim
        self.mesh_scale = realization.min_edge_length(cplx)
        self._ops = _chain_ops(self.links)

    def with_link(self, link):
        return TriangulationState(self.complex, self.realization, self.links + (link,))

    def eval_eta(self, p):
        """Current triangulation map at a base-coordinate point."""
        return self._ops.apply(p)

    def eta_jacobian(self, p):
        """Differential of eta at a base point, an m x m matrix."""
        return self._ops.apply_with_jacobian(p)[1]

    def eval_eta_with_jacobian(self, p):
        return self._ops.apply_with_jacobian(p)

    def eval_eta_inverse(self, x):
        """Preimage of an ambient point under the current eta.

        Newton inversion happens inside each active link, oldest links
        unwound first.
        """
        return self._ops.invert(x)

    def embedded_point(self, s, t):
        """eta composed with the affine chart of simplex s at parameter t."""
        b, A = self.realization.simplex_frame(s)
        return self.eval_eta(b + A @ np.asarray(t, float))

    def bbox(self):
        lo, hi = self.realization.bbox()
        pad = 0.25 * self.mesh_scale
        return lo - pad, hi + pad


def make_chart(state, s):
    """Tubular chart for a realized simplex of dimension l < m.

    The frame is affine in base coordinates and composed into the current
    chain, so chart(t, 0) equals the current eta along the simplex.
    """
    m = state.ambient_dim
    if s.dim >= m:
        raise MeshError(f"simplex {s.vertices} has no normal directions in R^{m}")
    if s not in state.complex:
        raise MeshError(f"simplex {s.vertices} not in complex")
    b, A = state.realization.simplex_frame(s)
    N = _normal_completion(A, m)
    return TubularChart(simplex=s, base=b, tangent=A, normal=N, links=state.links)


class StarLocator:
    """Reusable membership test for one open star in a subdivision.

    The open star of a vertex is the union of open simplices containing
    it; a point belongs exactly when the carrier simplex of its location
    is a member of the star set.  Locating only against the maximal star
    members is enough: their closed union covers the open star, and a
    point outside it either misses them all or lands on a carrier that is
    not in the set.
    """

    def __init__(self, star_simplices, sd_realization, tol=1e-10):
        from .simplicial import _TopIndex

        self.star = frozenset(star_simplices)
        tops = [s for s in self.star
                if not any(o.dim > s.dim and set(s.vertices) < set(o.vertices)
                           for o in self.star)]
        self.tops = sorted(tops, key=simplex_sort_key)
        self.index = _TopIndex(sd_realization, self.tops)
        self.realization = sd_realization
        self.tol = tol

    def contains_base_point(self, p):
        from .simplicial import _locate_among

        loc = _locate_among(self.realization, self.tops, p, self.tol, index=self.index)
        return loc is not None and loc.simplex in self.star


def point_in_star(state, x, star_simplices, sd_realization, tol=1e-10, locator=None):
    """Whether an ambient point pulls back into the given open star.

    ``star_simplices`` comes from :func:`simplicial.star` on the
    barycentric subdivision; pass a prebuilt StarLocator to amortize the
    location index over many queries.
    """
    if locator is None:
        locator = StarLocator(star_simplices, sd_realization, tol)
    base = state.eval_eta_inverse(x)
    return locator.contains_base_point(base)


def dump_chain_metadata(state):
    """Structured-text dump of the chain for reproducibility checks.

    Every float is rendered with repr, so identical pipelines produce
    byte-identical dumps.
    """
    lines = [f"chain-links: {len(state.links)}"]
    for i, lk in enumerate(state.links):
        meta = lk.meta
        v = meta.get("v")
        vtxt = "(" + ", ".join(repr(float(c)) for c in v) + ")" if v is not None else "()"
        lines.append(
            f"link {i}: simplex={lk.simplex.vertices} level={lk.level}"
            f" c_sigma={repr(float(meta.get('c_sigma', float('nan'))))}"
            f" epsilon={repr(float(meta.get('epsilon', float('nan'))))}"
            f" v={vtxt}"
            f" retries={int(meta.get('retries', 0))}"
            f" shrinks={int(meta.get('shrinks', 0))}"
            f" support_lo=({', '.join(repr(float(c)) for c in lk.support_lo)})"
            f" support_hi=({', '.join(repr(float(c)) for c in lk.support_hi)})"
        )
    return "\n".join(lines) + "\n"

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from cardy_lattices import lattice
from cardy_lattices.errors import DiscretizationError

# boundary arcs, in the order they are traversed along the boundary
AX, XB, BC, CA = range(4)
ARC_NAMES = ('ax', 'xb', 'bc', 'ca')
INTERIOR = -1
# ties between equidistant arcs go to the arcs that define the crossing event
TIE_PRIORITY = (AX, BC, XB, CA)

# relative to the domain diameter
GEOMETRY_RTOL = 1e-9

logger = logging.getLogger(__name__)


def _point(xy):
    return tuple(float(c) for c in xy)


@dataclass(frozen=True)
class MarkedTriangle:
    alpha: tuple
    beta: tuple
    gamma: tuple
    # segment parameters of the marked point x on alpha -> beta
    x_requested: float
    x_snapped: float

    def __post_init__(self):
        for name in ('alpha', 'beta', 'gamma'):
            object.__setattr__(self, name, _point(getattr(self, name)))
        if not self.area > GEOMETRY_RTOL * self.diameter**2:
            raise DiscretizationError(
                f"degenerate triangle {self.vertices.tolist()} (zero area)")
        if not 0 < self.x_snapped < 1:
            raise DiscretizationError(
                f"marked point parameter {self.x_snapped!r} is not strictly "
                "between alpha and beta")

    @property
    def vertices(self):
        return np.array([self.alpha, self.beta, self.gamma])

    @property
    def x(self):
        alpha, beta = np.array(self.alpha), np.array(self.beta)
        return _point(alpha + self.x_snapped * (beta - alpha))

    @property
    def area(self):
        (ax_, ay), (bx, by), (cx, cy) = self.alpha, self.beta, self.gamma
        return abs((bx - ax_) * (cy - ay) - (cx - ax_) * (by - ay)) / 2

    @property
    def diameter(self):
        vertices = self.vertices
        return max(
            np.linalg.norm(vertices[i] - vertices[j])
            for i, j in ((0, 1), (1, 2), (2, 0)))

    def arcs(self):
        """Segments of the four boundary arcs, indexed by arc code."""
        return [(self.alpha, self.x), (self.x, self.beta),
                (self.beta, self.gamma), (self.gamma, self.alpha)]

    def map(self, matrix):
        # linear maps preserve ratios along segments, so x keeps its parameter
        alpha, beta, gamma = lattice.apply_map(matrix, self.vertices)
        return MarkedTriangle(alpha, beta, gamma, self.x_requested,
                              self.x_snapped)

    def summary(self):
        return {
            'alpha': list(self.alpha),
            'beta': list(self.beta),
            'gamma': list(self.gamma),
            'x_requested': self.x_requested,
            'x_snapped': self.x_snapped
        }


def standard_triangle(spec, x_param):
    """The marked triangle whose crossings the experiments estimate.

    For triangular families it is the image of the unit equilateral triangle
    under `family_map(k)`; for SquareNE it is the right isosceles triangle
    with vertices (0, 0), (1/sqrt(2), 1/sqrt(2)) and (0, 1/sqrt(2)). The
    marked point is snapped to the nearest lattice vertex on alpha -> beta,
    rounding half up.
    """
    if not 0 < x_param < 1:
        raise DiscretizationError(
            f"x_param must lie in (0, 1), got {x_param!r}")
    family = spec.family
    if family.is_triangular:
        alpha, beta = (0., 0.), (1., 0.)
        # apex over the base midpoint at height s(k) * sqrt(3) / 2 = h(k)
        gamma = (.5, lattice.row_height(family))
        base_step = (1, 0)
    elif family.tag == lattice.SQUARE_NE:
        c = math.sqrt(.5)
        alpha, beta, gamma = (0., 0.), (c, c), (0., c)
        base_step = (1, 1)
    else:
        raise DiscretizationError(
            f"no standard triangle for the {family.tag} family")

    base_length = math.dist(alpha, beta)
    step = np.linalg.norm(
        lattice.embed(spec, base_step) - lattice.embed(spec, (0, 0)))
    t_step = step / base_length
    m = math.floor(x_param / t_step + .5)
    x_snapped = m * t_step
    if m <= 0 or x_snapped >= 1 - GEOMETRY_RTOL:
        raise DiscretizationError(
            f"x_param {x_param!r} snaps onto a corner of the base at mesh "
            f"{spec.delta:.12g}")
    return MarkedTriangle(alpha, beta, gamma, float(x_param), x_snapped)


def _edge_distances(points, vertices):
    """Signed distances to the three edge lines, positive inside."""
    (ux, uy), (vx, vy) = vertices[1] - vertices[0], vertices[2] - vertices[0]
    orientation = np.sign(ux * vy - uy * vx)
    distances = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        edge = vertices[b] - vertices[a]
        rel = points - vertices[a]
        cross = edge[0] * rel[:, 1] - edge[1] * rel[:, 0]
        distances.append(orientation * cross / np.linalg.norm(edge))
    return np.column_stack(distances)


def _segment_distances(points, start, end):
    start, end = np.asarray(start), np.asarray(end)
    seg = end - start
    t = np.clip((points - start) @ seg / (seg @ seg), 0, 1)
    return np.linalg.norm(points - (start + t[:, None] * seg), axis=1)


def _nearest_arcs(points, domain, tol):
    distances = np.column_stack([
        _segment_distances(points, *domain.arcs()[arc])
        for arc in TIE_PRIORITY
    ])
    nearest = np.argmax(distances <= distances.min(axis=1, keepdims=True) +
                        tol,
                        axis=1)
    return np.asarray(TIE_PRIORITY, dtype=np.int8)[nearest]


def _edge_list(sites, offsets):
    """Undirected in-domain edges as sorted pairs of row indices in `sites`."""
    lookup = {tuple(site): n for n, site in enumerate(sites.tolist())}
    edges = []
    for n, (i, j) in enumerate(sites.tolist()):
        for di, dj in offsets:
            other = lookup.get((i + di, j + dj))
            if other is not None and other > n:
                edges.append((n, other))
    edges.sort()
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class SiteClassification:
    spec: lattice.LatticeSpec
    domain: MarkedTriangle
    # (m, 2) site indices sorted lexicographically
    sites: np.ndarray
    # (m, ) arc codes, INTERIOR for sites with no neighbor outside the domain
    labels: np.ndarray
    # (e, 2) sorted pairs of row indices into `sites`
    edges: np.ndarray
    # neighbor offsets in the index convention of `sites`
    offsets: tuple

    def __len__(self):
        return len(self.sites)

    @cached_property
    def in_domain(self):
        return {lattice.Site(*site) for site in self.sites.tolist()}

    @cached_property
    def adjacency(self):
        adjacency = {lattice.Site(*site): [] for site in self.sites.tolist()}
        sites = [lattice.Site(*site) for site in self.sites.tolist()]
        for u, v in self.edges.tolist():
            adjacency[sites[u]].append(sites[v])
            adjacency[sites[v]].append(sites[u])
        return adjacency

    @cached_property
    def boundary_label(self):
        return {
            lattice.Site(*site): ARC_NAMES[label]
            for site, label in zip(self.sites.tolist(), self.labels.tolist())
            if label != INTERIOR
        }

    def sites_with_label(self, arc):
        return self.sites[self.labels == arc]

    def summary(self):
        counts = np.bincount(self.labels + 1, minlength=len(ARC_NAMES) + 1)
        summary = {'in_domain': len(self), 'interior': int(counts[0])}
        summary.update({
            name: int(count)
            for name, count in zip(ARC_NAMES, counts[1:])
        })
        summary.update(x_requested=self.domain.x_requested,
                       x_snapped=self.domain.x_snapped)
        return summary

    def reindexed(self, index_map):
        """The same classification expressed in another index convention.

        `index_map` is an integer matrix acting on `(i, j)` column vectors;
        offsets are mapped with it too. Spec and domain are kept as
        provenance.
        """
        index_map = np.asarray(index_map, dtype=np.int64)
        new_sites = self.sites @ index_map.T
        order = np.lexsort((new_sites[:, 1], new_sites[:, 0]))
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        edges = np.sort(rank[self.edges], axis=1)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        offsets = tuple(
            tuple(int(c) for c in index_map @ np.array(offset))
            for offset in self.offsets)
        return SiteClassification(self.spec, self.domain, new_sites[order],
                                  self.labels[order], edges, offsets)

    def first_difference(self, other):
        """First `(site, reason)` at which two classifications differ."""
        if not np.array_equal(self.sites, other.sites):
            ours = {tuple(site) for site in self.sites.tolist()}
            theirs = {tuple(site) for site in other.sites.tolist()}
            site = min(ours ^ theirs)
            side = 'first' if site in ours else 'second'
            return lattice.Site(*site), f'site only in the {side} domain'
        mismatch = np.flatnonzero(self.labels != other.labels)
        if len(mismatch):
            n = mismatch[0]
            return (lattice.Site(*self.sites[n].tolist()),
                    f'boundary labels differ '
                    f'({_label_name(self.labels[n])} vs '
                    f'{_label_name(other.labels[n])})')
        ours = {tuple(edge) for edge in self.edges.tolist()}
        theirs = {tuple(edge) for edge in other.edges.tolist()}
        if ours != theirs:
            u, v = min(ours ^ theirs)
            return (lattice.Site(*self.sites[u].tolist()),
                    'adjacency differs towards site '
                    f'{tuple(self.sites[v].tolist())}')
        return None


def _label_name(label):
    return 'interior' if label == INTERIOR else ARC_NAMES[label]


def classify(spec, domain):
    """Discretize a marked triangle on a lattice.

    In-domain sites are those embedded in the closed triangle; boundary sites
    (in-domain sites with a lattice neighbor outside) are attached to the
    nearest boundary arc.
    """
    vertices = domain.vertices
    tol = GEOMETRY_RTOL * domain.diameter
    if not domain.area > tol * domain.diameter:
        raise DiscretizationError("degenerate triangle (zero area)")

    # 0. candidate sites: the index-space bounding box of the triangle, padded
    #    so that every neighbor of an in-domain site is a candidate
    corners = lattice.inverse_embed(spec, vertices)
    lo = np.floor(corners.min(axis=0)).astype(np.int64) - 1
    hi = np.ceil(corners.max(axis=0)).astype(np.int64) + 1
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0] + 1),
                         np.arange(lo[1], hi[1] + 1),
                         indexing='ij')
    inside = np.all(_edge_distances(
        lattice.embed(spec, np.column_stack((ii.ravel(), jj.ravel()))),
        vertices) >= -tol,
                    axis=1).reshape(ii.shape)
    if not inside.any():
        raise DiscretizationError(
            f"mesh too coarse: no site of {spec} lies in the domain")

    # 1. boundary sites have at least one neighbor outside the closed triangle
    offsets = lattice.neighbor_offsets(spec.family)
    padded = np.pad(inside, 1)
    boundary = np.zeros_like(inside)
    for di, dj in offsets:
        boundary |= ~padded[1 + di:1 + di + inside.shape[0],
                            1 + dj:1 + dj + inside.shape[1]]
    boundary &= inside

    # row-major order of the meshgrid is lexicographic in (i, j)
    sites = np.column_stack((ii[inside], jj[inside]))
    edges = _edge_list(sites, offsets)

    # 2. the in-domain subgraph must be connected
    adjacency = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
        shape=(len(sites), len(sites)))
    n_components, _ = csgraph.connected_components(adjacency, directed=False)
    if n_components != 1:
        raise DiscretizationError(
            f"degenerate discretization: the {len(sites)} in-domain sites of "
            f"{spec} form {n_components} components")

    # 3. attach boundary sites to arcs
    labels = np.full(len(sites), INTERIOR, dtype=np.int8)
    on_boundary = boundary[inside]
    labels[on_boundary] = _nearest_arcs(
        lattice.embed(spec, sites[on_boundary]), domain, tol)

    cls = SiteClassification(spec, domain, sites, labels, edges,
                             tuple(offsets))
    logger.debug("classified %s: %s", spec, cls.summary())
    return cls

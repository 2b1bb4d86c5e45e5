import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from cardy_lattices.errors import DomainError

# family tags
SQUARE = 'Square'
TRIANGULAR_K = 'TriangularK'
SQUARE_NE = 'SquareNE'
TRI_NE = 'TriNE'
TRI_NW = 'TriNW'
TRI_H = 'TriH'
FAMILY_TAGS = [SQUARE, TRIANGULAR_K, SQUARE_NE, TRI_NE, TRI_NW, TRI_H]
TRIANGULAR_TAGS = [TRIANGULAR_K, TRI_NE, TRI_NW, TRI_H]
SQUARE_TAGS = [SQUARE, SQUARE_NE]

# every family has degree at most 6
MAX_DEGREE = 6

# shape parameter of the triangular lattice that the rotated SquareNE lattice
# lands on
SQUARE_NE_K = 2**-.5

_HORIZONTAL = [(1, 0), (-1, 0)]
_NORTH_EAST = [(0, 1), (0, -1)]
_NORTH_WEST = [(-1, 1), (1, -1)]
NEIGHBOR_OFFSETS = {
    SQUARE: [(1, 0), (-1, 0), (0, 1), (0, -1)],
    TRIANGULAR_K: _HORIZONTAL + _NORTH_EAST + _NORTH_WEST,
    SQUARE_NE: [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)],
    TRI_NE: _HORIZONTAL + _NORTH_EAST,
    TRI_NW: _HORIZONTAL + _NORTH_WEST,
    TRI_H: _NORTH_EAST + _NORTH_WEST,
}

# index-space map (i, j) -> (i, j - i) taking SquareNE sites to the sites of
# T(1/sqrt(2)) that the -pi/4 rotation puts them on
ROTATION_INDEX_MATRIX = np.array([[1, 0], [-1, 1]], dtype=np.int64)

Site = namedtuple('Site', ['i', 'j'])

logger = logging.getLogger(__name__)


def _check_k(k):
    if not k > .5 or not math.isfinite(k):
        raise DomainError(
            f"k must be a finite real greater than 1/2, got {k!r} (the "
            "isosceles triangle with base delta and legs k*delta degenerates)")


@dataclass(frozen=True)
class LatticeFamily:
    tag: str
    k: float = None

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise DomainError(f"unknown lattice family {self.tag!r}, expected "
                              f"one of {FAMILY_TAGS}")
        if self.tag == TRIANGULAR_K:
            if self.k is None:
                raise DomainError("the TriangularK family requires k")
            _check_k(self.k)
            object.__setattr__(self, 'k', float(self.k))
        elif self.k is not None:
            raise DomainError(f"family {self.tag} takes no shape parameter k")

    @property
    def is_triangular(self):
        return self.tag in TRIANGULAR_TAGS

    @property
    def shape_k(self):
        # the sub-lattices of the equilateral lattice have k fixed to 1
        if self.tag == TRIANGULAR_K:
            return self.k
        if self.tag in TRIANGULAR_TAGS:
            return 1.
        return None

    def __str__(self):
        if self.tag == TRIANGULAR_K:
            return f'{self.tag}(k={self.k:.12g})'
        return self.tag


@dataclass(frozen=True)
class LatticeSpec:
    family: LatticeFamily
    delta: float
    # derived
    row_height: float = field(init=False)

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be positive, got {self.delta!r}")
        object.__setattr__(self, 'delta', float(self.delta))
        object.__setattr__(self, 'row_height',
                           self.delta * row_height(self.family))

    @classmethod
    def triangular(cls, k, delta):
        return cls(LatticeFamily(TRIANGULAR_K, k), delta)

    @classmethod
    def from_dict(cls, spec_dict):
        family = LatticeFamily(spec_dict['family'], spec_dict.get('k'))
        return cls(family, spec_dict['delta'])

    def to_dict(self):
        return {
            'family': self.family.tag,
            'k': self.family.k,
            'delta': self.delta
        }

    def __str__(self):
        return f'{self.family}, delta={self.delta:.12g}'


def row_height(family):
    """Vertical distance between consecutive rows, in units of delta."""
    if family.is_triangular:
        k = family.shape_k
        return math.sqrt(k * k - .25)
    return 1.


def stretch_factor(k):
    _check_k(k)
    # 2 * h(k) / sqrt(3), written so that k = 1 gives exactly 1
    return math.sqrt((4 * k * k - 1) / 3)


def embed(spec, sites):
    """Embed integer sites into the plane.

    `sites` is a `Site`, an `(i, j)` pair or an array of shape `(..., 2)`;
    the result has the same leading shape with a trailing axis of size 2.
    """
    ij = np.asarray(sites, dtype=np.float64)
    i, j = ij[..., 0], ij[..., 1]
    if spec.family.is_triangular:
        xy = (spec.delta * (i + j / 2), spec.row_height * j)
    else:
        xy = (spec.delta * i, spec.delta * j)
    return np.stack(xy, axis=-1)


def inverse_embed(spec, points):
    """Fractional `(i, j)` index coordinates of plane points."""
    xy = np.asarray(points, dtype=np.float64)
    x, y = xy[..., 0], xy[..., 1]
    if spec.family.is_triangular:
        j = y / spec.row_height
        i = x / spec.delta - j / 2
    else:
        i, j = x / spec.delta, y / spec.delta
    return np.stack((i, j), axis=-1)


def neighbor_offsets(family):
    return list(NEIGHBOR_OFFSETS[family.tag])


def max_edge_length(spec):
    family = spec.family
    if family.is_triangular:
        # horizontal edges have length delta, hypotenuse edges k * delta
        return spec.delta * max(1., family.shape_k)
    if family.tag == SQUARE_NE:
        return spec.delta * math.sqrt(2)
    return spec.delta


def critical_probability(family):
    """Site-percolation threshold, or None where it must be user-supplied."""
    if family.tag in (TRIANGULAR_K, SQUARE_NE):
        return .5
    return None


def family_map(k):
    """Linear map taking the equilateral embedding to that of T(k).

    Site indices are shared between both lattices, so adjacency is preserved.
    """
    if not k > .5:
        raise DomainError(f"family_map requires k > 1/2, got {k!r}")
    return np.diag([1., stretch_factor(k)])


def rotation_map():
    # Z -> exp(-i pi/4) Z as a real 2x2 matrix acting on column vectors
    c = math.sqrt(.5)
    return np.array([[c, c], [-c, c]])


def apply_map(matrix, points):
    return np.asarray(points, dtype=np.float64) @ np.asarray(matrix).T


def rotation_index_map(sites):
    """SquareNE index (i, j) -> index (i, j - i) on T(1/sqrt(2)).

    With the SquareNE mesh equal to `delta / sqrt(2)` and the triangular mesh
    `delta`, rotating the embedded SquareNE site by -pi/4 gives the embedded
    triangular site.
    """
    return np.asarray(sites, dtype=np.int64) @ ROTATION_INDEX_MATRIX.T


@dataclass
class GraphReport:
    spec: LatticeSpec
    window_radius: int
    max_degree: int
    degree_bound: int
    symmetric: bool
    max_edge_length: float
    edge_length_bound: float
    sites_per_unit_area: float
    n_components: int
    periods: list = field(default_factory=list)

    @property
    def degree_ok(self):
        return self.symmetric and self.max_degree <= self.degree_bound

    @property
    def edges_ok(self):
        return (math.isfinite(self.sites_per_unit_area)
                and self.sites_per_unit_area > 0
                and 0 < self.max_edge_length <= self.edge_length_bound *
                (1 + 1e-12))

    @property
    def connected_ok(self):
        return self.n_components == 1

    @property
    def satisfied(self):
        return self.degree_ok and self.edges_ok and self.connected_ok

    @property
    def failures(self):
        checks = [('bounded degree', self.degree_ok),
                  ('finite edges, locally finite', self.edges_ok),
                  ('connected', self.connected_ok)]
        return [name for name, ok in checks if not ok]

    def rows(self):
        family = self.spec.family
        rows = [
            ('degree', self.degree_ok,
             f'max degree {self.max_degree} <= {self.degree_bound}, '
             f'offsets closed under negation: {self.symmetric}'),
            ('edge_length', self.edges_ok,
             f'max edge length {self.max_edge_length:.12g} <= '
             f'{self.edge_length_bound:.12g}, '
             f'{self.sites_per_unit_area:.12g} sites per unit area'),
            ('connectivity', self.connected_ok,
             f'{self.n_components} component(s) in window radius '
             f'{self.window_radius}'),
        ]
        for vector, is_period in self.periods:
            rows.append(
                (f'period({vector[0]:.12g},{vector[1]:.12g})', is_period,
                 'vertex set invariant under translation' if is_period else
                 'vertex set not invariant under translation'))
        return [{
            'family': family.tag,
            'k': family.k,
            'delta': self.spec.delta,
            'check': check,
            'passed': passed,
            'detail': detail
        } for check, passed, detail in rows]


def _window_sites(radius):
    ii, jj = np.meshgrid(np.arange(-radius, radius + 1),
                         np.arange(-radius, radius + 1),
                         indexing='ij')
    return np.column_stack((ii.ravel(), jj.ravel()))


def _is_period(spec, sites, vector, atol=1e-9):
    shifted = inverse_embed(spec, embed(spec, sites) + np.asarray(vector))
    return bool(np.all(np.abs(shifted - np.round(shifted)) <= atol))


def validate_graph_requirements(spec, window_radius, periods=None):
    """Check the three graph requirements on a finite window of the lattice.

    Also reports, for each translation vector in `periods` (plane
    coordinates), whether it maps the embedded vertex set onto itself.
    """
    if window_radius < 2:
        raise DomainError(
            f"window_radius must be at least 2, got {window_radius}")
    if periods is None:
        periods = [(1, 0), (0, 1)]

    offsets = np.array(neighbor_offsets(spec.family))
    offset_set = {tuple(offset) for offset in offsets}
    symmetric = all((-di, -dj) in offset_set for di, dj in offset_set)

    # 1. degree and edges of the window subgraph
    sites = _window_sites(window_radius)
    width = 2 * window_radius + 1
    flat = (sites[:, 0] + window_radius) * width + sites[:, 1] + window_radius
    rows, cols = [], []
    for offset in offsets:
        nbrs = sites + offset
        in_window = np.all(np.abs(nbrs) <= window_radius, axis=1)
        rows.append(flat[in_window])
        cols.append((nbrs[in_window, 0] + window_radius) * width +
                    nbrs[in_window, 1] + window_radius)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    degree = np.bincount(rows, minlength=len(sites))

    # 2. embedded edge lengths and vertex density (inverse of the cell area)
    edge_vectors = embed(spec, offsets) - embed(spec, np.zeros_like(offsets))
    cell = embed(spec, [(1, 0), (0, 1)]) - embed(spec, (0, 0))
    cell_area = abs(np.linalg.det(cell))

    # 3. connectivity of the window
    adjacency = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                                  shape=(len(sites), len(sites)))
    n_components, _ = csgraph.connected_components(adjacency, directed=False)

    # translations are checked on the inner half of the window only
    inner = sites[np.all(np.abs(sites) <= window_radius // 2, axis=1)]
    period_report = [(tuple(float(v) for v in vector),
                      _is_period(spec, inner, vector)) for vector in periods]

    report = GraphReport(spec=spec,
                         window_radius=window_radius,
                         max_degree=int(degree.max()),
                         degree_bound=MAX_DEGREE,
                         symmetric=symmetric,
                         max_edge_length=float(
                             np.linalg.norm(edge_vectors, axis=1).max()),
                         edge_length_bound=max_edge_length(spec),
                         sites_per_unit_area=(1 / cell_area
                                              if cell_area > 0 else math.inf),
                         n_components=int(n_components),
                         periods=period_report)
    logger.debug("validated %s on window radius %d: failures %s", spec,
                 window_radius, report.failures)
    return report

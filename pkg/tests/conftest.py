import pytest

from cardy_lattices import domain, lattice


@pytest.fixture
def equilateral_spec():
    return lattice.LatticeSpec.triangular(1, 1 / 10)


@pytest.fixture
def six_site_cls():
    # the smallest standard triangle: unit base, delta = 1/2, x at the midpoint
    spec = lattice.LatticeSpec.triangular(1, 1 / 2)
    return domain.classify(spec, domain.standard_triangle(spec, .5))


@pytest.fixture
def micro_cls():
    # 15 sites, small enough for exhaustive enumeration
    spec = lattice.LatticeSpec.triangular(1, 1 / 4)
    return domain.classify(spec, domain.standard_triangle(spec, .5))


@pytest.fixture
def crossing_oracle():
    """Breadth-first search over the open sites, independent of the engine."""
    def crosses(site_cls, open_sites):
        frontier = [
            site for site, arc in site_cls.boundary_label.items()
            if arc == 'ax' and site in open_sites
        ]
        seen = set(frontier)
        while frontier:
            site = frontier.pop()
            if site_cls.boundary_label.get(site) == 'bc':
                return True
            for nbr in site_cls.adjacency[site]:
                if nbr in open_sites and nbr not in seen:
                    seen.add(nbr)
                    frontier.append(nbr)
        return False

    return crosses

class CardyLatticesError(Exception):
    pass


class DomainError(CardyLatticesError, ValueError):
    """An argument lies outside the domain of a lattice or special function."""


class DiscretizationError(CardyLatticesError, ValueError):
    """A marked triangle cannot be discretized on the requested lattice."""


class ConfigError(CardyLatticesError, ValueError):
    pass


class PreconditionError(CardyLatticesError):
    """Two classifications that should coincide site-for-site do not."""
    def __init__(self, message, site=None, reason=None):
        super(PreconditionError, self).__init__(message)
        self.site = site
        self.reason = reason

"""Exception types shared across the package."""


class CapacityError(ValueError):
    """A requested system size exceeds a hard implementation cap."""


class ConfigError(ValueError):
    """A run configuration failed schema or semantic validation."""


class EmptyFamilyError(ValueError):
    """No translate of an interaction shape fits on the lattice."""


class UndersampledError(RuntimeError):
    """Monte Carlo noise clipped too many square-root arguments; n too small."""

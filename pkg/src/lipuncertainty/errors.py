"""Exception types raised across the package."""


class DimensionMismatch(ValueError):
    pass


class NotNormalizable(ValueError):
    """f(x) is too close to zero to rescale f so that f(x) = 1."""


class UnsupportedExponent(ValueError):
    """No closed-form operator norm for this p."""


class EmptySample(ValueError):
    """Every pair in a sample cloud was degenerate."""


class DomainEscape(Exception):
    """A composition point left the ball a nonlinear map is defined on."""

    def __init__(self, what, norm, radius):
        super().__init__(f"{what}: norm {norm:.6g} exceeds domain radius {radius:.6g}")
        self.what = what
        self.norm = norm
        self.radius = radius


class NotHermitian(ValueError):
    pass


class NonUnitState(ValueError):
    pass

"""Exception types shared across the library."""


class DomainError(ValueError):
    """Evaluation point lies outside the parametric domain."""


class ConstructionError(ValueError):
    """Invalid data for building a basis, complex, space or patch."""


class IllPosedNodesError(ValueError):
    """Interpolation/histopolation system is singular to working precision."""


class DegenerateGeometryError(ValueError):
    """Geometry mapping has a nonpositive Jacobian determinant."""


class SingularSystemError(RuntimeError):
    """Factorization of the saddle-point system failed."""

    def __init__(self, message, nullspace_hint=None):
        super().__init__(message)
        self.nullspace_hint = nullspace_hint


class FluxCompatibilityError(ValueError):
    """Prescribed normal-velocity data has nonzero net boundary flux."""

    def __init__(self, imbalance):
        super().__init__(
            f"net boundary flux of prescribed normal velocity is {imbalance:.3e}, "
            "but the enclosed flow requires zero net flux"
        )
        self.imbalance = imbalance

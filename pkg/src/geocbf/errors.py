class GeoCBFError(Exception):
    pass


class CBFConditionViolated(GeoCBFError, ValueError):
    """Raised when (a, b) leaves the set {a > 0 or b > 0}.

    At such a point no input satisfies the barrier condition, so the
    candidate is not a CBF there. Filters never clamp this away.
    """


class OutsideDomain(GeoCBFError, ValueError):
    """Point lies outside the region where the safe velocity field is defined."""


class Divergence(GeoCBFError, RuntimeError):
    def __init__(self, t, message="non-finite state"):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


class ConfigError(GeoCBFError, ValueError):
    pass

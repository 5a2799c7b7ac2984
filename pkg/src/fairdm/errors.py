class PairingError(ValueError):
    """A classifier, post-processor or game does not line up with the context it is used with."""


class GuardError(RuntimeError):
    """An enumeration would exceed its desk-scale size guard."""


class WitnessInapplicable(ValueError):
    """The Risky/Safe witness game needs two distinct, positive posteriors."""

"""Exception types shared across the package."""


class PosetCtrlError(Exception):
    """Base class for all package errors."""


class ConstructionError(PosetCtrlError, ValueError):
    """Invalid poset input: duplicate labels, cycles in the cover graph."""


class UnknownElementError(PosetCtrlError, KeyError):
    """Lookup of a label that is not an element of the poset."""


class ContractError(PosetCtrlError, ValueError):
    """A documented precondition was violated by the caller."""


class NumericalError(PosetCtrlError, RuntimeError):
    """A numerical routine failed to converge or produced garbage."""


class SynthesisError(NumericalError):
    """A Riccati solve failed or returned a non-stabilizing solution."""


class DivergenceError(NumericalError):
    """A simulated trajectory left the representable range."""


class SpecFormatError(PosetCtrlError, ValueError):
    """A system-specification file does not match the expected schema."""

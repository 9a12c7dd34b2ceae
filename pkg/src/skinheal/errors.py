"""Exception hierarchy shared by the library and the CLI."""


class SkinHealError(Exception):
    """Base class; the CLI maps every subclass to a machine-readable error."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class DomainError(SkinHealError, ValueError):
    kind = "domain"


class NumericalError(SkinHealError, ArithmeticError):
    kind = "numerical"


class WindingUndefinedError(SkinHealError, ValueError):
    """Energy lies on the PBC loop, where the winding number is not defined."""

    kind = "on_pbc_loop"


class RefineKError(NumericalError):
    """Phase unwrapping is ambiguous at the requested k resolution."""

    kind = "refine_k"

    def __init__(self, message, suggested_K=None):
        super().__init__(message)
        self.suggested_K = suggested_K


class EmptyGbzError(SkinHealError):
    kind = "empty_gbz"

    def __init__(self, message, f_min=None, f_max=None):
        super().__init__(message)
        self.f_min = f_min
        self.f_max = f_max


class NotASkinEnergyError(SkinHealError, ValueError):
    kind = "not_a_skin_energy"


class DegeneracyError(NumericalError):
    kind = "degeneracy"


class BlowUpError(NumericalError):
    kind = "blow_up"


class ConfigError(SkinHealError, ValueError):
    kind = "config"

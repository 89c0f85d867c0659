"""Exception hierarchy shared by all cdmkit modules."""


class CdmError(ValueError):
    """Base class for every error raised by cdmkit."""


class InvalidProfileError(CdmError):
    pass


class MissingRequesterError(CdmError):
    pass


class InvalidDeviationError(CdmError):
    pass


class UnknownWorkerError(CdmError):
    pass


class FeasibilityError(CdmError):
    pass


class ParamsError(CdmError):
    pass


class CapacityError(CdmError):
    """Exact enumeration requested for a coalition larger than the cap."""


class SchemaMismatchError(CdmError):
    pass


class InvalidDatumError(CdmError):
    pass

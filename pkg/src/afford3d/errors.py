"""Exception hierarchy shared across the pipeline stages."""


class Afford3dError(Exception):
    """Base class for all domain errors."""


class ShapeMismatch(Afford3dError):
    pass


class HeadDivisibility(Afford3dError):
    pass


class DecodeError(Afford3dError):
    pass


class DegenerateImage(Afford3dError):
    pass


class EmptyQuery(Afford3dError):
    pass


class NoActionFound(Afford3dError):
    """Query text contains no known action verb."""


class NoObjectFound(Afford3dError):
    """Query text contains no known object noun."""


class ObjectNotFound(Afford3dError):
    """Grounding backend could not locate the requested object."""


class BackendUnavailable(Afford3dError):
    pass


class ProtocolError(Afford3dError):
    pass


class LabelNotInStore(Afford3dError):
    pass


class DegenerateCorrespondences(Afford3dError):
    pass


class LengthMismatch(Afford3dError):
    pass


class DegenerateGroundTruth(Afford3dError):
    """Ground truth has a single class; AUC is undefined."""


class ZeroMassMap(Afford3dError):
    pass


class GtMapMissing(Afford3dError):
    """Oracle segmentation has no stored map for the requested affordance."""


class ValidationErrors(Afford3dError):
    """Aggregate of manifest validation failures; carries the full list."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__(f"{len(self.errors)} validation error(s)")

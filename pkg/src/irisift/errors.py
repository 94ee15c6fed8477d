"""Exception hierarchy shared by all modules."""


class IrisiftError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(IrisiftError, ValueError):
    pass


class SizeError(ParameterError):
    pass


class BoundsError(IrisiftError, IndexError):
    pass


class FormatError(IrisiftError, ValueError):
    pass


class SegmentationError(IrisiftError):
    """No circle received enough Hough votes."""


class IncomparableCodesError(IrisiftError):
    """Two iris codes share no valid bit at any tested shift."""


class ValidationError(IrisiftError, ValueError):
    pass

"""Exception types raised across the package."""


class QConnLabError(Exception):
    """Base class for all package errors."""


class OutOfPrincipalDomain(QConnLabError):
    pass


class GroupMismatch(QConnLabError):
    pass


class BaseMismatch(QConnLabError):
    pass


class NotInvertible(QConnLabError):
    pass


class NotComposable(QConnLabError):
    pass


class VariantMismatch(QConnLabError):
    pass


class HbarOutOfRange(QConnLabError):
    pass


class UnsupportedGraph(QConnLabError):
    pass


class BandOverflow(QConnLabError):
    pass


class GridMismatch(QConnLabError):
    pass


class HbarNotAdmissible(QConnLabError):
    pass


class DegreeOverflow(QConnLabError):
    pass


class NonlinearSymbol(QConnLabError):
    pass


class UnsupportedGroup(QConnLabError):
    pass


class WidthTooSmallForGrid(QConnLabError):
    pass


class NoRefinement(QConnLabError):
    pass


class ConfigInvalid(QConnLabError):
    pass


class FileUnreadable(QConnLabError):
    pass


class ToleranceFailed(QConnLabError):
    pass

"""Exception types shared across the package."""


class HippoError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(HippoError, ValueError):
    """A file or encoded buffer does not match the expected layout."""


class PageOutOfRange(HippoError, IndexError):
    pass


class TupleNotFound(HippoError, KeyError):
    pass


class StaleIndexError(HippoError):
    """The index no longer describes the table it was built on."""


class CorrectnessError(HippoError):
    """An index answer disagreed with the full-scan oracle."""

"""Exception hierarchy shared by every besttime module."""


class BestTimeError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"


class InvalidArgumentError(BestTimeError, ValueError):
    code = "invalid-argument"


class EmptyCandidateError(BestTimeError):
    code = "empty-candidate"


class DegenerateAssemblyError(BestTimeError):
    code = "degenerate-assembly"


class NotFoundError(BestTimeError, KeyError):
    code = "not-found"

    def __str__(self):
        return Exception.__str__(self)


class ConfigurationError(BestTimeError):
    code = "configuration"


class UndefinedRatioError(BestTimeError, ZeroDivisionError):
    code = "undefined-ratio"


class PublishRejectedError(BestTimeError):
    code = "publish-rejected"


class UnknownUseCaseError(BestTimeError):
    code = "unknown-use-case"

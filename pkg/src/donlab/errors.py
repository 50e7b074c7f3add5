"""Exception taxonomy shared by all donlab modules."""


class DonlabError(Exception):
    """Base class for all donlab errors."""


class ConfigurationError(DonlabError, ValueError):
    """A config object or plan is invalid (bad dims, infeasible sizing, ...)."""


class InputError(DonlabError, ValueError):
    """Runtime arguments violate an operation's preconditions."""


class FormatError(DonlabError, ValueError):
    """A file on disk does not match the expected schema."""


class NumericalError(DonlabError, RuntimeError):
    """A numerical procedure failed (non-PD kernel, non-finite loss, ...)."""


class DivergenceError(NumericalError):
    """A time-stepping solve blew up."""

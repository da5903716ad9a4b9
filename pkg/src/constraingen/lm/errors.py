"""Typed failures of remote backends.

Retryable errors are transient (network, timeouts, 5xx, 429); fatal ones
mean the server or the request is wrong and retrying cannot help.
"""


class BackendError(RuntimeError):
    retryable = False


class RetryableBackendError(BackendError):
    retryable = True


class FatalBackendError(BackendError):
    retryable = False


class BackendTimeout(RetryableBackendError):
    pass


class BackendUnavailable(RetryableBackendError):
    """Connection failures, 5xx and 429 responses."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BackendRequestError(FatalBackendError):
    """4xx other than 429: the request was rejected."""

    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


class MalformedResponse(FatalBackendError):
    """Body is not JSON or does not match the wire schema."""


class OutOfVocabulary(ValueError):
    def __init__(self, word: str):
        super().__init__(f"out-of-vocabulary word {word!r}")
        self.word = word

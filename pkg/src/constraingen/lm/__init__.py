from .base import LmBackend, generated_words, log_softmax, sequence_logprob
from .errors import (
    BackendError,
    BackendRequestError,
    BackendTimeout,
    BackendUnavailable,
    FatalBackendError,
    MalformedResponse,
    OutOfVocabulary,
    RetryableBackendError,
)
from .http import HttpLm
from .ngram import EOS, NgramLm, build_ngram, load_corpus
from .table import TableLm

__all__ = [
    "LmBackend", "generated_words", "log_softmax", "sequence_logprob",
    "BackendError", "BackendRequestError", "BackendTimeout", "BackendUnavailable",
    "FatalBackendError", "MalformedResponse", "OutOfVocabulary", "RetryableBackendError",
    "HttpLm", "EOS", "NgramLm", "build_ngram", "load_corpus", "TableLm",
]

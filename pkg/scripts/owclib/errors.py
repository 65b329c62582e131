from typing import Optional, Sequence

EXIT_GENERIC = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_BACKEND = 4
EXIT_JUDGE_PARSE = 5


class OwcError(Exception):
    """
    Base class for every error raised by owclib. Each subclass carries the process exit code
    that `owc` returns when the error is not recovered from.
    """

    exit_code = EXIT_GENERIC
    retriable = False


class ConfigError(OwcError):
    exit_code = EXIT_CONFIG


class ResumeRefusedError(ConfigError):
    def __init__(self, stored_hash: str, current_hash: str):
        super().__init__(
            f"Refusing to resume: store was created with config {stored_hash[:12]}, current config is "
            f"{current_hash[:12]}. Pass --force-resume to override."
        )
        self.stored_hash = stored_hash
        self.current_hash = current_hash


class IngestError(OwcError):
    exit_code = EXIT_IO

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class ValidationError(IngestError):
    pass


class MissingSplitsError(IngestError):
    pass


class BackendError(OwcError):
    exit_code = EXIT_BACKEND

    def __init__(self, message: str, texts: Sequence[str] = ()):
        super().__init__(message)
        self.texts = list(texts)


class TransportError(BackendError):
    retriable = True


class HttpRejectionError(BackendError):
    def __init__(self, message: str, status_code: int, texts: Sequence[str] = ()):
        super().__init__(message, texts)
        self.status_code = status_code


class MalformedResponseError(BackendError):
    pass


class DimensionMismatchError(BackendError):
    pass


class JudgeParseError(OwcError):
    exit_code = EXIT_JUDGE_PARSE
    retriable = True

    def __init__(self, reply: str):
        super().__init__(f"Judge reply contains no standalone 0 or 1: {reply!r}")
        self.reply = reply


class AdjudicationError(JudgeParseError):
    pass


class AnalysisError(OwcError):
    pass


class InsufficientModelsError(AnalysisError):
    pass


class EmptyStoreError(AnalysisError):
    pass

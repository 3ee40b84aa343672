"""Exception hierarchy shared by every smeta module."""


class SmetaError(Exception):
    """Base class for all errors raised by this package."""


class SampleCountTooSmall(SmetaError):
    def __init__(self, sample_count, window_size, subject_id=None):
        self.sample_count = sample_count
        self.window_size = window_size
        self.subject_id = subject_id
        who = f" (subject {subject_id})" if subject_id is not None else ""
        super().__init__(
            f"signal has {sample_count} samples, window needs {window_size}{who}"
        )


class InvalidTargetLength(SmetaError):
    pass


class EmptySignal(SmetaError):
    pass


class ShapeMismatch(SmetaError):
    pass


class EmptyBatch(SmetaError):
    pass


class EmptyTask(SmetaError):
    pass


class VariantMismatch(SmetaError):
    pass


class InsufficientSubjects(SmetaError):
    pass


class InsufficientSignals(SmetaError):
    def __init__(self, subject_id, available, needed):
        self.subject_id = subject_id
        super().__init__(
            f"subject {subject_id} has {available} signals, episode needs {needed}"
        )


class MissingSideLabel(SmetaError):
    pass


class EmptySubject(SmetaError):
    pass


class LengthMismatch(SmetaError):
    pass


class EmptyInput(SmetaError):
    pass


class SingleClassInput(SmetaError):
    pass


class ParseError(SmetaError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InconsistentWidth(ParseError):
    pass


class BadEnum(ParseError):
    pass


class SchemaMismatch(SmetaError):
    pass

"""Exception types shared across the package."""


class DepmineError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DepmineError):
    """A configuration object violates its invariants."""


class ConlluParseError(DepmineError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TreeValidityError(DepmineError):
    def __init__(self, message, sent_id=None):
        if sent_id is not None:
            message = f"sentence {sent_id}: {message}"
        super().__init__(message)
        self.sent_id = sent_id


class EmptyLexiconError(DepmineError):
    """No lexicon entry survived vocabulary filtering."""


class TrainingDivergedError(DepmineError):
    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class ConvergenceError(DepmineError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations

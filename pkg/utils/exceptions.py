"""
Domain errors raised across extraction, storage, training and the CLI
"""


class CodeGraphError(Exception):
    """Base class for every error raised by this package"""


class ParseError(CodeGraphError):
    def __init__(self, offset: int, message: str = "syntax error"):
        self.offset = offset
        super().__init__(f"{message} at byte {offset}")


class TaxonomyError(CodeGraphError):
    def __init__(self, kinds):
        self.kinds = sorted(set(kinds))
        super().__init__(f"no taxonomy mapping for: {', '.join(self.kinds)}")


class DimensionMismatch(CodeGraphError):
    pass


class FormatError(CodeGraphError):
    pass


class ChecksumError(CodeGraphError):
    pass


class ShapeError(CodeGraphError):
    pass


class DegenerateInput(CodeGraphError):
    pass


class NonFiniteLoss(CodeGraphError):
    def __init__(self, batch_id, value=None):
        self.batch_id = batch_id
        self.value = value
        super().__init__(f"non-finite loss {value} in batch {batch_id}")


class FrozenViolation(CodeGraphError):
    pass


class LengthError(CodeGraphError):
    pass


class ConfigError(CodeGraphError):
    def __init__(self, key: str, reason: str = "invalid value"):
        self.key = key
        super().__init__(f"config key '{key}': {reason}")

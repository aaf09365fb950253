"""Exception hierarchy shared across the package."""


class BaformerError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(BaformerError, ValueError):
    def __init__(self, kind, detail):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: shape mismatch ({detail})")


class NonFiniteError(BaformerError, FloatingPointError):
    pass


class ConfigError(BaformerError, ValueError):
    pass


class MatchingError(BaformerError, ValueError):
    pass


class FormatError(BaformerError, ValueError):
    """Malformed feature, label, manifest or checkpoint file."""


class BadMagicError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class LabelRangeError(FormatError):
    pass


class LengthMismatchError(FormatError):
    pass

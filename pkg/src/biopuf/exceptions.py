"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A parameter violates its documented constraints."""


class DimensionError(ValueError):
    """Grids or keys have incompatible shapes or lengths."""


class UndefinedCorrelationError(ValueError):
    """Correlation requested between grids with zero variance."""


class NoIntersectionError(RuntimeError):
    """The fitted inter/intra densities never cross on the search interval."""


class DuplicateRecordError(RuntimeError):
    """A (puf_id, challenge_id) pair is already enrolled."""


class RecordNotFoundError(KeyError):
    """No enrolled record matches the requested (puf_id, challenge_id)."""


class KeyCapacityError(RuntimeError):
    """One-time-pad capacity of a key is exhausted; key reuse is refused."""


class FormatError(ValueError):
    """A serialized artifact (key, ciphertext, PGM, store index) is malformed."""

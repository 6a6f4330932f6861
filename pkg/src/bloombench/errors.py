"""Exception types shared across bloombench modules.

Every error raised by the library derives from :class:`BloombenchError`
so callers can catch the whole family at once. Names follow the error
vocabulary that also appears in store-validation reports and HTTP
responses.
"""


class BloombenchError(Exception):
    """Base class for all bloombench errors."""


# --- raster store ---------------------------------------------------------

class RootNotFound(BloombenchError):
    """Store root directory does not exist."""


class MissingHeader(BloombenchError):
    """scene.json is absent or structurally invalid."""


class BandSizeMismatch(BloombenchError):
    """A band file is missing or its sample count does not match width*height."""


class NonFiniteSample(BloombenchError):
    """A band sample is NaN or infinite."""


class DuplicateBandName(BloombenchError):
    """The header declares the same band name twice."""


class UnknownBand(BloombenchError):
    """Requested band is not declared by the scene."""


# --- masks ----------------------------------------------------------------

class RunSumMismatch(BloombenchError):
    """RLE counts do not sum to width*height (or contain interior zeros)."""


# --- prompt-driven segmentation -------------------------------------------

class InvalidPrompts(BloombenchError):
    """A prompt set violates one of its invariants; message names which."""


class DegeneratePrompts(BloombenchError):
    """All positive points fall on nodata pixels."""


# --- severity -------------------------------------------------------------

class InvalidDensity(BloombenchError):
    """Cell density is negative, NaN, or infinite."""


class LengthMismatch(BloombenchError):
    """Paired prediction/truth sequences differ in length."""


class EmptyInput(BloombenchError):
    """An aggregate was requested over zero items."""


# --- metrics / losses -----------------------------------------------------

class DimensionMismatch(BloombenchError):
    """Two rasters or masks that must share dimensions do not."""


class EmptySequence(BloombenchError):
    """A token sequence with zero positions was supplied."""


# --- triplets -------------------------------------------------------------

class TooFewTemplates(BloombenchError):
    """Asked to sample more templates than the template set contains."""


class MalformedLine(BloombenchError):
    """A JSONL line failed to parse; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# --- curation service -----------------------------------------------------

class UnknownScene(BloombenchError):
    """Referenced scene_id is not in the store."""


class UnknownSession(BloombenchError):
    """Referenced session_id does not exist."""


class SessionClosed(BloombenchError):
    """The session has already been decided."""


class NoCandidates(BloombenchError):
    """Decision by index requires candidates, but none were generated."""


class BadCandidateIndex(BloombenchError):
    """chosen_candidate is outside the candidate list."""


class MalformedMask(BloombenchError):
    """A submitted mask does not decode or has the wrong dimensions."""


class InvalidDecision(BloombenchError):
    """A decision payload violates the decision invariants."""


class ExportPathUnwritable(BloombenchError):
    """The export directory cannot be created or written."""

"""Exception hierarchy.

Every error raised by the package derives from :class:`CohgramError`. The CLI
maps the three intermediate bases onto exit codes (input 1, config 2,
numerical 3).
"""


class CohgramError(Exception):
    """Base class for all package errors."""


class InputError(CohgramError):
    """Bad or unreadable input data."""


class ConfigError(CohgramError):
    """Invalid parameters or specification."""


class NumericalError(CohgramError):
    """A computation produced an unusable result."""


# ingestion
class MissingSidecar(InputError):
    pass


class MalformedHeader(InputError):
    pass


class MalformedRecording(InputError):
    pass


class NonFiniteSample(InputError):
    def __init__(self, channel, index):
        self.channel = int(channel)
        self.index = int(index)
        super().__init__(f"non-finite sample at channel {self.channel}, index {self.index}")


class DuplicateChannelLabel(InputError):
    pass


class RecordingTooShort(InputError):
    pass


class DimMismatch(InputError):
    pass


class BadMagic(InputError):
    pass


class TruncatedPayload(InputError):
    pass


class HeaderNotJson(InputError):
    pass


# dsp / features
class BandExceedsNyquist(ConfigError):
    pass


class SignalTooShort(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class TooFewSegments(InputError):
    pass


class LengthMismatch(InputError):
    pass


class BandMismatch(InputError):
    pass


class EmptyBand(ConfigError):
    pass


class ZeroVariance(NumericalError):
    pass


class SignalShorterThanWindow(InputError):
    pass


# synth / evaluation
class InvalidSpec(ConfigError):
    pass


class TooFewSubjects(InputError):
    pass


class EmptyManifest(InputError):
    pass


class MissingClass(InputError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class ChanceIsCertainty(ConfigError):
    pass

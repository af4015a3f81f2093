"""Exception hierarchy. Every failure mode raised by the library derives from MRConvError."""


class MRConvError(Exception):
    pass


class InvalidLength(MRConvError):
    """Transform length is not a power of two, or a size argument is out of range."""


class InvalidSpectrum(MRConvError):
    """Half-spectrum input violates the Hermitian constraints (DC/Nyquist must be real)."""


class InvalidSparsity(MRConvError):
    """More sparse taps requested than available positions."""


class InvalidResolution(MRConvError):
    """Branch length would exceed the configured maximum."""


class ShapeError(MRConvError):
    """Operands have incompatible shapes."""


class KernelTooLong(MRConvError):
    """Kernel length exceeds the sequence length."""


class InvalidMode(MRConvError):
    """Operation called in the wrong train/eval mode or merge style."""


class StaleMerge(MRConvError):
    """Merged kernel is out of date with respect to the layer parameters."""


class DegenerateBatch(MRConvError):
    """Batch statistics requested over a single element."""


class EmptyTape(MRConvError):
    """backward() called before any forward op was recorded."""


class NumericsError(MRConvError):
    """NaN/Inf encountered where finite values are required (e.g. gradients)."""


class FormatError(MRConvError):
    """Malformed external file (IDX container, checkpoint)."""


class InvalidBandLimit(MRConvError):
    """Waveform band limit would alias under the requested decimation."""


class IntegrationUnstable(MRConvError):
    """State norm diverged during the state-space recurrence."""


class ConfigError(MRConvError):
    """Run configuration failed schema validation."""


class CheckpointError(MRConvError):
    """Checkpoint is missing, corrupt, or fails integrity verification."""

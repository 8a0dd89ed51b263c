"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: usage problems (ConfigError and bad
flags) exit 1, data/protocol problems exit 2, numeric failures exit 3.
"""


class ContractViolation(ValueError):
    """A documented precondition was violated (shape/range/ordering)."""


class ConfigError(ValueError):
    """Run configuration file has unknown keys or unparseable values."""


class PgmError(ValueError):
    """Base class for PGM reader failures."""


class PgmFormatError(PgmError):
    """File is not binary 8-bit PGM (wrong magic or maxval)."""


class PgmParseError(PgmError):
    """File claims to be PGM but the header or payload is malformed."""


class AlignmentError(ValueError):
    """Landmark configuration too degenerate to estimate a transform."""


class ManifestError(ValueError):
    """Dataset manifest CSV is malformed or inconsistent."""


class FitError(ValueError):
    """Insufficient or degenerate sample for a model fit."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class ProtocolError(ValueError):
    """Evaluation protocol cannot be applied to the given gallery/probes."""


class StoreFormatError(ValueError):
    """Artifact file has a wrong magic, bad length, or undecodable layout."""


class InvariantViolation(ValueError):
    """A loaded artifact fails one of its documented invariants."""

"""Exception hierarchy for seqcredit.

Each error class maps to one failure category surfaced by the CLI:
configuration problems exit 1, failed theory checks exit 2, and
budget or capability limits exit 3.
"""


class SeqCreditError(Exception):
    """Base class for all seqcredit errors."""


class ConfigurationError(SeqCreditError):
    """Invalid configuration value (bad shape parameter, unknown key, ...)."""


class DomainError(SeqCreditError):
    """Input outside an operation's domain (bad action index, shape mismatch)."""


class DataError(SeqCreditError):
    """Malformed runtime data (NaN advantages, empty traces, too-small batches)."""


class CapabilityError(SeqCreditError):
    """Requested computation exceeds what exact enumeration can support."""


class BudgetError(SeqCreditError):
    """Real-environment-call budget exhausted or insufficient."""


class TheoryCheckFailure(SeqCreditError):
    """A numeric theorem verification reported violations."""

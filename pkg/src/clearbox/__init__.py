"""clearbox: a transparency toolchain for personal-data usage.

Tools report every data access through the monitor SDK; the safekeeper
verifies who is reporting, chains the event into a tamper-evident log, and
answers owner-scoped queries, summaries, and anomaly scores; owners can file
justification requests against individual usages.
"""

from .model import (
    GENESIS_HASH,
    UsageEvent,
    VerificationReport,
    canonical_encode,
    compute_entry_hash,
    verify_chain,
)

__version__ = "0.1.0"

__all__ = [
    "GENESIS_HASH",
    "UsageEvent",
    "VerificationReport",
    "canonical_encode",
    "compute_entry_hash",
    "verify_chain",
    "__version__",
]

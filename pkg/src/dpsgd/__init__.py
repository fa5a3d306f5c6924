"""Asynchronous distributed + lock-free parallel SGD engine.

A master combines fixed-size batches of worker deltas into a global model;
each worker runs several threads over a shared parameter slab without
locks, accepting lost updates in exchange for throughput. Drivers are
included for synthetic stochastic optimisation problems, stochastic
variational inference for LDA, and a small actor-critic gridworld agent.
"""

from .errors import (
    ConfigurationError,
    CorpusFormatError,
    DpsgdError,
    NumericFaultError,
    TransportError,
    WireProtocolError,
)

__all__ = [
    "ConfigurationError",
    "CorpusFormatError",
    "DpsgdError",
    "NumericFaultError",
    "TransportError",
    "WireProtocolError",
]

__version__ = "0.1.0"

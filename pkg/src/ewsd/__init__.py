"""Exact secrecy metrics for coset codes on the binary erasure wiretap channel."""

from ewsd.errors import EwsdError, ResourceError, UsageError

__version__ = "0.1.0"

__all__ = ["EwsdError", "ResourceError", "UsageError", "__version__"]

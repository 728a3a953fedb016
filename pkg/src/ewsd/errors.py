"""Exception types shared across the package.

Each carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class EwsdError(Exception):
    exit_code = 1


class UsageError(EwsdError, ValueError):
    """Bad arguments or inputs that violate a documented precondition."""

    exit_code = 2


class ResourceError(EwsdError):
    """Requested size exceeds a hard cap (blocklength, lattice dimension)."""

    exit_code = 3

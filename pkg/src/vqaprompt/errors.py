"""Exception types shared across the pipeline, mapped to CLI exit codes."""

from __future__ import annotations


class VqaPromptError(Exception):
    """Base class for all errors raised by this package."""


class ArtifactError(VqaPromptError):
    """Malformed or inconsistent on-disk artifact (manifest, bank, vocab, table)."""


class HeuristicsError(VqaPromptError):
    """Contract violation in candidate generation or example selection."""


class ScorerError(HeuristicsError):
    """Autoregressive scorer returned an invalid distribution or failed."""


class PromptError(VqaPromptError):
    """Prompt cannot be rendered with the given sample/config combination."""


class GatewayError(VqaPromptError):
    """LLM gateway failure."""


class RetryExhaustedError(GatewayError):
    """All retry attempts failed with transient errors."""


class AuthenticationError(GatewayError):
    """Endpoint rejected the credentials; not retryable."""


class MalformedResponseError(GatewayError):
    """Endpoint reply did not match the completions wire format."""


class EmptyCompletionError(GatewayError):
    """Completion text was empty after stop-sequence truncation and trimming."""


class ConfigError(VqaPromptError):
    """Invalid or incomplete run configuration."""


class InvariantViolation(VqaPromptError):
    """A self-check on report internals failed (fractions, ranges, alignment)."""


# CLI exit codes. 1 is left to unexpected crashes.
EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_GATEWAY = 3
EXIT_CONFIG = 4

"""Package-level error types.

These map onto the CLI exit codes: configuration problems exit with 2,
data validation failures with 3, and anything unexpected with 4.
"""

from __future__ import annotations


class ConfigError(Exception):
    """A configuration document or profile definition is unusable.

    ``violations`` holds one human-readable line per offending field,
    each prefixed with the field's path inside the document.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataValidationError(Exception):
    """Session data violates a structural or feasibility rule."""

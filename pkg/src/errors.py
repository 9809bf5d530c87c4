"""
Exception types raised by the workbench components.
"""
from typing import Optional


class WorkbenchError(Exception):
    """Base class for every error the workbench reports to the command line."""


class GraphFormatError(WorkbenchError):
    def __init__(self, message: str, line: Optional[int] = None):
        """Initialize a parse error.

        Args:
            message: Description of the problem
            line: 1-based line number in the graph file, if known
        """
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class GraphValidationError(WorkbenchError):
    pass


class SelectionError(WorkbenchError):
    pass


class AssumptionError(WorkbenchError):
    pass


class RegimeError(WorkbenchError):
    """A numerical kernel was called outside its operational thresholds."""


class ConvergenceError(WorkbenchError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ScenarioError(WorkbenchError):
    pass

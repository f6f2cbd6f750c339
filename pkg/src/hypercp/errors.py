"""Shared error types.

Domain errors (bad parameter values, malformed inputs) raise plain
``ValueError``; the classes here cover resource-limit failures so callers can
tell "you asked for something impossible" apart from "this run got too big".
"""


class CapacityError(RuntimeError):
    """A build exceeded a configured size budget (vertices, edges, states)."""


class BudgetError(RuntimeError):
    """An enumeration or sampled record exceeded a configured work budget."""

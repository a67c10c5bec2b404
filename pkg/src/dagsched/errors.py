"""Exception types shared across the toolkit."""


class DagschedError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DagschedError):
    """A DAG or task violates a structural rule.

    ``rule`` names the first violated rule: "cycle", "dangling-edge",
    "self-loop", or a task-level rule such as "deadline".
    """

    def __init__(self, rule, message):
        super().__init__(message)
        self.rule = rule


class PathExplosionError(DagschedError):
    """Path enumeration aborted because the path count exceeds the cap."""


class OracleLimitError(DagschedError):
    """Brute-force enumeration refused: the search space exceeds the guard."""


class SolverLimitError(DagschedError):
    """Exact solver exceeded its node or pivot budget."""


class SimulationError(DagschedError):
    """Simulator misuse (horizon too small, incomplete job queried, ...)."""

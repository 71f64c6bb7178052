"""Interpreter and equivalence checker for CQP models of linear-optical quantum gates."""
from .equivalence import Verdict, check_pbb, congruence_spot_check
from .errors import CQPError, CQPSyntaxError
from .lang import check_ownership, parse, pretty_print
from .models import InputStateSpec, ModelId, build, default_family, environment_for
from .semantics import EnvironmentSchedule, Injection, Limits, explore, output_distribution, run

__version__ = "0.1.0"

__all__ = [
    "Verdict", "check_pbb", "congruence_spot_check", "CQPError", "CQPSyntaxError",
    "check_ownership", "parse", "pretty_print", "InputStateSpec", "ModelId", "build",
    "default_family", "environment_for", "EnvironmentSchedule", "Injection", "Limits",
    "explore", "output_distribution", "run",
]

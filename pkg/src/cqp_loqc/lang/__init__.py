"""Concrete syntax, AST, expansion and ownership checking."""
from .ast import *  # noqa: F401,F403
from .expand import base_name, expand, free_names, substitute
from .ownership import Diagnostic, check_ownership
from .parser import parse, parse_expr, parse_process
from .printer import pretty_print

__all__ = [
    "base_name", "expand", "free_names", "substitute", "Diagnostic", "check_ownership",
    "parse", "parse_expr", "parse_process", "pretty_print",
]

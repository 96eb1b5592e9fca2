from .parser import parse_module
from .resolve import resolve, ResolvedModule
from .pretty import pretty_module, pretty_expr, pretty_type

__all__ = ["parse_module", "resolve", "ResolvedModule", "pretty_module", "pretty_expr", "pretty_type"]

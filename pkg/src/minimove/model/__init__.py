from .ir import IrModule, IrFunction
from .analysis import (
    monomorphize, collect_variants, access_profile, build_model, ProgramModel,
    FunVariantSet, AccessProfile, type_key,
)
from .lower import lower

__all__ = [
    "IrModule", "IrFunction", "monomorphize", "lower", "collect_variants",
    "access_profile", "build_model", "ProgramModel", "FunVariantSet",
    "AccessProfile", "type_key",
]

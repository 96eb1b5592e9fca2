"""Three-address style IR with structured control flow.

All locals hold values; reference types disappear during lowering. Reads and
writes through references resolve statically to places (a local slot or a
global (resource, address) cell), which is what Move's alias-free reference
discipline guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..diagnostics import Span
from ..frontend import ast_nodes as A


# -- operands -----------------------------------------------------------------

@dataclass(frozen=True)
class OLocal:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class OInt:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class OBool:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


Operand = Union[OLocal, OInt, OBool]


# -- places ---------------------------------------------------------------------

@dataclass(frozen=True)
class PLocal:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PGlobal:
    resource: str
    addr: Operand

    def __str__(self):
        return f"{self.resource}[{self.addr}]"


Place = Union[PLocal, PGlobal]


# -- call arguments ----------------------------------------------------------------

@dataclass(frozen=True)
class AVal:
    op: Operand


@dataclass(frozen=True)
class ARef:
    place: Place
    mut: bool


# -- rvalues -------------------------------------------------------------------------

@dataclass
class RUse:
    op: Operand


@dataclass
class RBin:
    op: str
    lhs: Operand
    rhs: Operand
    width: int  # 64 or 128; abort-on-overflow semantics


@dataclass
class RUn:
    op: str
    arg: Operand


@dataclass
class RCast:
    arg: Operand
    from_width: int
    to_width: int  # narrowing aborts when out of range


@dataclass
class RPack:
    sname: str
    fields: list  # [(fname, Operand)]
    site: int


@dataclass
class RFieldGet:
    base: Operand
    fname: str


@dataclass
class RClosure:
    impl: str  # synthetic lambda function symbol
    captures: list  # [Operand]
    fun_type: A.TFun
    site: int


@dataclass
class RFunRef:
    fname: str
    fun_type: A.TFun
    site: int


Rvalue = Union[RUse, RBin, RUn, RCast, RPack, RFieldGet, RClosure, RFunRef]


# -- instructions ------------------------------------------------------------------------

@dataclass
class Instr:
    span: Span = field(default_factory=Span, kw_only=True)


@dataclass
class IAssign(Instr):
    dst: str
    rv: Rvalue


@dataclass
class IBorrowGlobal(Instr):
    """Establishes a global place; aborts when the resource is absent."""

    dst: str  # ref-typed local bound to the place
    resource: str
    addr: Operand
    mut: bool


@dataclass
class ILoadPlace(Instr):
    dst: str
    place: Place


@dataclass
class IFieldSet(Instr):
    place: Place
    fname: str
    value: Operand


@dataclass
class IVecLen(Instr):
    dst: str
    base: Operand


@dataclass
class IVecGet(Instr):
    dst: str
    base: Operand
    index: Operand  # aborts when index >= length


@dataclass
class ICall(Instr):
    dsts: list
    fname: str
    args: list  # [AVal | ARef]
    site: int = 0


@dataclass
class IInvoke(Instr):
    dsts: list
    callee: Operand
    fun_type: A.TFun = None
    args: list = field(default_factory=list)
    site: int = 0


@dataclass
class IMoveTo(Instr):
    resource: str
    addr: Operand
    value: Operand
    site: int = 0


@dataclass
class IMoveFrom(Instr):
    dst: str
    resource: str
    addr: Operand


@dataclass
class IExists(Instr):
    dst: str
    resource: str
    addr: Operand


@dataclass
class IReturn(Instr):
    ops: list


@dataclass
class IAbort(Instr):
    code: Operand


@dataclass
class IIf(Instr):
    cond: Operand
    then: list
    els: list


@dataclass
class ILoop(Instr):
    """Reducible loop: evaluate `cond_block` then branch on `cond`; the header
    carries the user's loop invariants (possibly empty)."""

    invariants: list  # [SpecClause]
    cond_block: list
    cond: Operand
    body: list


@dataclass
class IrFunction:
    name: str
    params: list  # [(name, Type)] -- reference params hold the target value
    results: list
    body: list  # [Instr]
    locals: dict = field(default_factory=dict)  # name -> Type
    mut_ref_params: list = field(default_factory=list)
    ref_params: list = field(default_factory=list)
    decl: Optional[A.FunDecl] = None
    spec: Optional[A.SpecBlock] = None
    is_lambda_impl: bool = False
    n_captures: int = 0
    span: Span = field(default_factory=Span)

    def param_value_type(self, i):
        return A.strip_ref(self.params[i][1])


@dataclass
class IrModule:
    name: str
    functions: dict  # name -> IrFunction
    typed: object = None  # TypedModule

    def walk_instrs(self, fn: IrFunction):
        def go(instrs):
            for i in instrs:
                yield i
                if isinstance(i, IIf):
                    yield from go(i.then)
                    yield from go(i.els)
                elif isinstance(i, ILoop):
                    yield from go(i.cond_block)
                    yield from go(i.body)
        yield from go(fn.body)

"""AST node definitions for MiniMove source: types, expressions, statements,
declarations, and specification constructs.

Nodes are plain mutable dataclasses; later passes annotate them in place
(resolution bindings on `EVar.binding`, types on `.ty`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..diagnostics import Span

ABILITIES = ("copy", "drop", "store", "key")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class Type:
    pass


@dataclass(frozen=True)
class TUInt(Type):
    width: int  # 64 or 128

    def __str__(self):
        return f"u{self.width}"


@dataclass(frozen=True)
class TBool(Type):
    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class TAddress(Type):
    def __str__(self):
        return "address"


@dataclass(frozen=True)
class TNum(Type):
    """Unbounded integer; the type of arithmetic inside specifications."""

    def __str__(self):
        return "num"


@dataclass(frozen=True)
class TVector(Type):
    elem: Type

    def __str__(self):
        return f"vector<{self.elem}>"


@dataclass(frozen=True)
class TStruct(Type):
    name: str
    args: tuple = ()

    def __str__(self):
        if self.args:
            return f"{self.name}<{', '.join(map(str, self.args))}>"
        return self.name


@dataclass(frozen=True)
class TParam(Type):
    """A function-level type parameter (resolved from a bare name)."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TRef(Type):
    mut: bool
    target: Type

    def __str__(self):
        return ("&mut " if self.mut else "&") + str(self.target)


@dataclass(frozen=True)
class TFun(Type):
    params: tuple
    results: tuple
    abilities: frozenset = frozenset()

    def __str__(self):
        ps = ",".join(str(p) for p in self.params)
        rs = "".join(str(r) for r in self.results)
        s = f"|{ps}|{rs}"
        if self.abilities:
            s += " has " + ", ".join(a for a in ABILITIES if a in self.abilities)
        return s

    def key(self) -> "TFun":
        """Identity of the function type for variant analysis: abilities are
        a value-class constraint, not part of the type's behavior."""
        return TFun(self.params, self.results, frozenset())


def strip_ref(t: Type) -> Type:
    return t.target if isinstance(t, TRef) else t


# ---------------------------------------------------------------------------
# Expressions (code and spec share one tree; some nodes are spec-only)
# ---------------------------------------------------------------------------

@dataclass
class Expr:
    span: Span = field(default_factory=Span, kw_only=True)
    ty: Optional[Type] = field(default=None, kw_only=True)


@dataclass
class EInt(Expr):
    value: int


@dataclass
class EBool(Expr):
    value: bool


@dataclass
class EConst(Expr):
    name: str  # MAX_U64 | MAX_U128


@dataclass
class EVar(Expr):
    name: str
    binding: Optional[str] = field(default=None, kw_only=True)  # local|param|fun|spec_fun


@dataclass
class EField(Expr):
    base: Expr
    fname: str


@dataclass
class EIndex(Expr):
    base: Expr
    index: Expr


@dataclass
class EGlobal(Expr):
    """Global resource read `R[addr]` (resolved from EIndex on a struct name)."""

    resource: str
    addr: Expr


@dataclass
class EVecLen(Expr):
    base: Expr
    method_style: bool = False  # v.length() vs len(v)


@dataclass
class ECall(Expr):
    fname: str
    type_args: list
    args: list


@dataclass
class EInvoke(Expr):
    callee: Expr
    args: list


@dataclass
class ELambda(Expr):
    params: list  # [str]
    body: Expr
    spec: Optional["SpecBlock"] = None
    lambda_id: int = -1
    captures: list = field(default_factory=list)  # [(name, Type)] after typeck
    param_types: list = field(default_factory=list)
    result_types: list = field(default_factory=list)


@dataclass
class EFunValue(Expr):
    """A named function used as a first-class value."""

    fname: str


@dataclass
class EBinop(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass
class EUnop(Expr):
    op: str
    arg: Expr


@dataclass
class ECast(Expr):
    arg: Expr
    to: Type


@dataclass
class EIf(Expr):
    cond: Expr
    then: Expr
    els: Optional[Expr]


@dataclass
class EBlock(Expr):
    stmts: list
    tail: Optional[Expr]


@dataclass
class EPack(Expr):
    sname: str
    fields: list  # [(fname, Expr)]
    enum_variant: Optional[str] = None


@dataclass
class EBorrow(Expr):
    mut: bool
    target: Expr


@dataclass
class EMoveTo(Expr):
    resource: str
    addr: Expr
    value: Expr


@dataclass
class EMoveFrom(Expr):
    resource: str
    addr: Expr


@dataclass
class EExistsGlobal(Expr):
    resource: str
    addr: Expr


# --- spec-only nodes -------------------------------------------------------

BEHAVIORAL_KINDS = ("requires_of", "aborts_of", "ensures_of", "result_of")


@dataclass
class EOld(Expr):
    arg: Expr


@dataclass
class EResult(Expr):
    index: int = 0


@dataclass
class EBehavioral(Expr):
    kind: str  # one of BEHAVIORAL_KINDS
    target: Expr  # param var, field path, global field path, or named function
    args: list


@dataclass(frozen=True)
class StateRange:
    kind: str  # single | from | to | between
    a: Optional[str] = None
    b: Optional[str] = None

    def labels(self):
        return [x for x in (self.a, self.b) if x is not None]

    def __str__(self):
        if self.kind == "single":
            return self.a
        if self.kind == "from":
            return f"{self.a}.."
        if self.kind == "to":
            return f"..{self.b}"
        return f"{self.a}..{self.b}"


@dataclass
class ELabeled(Expr):
    range: StateRange
    body: Expr


@dataclass
class Binder:
    kind: str  # label | range | typed
    name: str
    lo: Optional[Expr] = None
    hi: Optional[Expr] = None
    btype: Optional[Type] = None


@dataclass
class EQuant(Expr):
    quant: str  # forall | exists
    binders: list
    body: Expr


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass
class Stmt:
    span: Span = field(default_factory=Span, kw_only=True)


@dataclass
class SLet(Stmt):
    name: str
    ty: Optional[Type]
    value: Expr


@dataclass
class SAssign(Stmt):
    lvalue: Expr
    op: str  # = | += | -=
    value: Expr


@dataclass
class SExpr(Stmt):
    value: Expr


@dataclass
class SReturn(Stmt):
    value: Optional[Expr]


@dataclass
class SAbort(Stmt):
    code: Expr


@dataclass
class SIf(Stmt):
    cond: Expr
    then: list
    els: Optional[list]


@dataclass
class SWhile(Stmt):
    cond: Expr
    body: list
    invariants: list = field(default_factory=list)  # [SpecClause]


# ---------------------------------------------------------------------------
# Specifications
# ---------------------------------------------------------------------------

@dataclass
class SpecClause:
    kind: str  # requires | aborts_if | ensures | invariant
    expr: Expr
    inferred: bool = False
    span: Span = field(default_factory=Span)


@dataclass
class ReadsDecl:
    target: Expr  # path: param var or self.field
    resources: Optional[list]  # None means wildcard '*'
    span: Span = field(default_factory=Span)


@dataclass
class ModifiesOfDecl:
    target: Expr
    params: list  # [(name, Type)] binders for the value's own parameters
    locations: Optional[list]  # [(resource, addr Expr)]; None means '*'
    span: Span = field(default_factory=Span)


@dataclass
class ModifiesDecl:
    """Code-function modifies declaration: `modifies R[addr_expr];`."""

    resource: str
    addr: Expr
    span: Span = field(default_factory=Span)


@dataclass
class SpecBlock:
    clauses: list = field(default_factory=list)  # [SpecClause]
    reads_of: list = field(default_factory=list)
    modifies_of: list = field(default_factory=list)
    modifies: list = field(default_factory=list)
    pragmas: set = field(default_factory=set)
    span: Span = field(default_factory=Span)

    def of_kind(self, kind: str) -> list:
        return [c for c in self.clauses if c.kind == kind]

    @property
    def requires(self):
        return self.of_kind("requires")

    @property
    def aborts_if(self):
        return self.of_kind("aborts_if")

    @property
    def ensures(self):
        return self.of_kind("ensures")

    @property
    def invariants(self):
        return self.of_kind("invariant")


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass
class FieldDecl:
    name: str
    ty: Type
    span: Span = field(default_factory=Span)


@dataclass
class StructDecl:
    name: str
    abilities: frozenset
    fields: list  # [FieldDecl]
    positional: bool = False
    spec: Optional[SpecBlock] = None
    from_enum: Optional[str] = None
    span: Span = field(default_factory=Span)

    def field(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass
class EnumDecl:
    name: str
    abilities: frozenset
    variants: list  # [(vname, Type)]
    span: Span = field(default_factory=Span)


@dataclass
class FunDecl:
    name: str
    type_params: list  # [str]
    params: list  # [(name, Type)]
    results: list  # [Type]
    body: Optional[Expr]  # EBlock; None for spec-only declarations
    spec: Optional[SpecBlock] = None
    span: Span = field(default_factory=Span)
    lambdas: list = field(default_factory=list)  # collected ELambda nodes

    @property
    def is_generic(self):
        return bool(self.type_params)


@dataclass
class SpecFunDecl:
    name: str
    type_params: list
    params: list
    result: Type
    body: Expr
    span: Span = field(default_factory=Span)


@dataclass
class OrphanSpec:
    """A `spec Name (sig)? { ... }` block to be attached during resolution."""

    name: str
    params: Optional[list]  # signature-carrying spec declares a body-less fun
    block: SpecBlock
    span: Span = field(default_factory=Span)


@dataclass
class ModuleAst:
    name: str
    structs: list
    enums: list
    functions: list
    spec_functions: list
    orphan_specs: list
    span: Span = field(default_factory=Span)
    source_file: str = "<input>"


def walk_expr(e, fn):
    """Pre-order walk calling fn on every Expr node."""
    if e is None or not isinstance(e, Expr):
        return
    fn(e)
    for child in _children(e):
        walk_expr(child, fn)


def _children(e):
    if isinstance(e, EField):
        return [e.base]
    if isinstance(e, EIndex):
        return [e.base, e.index]
    if isinstance(e, EGlobal):
        return [e.addr]
    if isinstance(e, EVecLen):
        return [e.base]
    if isinstance(e, ECall):
        return list(e.args)
    if isinstance(e, EInvoke):
        return [e.callee] + list(e.args)
    if isinstance(e, ELambda):
        out = [e.body]
        if e.spec:
            out += [c.expr for c in e.spec.clauses]
        return out
    if isinstance(e, EBinop):
        return [e.lhs, e.rhs]
    if isinstance(e, EUnop):
        return [e.arg]
    if isinstance(e, ECast):
        return [e.arg]
    if isinstance(e, EIf):
        return [e.cond, e.then] + ([e.els] if e.els else [])
    if isinstance(e, EBlock):
        out = []
        for s in e.stmts:
            out.extend(_stmt_children(s))
        if e.tail:
            out.append(e.tail)
        return out
    if isinstance(e, EPack):
        return [x for _, x in e.fields]
    if isinstance(e, EBorrow):
        return [e.target]
    if isinstance(e, EMoveTo):
        return [e.addr, e.value]
    if isinstance(e, (EMoveFrom, EExistsGlobal)):
        return [e.addr]
    if isinstance(e, EOld):
        return [e.arg]
    if isinstance(e, EBehavioral):
        return [e.target] + list(e.args)
    if isinstance(e, ELabeled):
        return [e.body]
    if isinstance(e, EQuant):
        out = []
        for b in e.binders:
            if b.lo is not None:
                out.append(b.lo)
            if b.hi is not None:
                out.append(b.hi)
        return out + [e.body]
    return []


def _stmt_children(s):
    if isinstance(s, SLet):
        return [s.value]
    if isinstance(s, SAssign):
        return [s.lvalue, s.value]
    if isinstance(s, SExpr):
        return [s.value]
    if isinstance(s, SReturn):
        return [s.value] if s.value else []
    if isinstance(s, SAbort):
        return [s.code]
    if isinstance(s, SIf):
        out = [s.cond]
        for t in s.then:
            out.extend(_stmt_children(t))
        for t in s.els or []:
            out.extend(_stmt_children(t))
        return out
    if isinstance(s, SWhile):
        out = [s.cond]
        for t in s.body:
            out.extend(_stmt_children(t))
        out.extend(c.expr for c in s.invariants)
        return out
    return []


def walk_stmts(stmts, fn):
    for s in stmts:
        for e in _stmt_children(s):
            walk_expr(e, fn)

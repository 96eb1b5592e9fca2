"""Name resolution: bind identifiers, attach spec blocks, desugar enums,
collect lambdas and their captures, and bind state labels."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import Diagnostic, NameError_, Span
from . import ast_nodes as A

BUILTIN_CONSTS = {"MAX_U64": (2**64 - 1), "MAX_U128": (2**128 - 1)}


@dataclass
class ResolvedModule:
    name: str
    source_file: str
    ast: A.ModuleAst
    structs: dict = field(default_factory=dict)   # name -> StructDecl (spec attached)
    enums: dict = field(default_factory=dict)     # name -> {variant: tag}
    functions: dict = field(default_factory=dict)  # name -> FunDecl (spec attached)
    spec_funs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def struct(self, name: str) -> A.StructDecl | None:
        return self.structs.get(name)


class _Scope:
    def __init__(self, parent=None):
        self.parent = parent
        self.names = {}  # name -> kind ('param'|'local'|'label'|'quantvar')

    def define(self, name, kind):
        self.names[name] = kind

    def lookup(self, name):
        s = self
        while s is not None:
            if name in s.names:
                return s.names[name]
            s = s.parent
        return None


class Resolver:
    def __init__(self, ast: A.ModuleAst):
        self.ast = ast
        self.errors: list[NameError_] = []
        self.out = ResolvedModule(ast.name, ast.source_file, ast)

    def err(self, msg, span):
        self.errors.append(NameError_(msg, span))

    # -- top level ------------------------------------------------------------

    def run(self):
        m, out = self.ast, self.out
        for s in m.structs:
            if s.name in out.structs:
                self.err(f"duplicate struct {s.name!r}", s.span)
            out.structs[s.name] = s
        for en in m.enums:
            self.desugar_enum(en)
        for f in m.functions:
            if f.name in out.functions:
                self.err(f"duplicate function {f.name!r}", f.span)
            out.functions[f.name] = f
        for sf in m.spec_functions:
            if sf.name in out.spec_funs:
                self.err(f"duplicate spec fun {sf.name!r}", sf.span)
            out.spec_funs[sf.name] = sf

        for orphan in m.orphan_specs:
            self.attach_spec(orphan)

        for s in out.structs.values():
            if s.spec is not None:
                self.resolve_struct_spec(s)
        for f in list(out.functions.values()):
            self.resolve_fun(f)
        for sf in out.spec_funs.values():
            self.resolve_spec_fun(sf)

        if self.errors:
            return self.errors
        return out

    def desugar_enum(self, en: A.EnumDecl):
        """An enum with closure-carrying variants becomes a single-payload
        tagged struct; each variant pins the integer tag."""
        out = self.out
        if en.name in out.structs:
            self.err(f"duplicate declaration {en.name!r}", en.span)
            return
        if not en.variants:
            self.err(f"enum {en.name!r} has no variants", en.span)
            return
        payload_ty = en.variants[0][1]
        for vn, vt in en.variants[1:]:
            if vt != payload_ty:
                self.err(
                    f"enum {en.name!r}: variant {vn!r} payload {vt} differs from "
                    f"{payload_ty}; enums desugar to a single-payload tagged struct",
                    en.span,
                )
        fields = [A.FieldDecl("tag", A.TUInt(64), en.span),
                  A.FieldDecl("payload", payload_ty, en.span)]
        out.structs[en.name] = A.StructDecl(en.name, en.abilities, fields,
                                            from_enum=en.name, span=en.span)
        out.enums[en.name] = {vn: i for i, (vn, _) in enumerate(en.variants)}

    def attach_spec(self, orphan: A.OrphanSpec):
        out = self.out
        if orphan.name in out.functions:
            f = out.functions[orphan.name]
            if orphan.params is not None and [t for _, t in orphan.params] != [t for _, t in f.params]:
                self.err(f"spec signature for {orphan.name!r} does not match the declaration",
                         orphan.span)
            if f.spec is not None:
                self.err(f"duplicate spec block for {orphan.name!r}", orphan.span)
            f.spec = orphan.block
        elif orphan.name in out.structs:
            s = out.structs[orphan.name]
            if s.spec is not None:
                self.err(f"duplicate spec block for {orphan.name!r}", orphan.span)
            s.spec = orphan.block
        elif orphan.params is not None:
            # signature-carrying spec declares a body-less function
            f = A.FunDecl(orphan.name, [], orphan.params, [], None,
                          spec=orphan.block, span=orphan.span)
            out.functions[orphan.name] = f
        else:
            self.err(f"spec block names unknown declaration {orphan.name!r}", orphan.span)

    # -- functions --------------------------------------------------------------

    def resolve_fun(self, f: A.FunDecl):
        scope = _Scope()
        seen = set()
        for pname, _ in f.params:
            if pname in seen:
                self.err(f"duplicate parameter {pname!r} in {f.name!r}", f.span)
            seen.add(pname)
            scope.define(pname, "param")
        for tp in f.type_params:
            scope.define(tp, "typaram")
        if f.body is not None:
            self.resolve_expr(f.body, scope, f, spec=False)
        if f.spec is not None:
            self.resolve_spec_block(f.spec, scope, f)

    def resolve_spec_fun(self, sf: A.SpecFunDecl):
        scope = _Scope()
        for pname, _ in sf.params:
            scope.define(pname, "param")
        self.resolve_expr(sf.body, scope, None, spec=True)

    def resolve_struct_spec(self, s: A.StructDecl):
        scope = _Scope()
        scope.define("self", "param")
        blk = s.spec
        for c in blk.clauses:
            if c.kind != "invariant":
                self.err(f"struct spec allows only invariants, found {c.kind!r}", c.span)
            self.resolve_expr(c.expr, scope, None, spec=True, struct_spec=s.name)
        for rd in blk.reads_of:
            self.resolve_path(rd.target, scope, struct_spec=s.name)
        for md in blk.modifies_of:
            self.resolve_path(md.target, scope, struct_spec=s.name)
            pscope = _Scope(scope)
            for pn, _ in md.params:
                pscope.define(pn, "param")
            if md.locations is not None:
                for res, addr in md.locations:
                    if res not in self.out.structs:
                        self.err(f"unknown resource {res!r} in modifies_of", md.span)
                    self.resolve_expr(addr, pscope, None, spec=True)

    def resolve_spec_block(self, blk: A.SpecBlock, scope: _Scope, f: A.FunDecl):
        # Bare state labels in a function spec are function-scoped intermediate
        # labels, implicitly existential over the execution.
        implicit = _Scope(scope)
        for c in blk.clauses:
            for lbl in _collect_free_labels(c.expr):
                if implicit.lookup(lbl) is None:
                    implicit.define(lbl, "label")
        blk.implicit_labels = sorted(
            n for n, k in implicit.names.items() if k == "label")
        for c in blk.clauses:
            self.resolve_expr(c.expr, implicit, f, spec=True)
        for rd in blk.reads_of:
            self.resolve_path(rd.target, scope)
        for md in blk.modifies_of:
            self.resolve_path(md.target, scope)
            pscope = _Scope(scope)
            for pn, _ in md.params:
                pscope.define(pn, "param")
            if md.locations is not None:
                for res, addr in md.locations:
                    if res not in self.out.structs:
                        self.err(f"unknown resource {res!r} in modifies_of", md.span)
                    self.resolve_expr(addr, pscope, None, spec=True)
        for md in blk.modifies:
            if md.resource not in self.out.structs:
                self.err(f"unknown resource {md.resource!r} in modifies", md.span)
            self.resolve_expr(md.addr, scope, f, spec=True)

    def resolve_path(self, e: A.Expr, scope: _Scope, struct_spec=None):
        """Resolve a behavioral-predicate / access-declaration target path."""
        if isinstance(e, A.EVar):
            if e.name == "self":
                if struct_spec is None:
                    self.err("`self` outside a struct spec", e.span)
                e.binding = "param"
                return
            kind = scope.lookup(e.name)
            if kind in ("param", "local"):
                e.binding = kind
            elif e.name in self.out.functions:
                e.binding = "fun"
            else:
                self.err(f"unbound function-value path {e.name!r}", e.span)
        elif isinstance(e, A.EField):
            self.resolve_path(e.base, scope, struct_spec)
        elif isinstance(e, A.EIndex):
            self.resolve_path(e.base, scope, struct_spec)
            base = e.base
            if isinstance(base, A.EVar) and base.binding is None:
                pass
            self.resolve_expr(e.index, scope, None, spec=True)
        else:
            self.err("unsupported function-value path", e.span)

    # -- expressions ---------------------------------------------------------------

    def resolve_expr(self, e: A.Expr, scope: _Scope, f, spec: bool, struct_spec=None):
        rec = lambda x, sc=scope: self.resolve_expr(x, sc, f, spec, struct_spec)

        if isinstance(e, (A.EInt, A.EBool, A.EConst, A.EResult)):
            return
        if isinstance(e, A.EVar):
            if e.name == "self":
                if struct_spec is None:
                    self.err("`self` outside a struct spec", e.span)
                e.binding = "param"
                return
            kind = scope.lookup(e.name)
            if kind == "label":
                self.err(f"state label {e.name!r} used outside `|~`", e.span)
                return
            if kind is not None:
                e.binding = kind if kind != "quantvar" else "local"
                return
            if e.name in self.out.functions:
                e.binding = "fun"
                return
            if e.name in BUILTIN_CONSTS:
                e.binding = "const"
                return
            self.err(f"unbound identifier {e.name!r}", e.span)
            return
        if isinstance(e, A.EIndex):
            # `R[addr]` on a struct name is a global-state read
            if isinstance(e.base, A.EVar) and scope.lookup(e.base.name) is None \
                    and e.base.name in self.out.structs:
                rec(e.index)
                glob = A.EGlobal(e.base.name, e.index, span=e.span)
                _become(e, glob)
                return
            rec(e.base)
            rec(e.index)
            return
        if isinstance(e, A.ECall):
            name = e.fname
            if name == "len":
                if len(e.args) != 1:
                    self.err("len(..) takes one argument", e.span)
                for a in e.args:
                    rec(a)
                _become(e, A.EVecLen(e.args[0], method_style=False, span=e.span))
                return
            kind = scope.lookup(name)
            if kind in ("param", "local", "quantvar"):
                callee = A.EVar(name, span=e.span)
                callee.binding = "param" if kind == "param" else "local"
                inv = A.EInvoke(callee, e.args, span=e.span)
                for a in e.args:
                    rec(a)
                _become(e, inv)
                return
            if name in self.out.functions or name in self.out.spec_funs:
                for a in e.args:
                    rec(a)
                return
            self.err(f"call to unknown function {name!r}", e.span)
            return
        if isinstance(e, A.EInvoke):
            rec(e.callee)
            for a in e.args:
                rec(a)
            return
        if isinstance(e, A.ELambda):
            if f is not None:
                e.owner = f.name
                e.lambda_id = len(f.lambdas)
                f.lambdas.append(e)
            inner = _Scope(scope)
            for p in e.params:
                inner.define(p, "param")
            self.resolve_expr(e.body, inner, f, spec=False)
            # captures: free variables bound in the enclosing function
            caps, seen = [], set(e.params)
            def visit(x):
                if isinstance(x, A.EVar) and x.binding in ("param", "local") \
                        and x.name not in seen and scope.lookup(x.name) is not None:
                    caps.append(x.name)
                    seen.add(x.name)
            A.walk_expr(e.body, visit)
            e.capture_names = caps
            if e.spec is None:
                self.out.warnings.append(Diagnostic(
                    "warning", "lambda-spec-absent",
                    "lambda has no inline spec block; compliance sites will "
                    "require an inferred spec", e.span, self.ast.source_file))
            else:
                lam_scope = _Scope(inner)
                self.resolve_spec_block(e.spec, lam_scope, f)
            return
        if isinstance(e, A.EPack):
            target = e.sname
            if e.enum_variant is not None:
                tags = self.out.enums.get(target)
                if tags is None:
                    self.err(f"unknown enum {target!r}", e.span)
                    return
                if e.enum_variant not in tags:
                    self.err(f"enum {target!r} has no variant {e.enum_variant!r}", e.span)
                    return
                payload = e.fields[0][1]
                rec(payload)
                e.fields = [("tag", A.EInt(tags[e.enum_variant], span=e.span)),
                            ("payload", payload)]
                return
            s = self.out.structs.get(target)
            if s is None:
                self.err(f"unknown struct {target!r}", e.span)
                return
            declared = {fd.name for fd in s.fields}
            given = [n for n, _ in e.fields]
            if sorted(given) != sorted(declared) or len(given) != len(declared):
                self.err(f"struct literal for {target!r} must set exactly fields "
                         f"{sorted(declared)}", e.span)
            for _, v in e.fields:
                rec(v)
            return
        if isinstance(e, (A.EMoveTo, A.EMoveFrom, A.EExistsGlobal)):
            if e.resource not in self.out.structs:
                self.err(f"unknown resource {e.resource!r}", e.span)
            rec(e.addr)
            if isinstance(e, A.EMoveTo):
                rec(e.value)
            return
        if isinstance(e, A.EGlobal):
            if e.resource not in self.out.structs:
                self.err(f"unknown resource {e.resource!r}", e.span)
            rec(e.addr)
            return
        if isinstance(e, A.EBehavioral):
            self.resolve_path(e.target, scope, struct_spec)
            for a in e.args:
                rec(a)
            return
        if isinstance(e, A.ELabeled):
            for lbl in e.range.labels():
                kind = scope.lookup(lbl)
                if kind is None:
                    self.err(f"unbound state label {lbl!r}", e.span)
                elif kind != "label":
                    self.err(f"{lbl!r} is not a state label", e.span)
            rec(e.body)
            return
        if isinstance(e, A.EQuant):
            inner = _Scope(scope)
            for b in e.binders:
                if b.kind == "label":
                    inner.define(b.name, "label")
                else:
                    if b.lo is not None:
                        rec(b.lo)
                    if b.hi is not None:
                        rec(b.hi)
                    inner.define(b.name, "quantvar")
            self.resolve_expr(e.body, inner, f, spec, struct_spec)
            return
        if isinstance(e, A.EBlock):
            inner = _Scope(scope)
            self.resolve_stmts(e.stmts, inner, f)
            if e.tail is not None:
                self.resolve_expr(e.tail, inner, f, spec)
            return
        if isinstance(e, A.EIf):
            rec(e.cond)
            rec(e.then)
            if e.els is not None:
                rec(e.els)
            return
        # generic recursion
        for c in A._children(e):
            rec(c)

    def resolve_stmts(self, stmts, scope, f):
        for s in stmts:
            if isinstance(s, A.SLet):
                self.resolve_expr(s.value, scope, f, spec=False)
                scope.define(s.name, "local")
            elif isinstance(s, A.SAssign):
                self.resolve_expr(s.lvalue, scope, f, spec=False)
                self.resolve_expr(s.value, scope, f, spec=False)
            elif isinstance(s, A.SExpr):
                self.resolve_expr(s.value, scope, f, spec=False)
            elif isinstance(s, A.SReturn):
                if s.value is not None:
                    self.resolve_expr(s.value, scope, f, spec=False)
            elif isinstance(s, A.SAbort):
                self.resolve_expr(s.code, scope, f, spec=False)
            elif isinstance(s, A.SIf):
                self.resolve_expr(s.cond, scope, f, spec=False)
                self.resolve_stmts(s.then, _Scope(scope), f)
                if s.els is not None:
                    self.resolve_stmts(s.els, _Scope(scope), f)
            elif isinstance(s, A.SWhile):
                self.resolve_expr(s.cond, scope, f, spec=False)
                inner = _Scope(scope)
                self.resolve_stmts(s.body, inner, f)
                for c in s.invariants:
                    self.resolve_expr(c.expr, inner, f, spec=True)


def _collect_free_labels(e: A.Expr) -> list:
    """Labels referenced by `|~` ranges that no enclosing quantifier binds."""
    out, bound = [], set()

    def go(x, bound):
        if isinstance(x, A.EQuant):
            inner = bound | {b.name for b in x.binders if b.kind == "label"}
            go(x.body, inner)
            return
        if isinstance(x, A.ELabeled):
            for lbl in x.range.labels():
                if lbl not in bound and lbl not in out:
                    out.append(lbl)
            go(x.body, bound)
            return
        for c in A._children(x):
            go(c, bound)

    go(e, bound)
    return out


def _become(node: A.Expr, replacement: A.Expr):
    """Mutate `node` in place into `replacement` (same object identity)."""
    node.__class__ = replacement.__class__
    node.__dict__.clear()
    node.__dict__.update(replacement.__dict__)


def resolve(ast: A.ModuleAst):
    """Resolve a parsed module. Returns ResolvedModule, or a list of
    NameError_ values if any identifier fails to bind."""
    return Resolver(ast).run()

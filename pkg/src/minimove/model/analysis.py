"""Monomorphization, function-value variant collection, and read/modify
access profiles.

A function type's variant set has three kinds of members: concrete closures
(from construction sites), function-typed parameters of verification targets,
and storable function-typed struct fields. Access profiles union per-variant
accesses; closure accesses come from a transitive fixpoint over the call
graph (invoke edges approximated by the callee type's profile), parameter and
field accesses from `reads_of`/`modifies_of` declarations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import Span, UnboundedInstantiation, WildcardModifiesError
from ..frontend import ast_nodes as A
from ..typeck import TypedModule, substitute
from . import ir as I
from .lower import lower, mangle_instance

WILDCARD = "*"
MAX_INSTANTIATION_DEPTH = 16


def type_key(ft: A.TFun) -> str:
    k = ft.key()
    ps = ",".join(str(p) for p in k.params)
    rs = ",".join(str(r) for r in k.results)
    return f"({ps})->({rs})"


# -- variants -------------------------------------------------------------------

@dataclass(frozen=True)
class ClosureVariant:
    fn: str  # underlying (possibly synthetic lambda) function symbol
    captures: tuple  # capture types


@dataclass
class FunVariantSet:
    fun_type: A.TFun
    closures: list = field(default_factory=list)   # [ClosureVariant]
    params: list = field(default_factory=list)     # [(fn, param_name)]
    fields: list = field(default_factory=list)     # [(struct, field_name)]

    def all_empty(self):
        return not (self.closures or self.params or self.fields)

    def to_json(self):
        return {
            "fun_type": str(self.fun_type.key()),
            "closures": [{"fn": c.fn, "captures": [str(t) for t in c.captures]}
                         for c in self.closures],
            "params": [{"fn": f, "param": p} for f, p in self.params],
            "fields": [{"struct": s, "field": f} for s, f in self.fields],
        }


# -- access profiles ----------------------------------------------------------------

ANY_ADDR = ("any",)


@dataclass(frozen=True)
class AccessProfile:
    reads: frozenset = frozenset()
    unknown: bool = False  # wildcard reads pull in abstract unknown memory
    modifies: tuple = ()   # ((resource, addr_expr), ...); addr_expr = ('param', i) | ('any',)

    def union(self, other: "AccessProfile") -> "AccessProfile":
        return AccessProfile(
            self.reads | other.reads,
            self.unknown or other.unknown,
            tuple(sorted(set(self.modifies) | set(other.modifies))),
        )

    def to_json(self, universe=None):
        reads = sorted(self.reads)
        if self.unknown and universe is not None:
            reads = sorted(set(reads) | set(universe))
        return {
            "reads": reads,
            "unknown_memory": self.unknown,
            "modifies": [[r, list(a)] for r, a in self.modifies],
        }


EMPTY_PROFILE = AccessProfile()


# -- monomorphization ------------------------------------------------------------------

def monomorphize(typed: TypedModule):
    """Collect monomorphic function instances reachable from non-generic
    functions. Returns {instance_name: (FunDecl, subst)}."""
    fns = typed.functions
    out = {}
    work = []
    for name, f in fns.items():
        if not f.is_generic and f.body is not None:
            out[name] = (f, {})
            work.append((name, f, {}, 0))
    while work:
        name, f, subst, depth = work.pop()
        if depth > MAX_INSTANTIATION_DEPTH:
            raise UnboundedInstantiation(
                f"generic instantiation chain exceeds depth "
                f"{MAX_INSTANTIATION_DEPTH} at {name!r}", f.span)
        for call in _calls_with_inst(f):
            callee = fns[call.fname]
            conc = {tp: substitute(t, subst) for tp, t in call.inst.items()}
            iname = mangle_instance(call.fname, [conc[tp] for tp in callee.type_params])
            if iname not in out:
                out[iname] = (callee, conc)
                work.append((iname, callee, conc, depth + 1))
    return out


def _calls_with_inst(f: A.FunDecl):
    found = []

    def visit(e):
        if isinstance(e, A.ECall) and getattr(e, "inst", None):
            if e.fname and e.inst:
                found.append(e)

    if f.body is not None:
        A.walk_expr(f.body, visit)
    return [c for c in found]


# -- variant collection ----------------------------------------------------------------

def collect_variants(ir: I.IrModule, targets, typed: TypedModule):
    """Compute per function type: closure variants C, parameter variants P
    (restricted to verification targets), and storable field variants F."""
    variants: dict[str, FunVariantSet] = {}

    def vset(ft: A.TFun) -> FunVariantSet:
        key = type_key(ft)
        if key not in variants:
            variants[key] = FunVariantSet(ft.key())
        return variants[key]

    for fname in sorted(ir.functions):
        fn = ir.functions[fname]
        for instr in ir.walk_instrs(fn):
            rv = instr.rv if isinstance(instr, I.IAssign) else None
            if isinstance(rv, I.RClosure):
                impl = ir.functions[rv.impl]
                caps = tuple(t for _, t in impl.params[:impl.n_captures])
                v = ClosureVariant(rv.impl, caps)
                vs = vset(rv.fun_type)
                if v not in vs.closures:
                    vs.closures.append(v)
            elif isinstance(rv, I.RFunRef):
                v = ClosureVariant(rv.fname, ())
                vs = vset(rv.fun_type)
                if v not in vs.closures:
                    vs.closures.append(v)
            if isinstance(instr, I.IInvoke):
                vset(instr.fun_type)

    for fname in sorted(targets):
        fn = ir.functions.get(fname)
        if fn is None:
            continue
        for pname, pty in fn.params:
            base = A.strip_ref(pty)
            if isinstance(base, A.TFun):
                vset(base).params.append((fname, pname))

    for sname in sorted(typed.structs):
        s = typed.structs[sname]
        for fd in s.fields:
            if isinstance(fd.ty, A.TFun) and "store" in fd.ty.abilities:
                vset(fd.ty).fields.append((sname, fd.name))

    for vs in variants.values():
        vs.closures.sort(key=lambda c: c.fn)
        vs.params.sort()
        vs.fields.sort()
    return dict(sorted(variants.items()))


# -- declared access declarations ------------------------------------------------------

def _declared_accesses(typed: TypedModule):
    """Extract reads_of/modifies_of declarations keyed by parameter
    (fn, param) and field (struct, field)."""
    param_decl: dict = {}
    field_decl: dict = {}

    def addr_expr(e, binders):
        if isinstance(e, A.EVar):
            for i, (bn, _) in enumerate(binders):
                if bn == e.name:
                    return ("param", i)
        return ANY_ADDR

    def apply(block: A.SpecBlock, key_of):
        for rd in block.reads_of:
            key = key_of(rd.target)
            if key is None:
                continue
            cur = param_decl.get(key) or field_decl.get(key) or EMPTY_PROFILE
            if rd.resources is None:
                cur = cur.union(AccessProfile(unknown=True))
                setattr(rd, "wildcard", True)
            else:
                cur = cur.union(AccessProfile(reads=frozenset(rd.resources)))
            _store(key, cur)
        for md in block.modifies_of:
            key = key_of(md.target)
            if key is None:
                continue
            if md.locations is None:
                raise WildcardModifiesError(
                    "`modifies_of .. *` is unsupported: the invocation would "
                    "leave no effective frame condition", md.span)
            mods = tuple((res, addr_expr(a, md.params)) for res, a in md.locations)
            reads = frozenset(r for r, _ in mods)
            _store(key, (param_decl.get(key) or field_decl.get(key) or EMPTY_PROFILE)
                   .union(AccessProfile(reads=reads, modifies=mods)))

    def _store(key, prof):
        if len(key) == 2 and key[0] in typed.structs:
            field_decl[key] = prof
        else:
            param_decl[key] = prof

    for fname in sorted(typed.functions):
        f = typed.functions[fname]
        blocks = []
        if f.spec is not None:
            blocks.append((f.spec, f))
        for lam in f.lambdas:
            if lam.spec is not None:
                blocks.append((lam.spec, None))
        for blk, owner in blocks:
            if owner is None:
                continue

            def key_of(path, owner=owner):
                if isinstance(path, A.EVar):
                    return (owner.name, path.name)
                return None

            apply(blk, key_of)

    for sname in sorted(typed.structs):
        s = typed.structs[sname]
        if s.spec is None:
            continue

        def key_of(path, sname=sname):
            if isinstance(path, A.EField) and isinstance(path.base, A.EVar) \
                    and path.base.name == "self":
                return (sname, path.fname)
            return None

        apply(s.spec, key_of)

    return param_decl, field_decl


# -- profile fixpoint ----------------------------------------------------------------------

def _copy_map(fn: I.IrFunction):
    """dst -> src chains introduced by plain copies, for tracing operands back
    to parameters."""
    copies = {}
    for instr in _walk(fn.body):
        if isinstance(instr, I.IAssign) and isinstance(instr.rv, I.RUse) \
                and isinstance(instr.rv.op, I.OLocal):
            copies.setdefault(instr.dst, instr.rv.op.name)
    return copies


def _walk(instrs):
    for i in instrs:
        yield i
        if isinstance(i, I.IIf):
            yield from _walk(i.then)
            yield from _walk(i.els)
        elif isinstance(i, I.ILoop):
            yield from _walk(i.cond_block)
            yield from _walk(i.body)


def _trace(op, fn: I.IrFunction, copies):
    if not isinstance(op, I.OLocal):
        return ANY_ADDR
    name = op.name
    seen = set()
    while name in copies and name not in seen:
        seen.add(name)
        name = copies[name]
    for i, (pname, _) in enumerate(fn.params):
        if pname == name:
            return ("param", i)
    return ANY_ADDR


class ModelBuilder:
    def __init__(self, typed: TypedModule, targets=None):
        self.typed = typed
        self.mono = monomorphize(typed)
        self.ir = lower(typed, self.mono)
        if targets is None:
            targets = [n for n, fn in self.ir.functions.items()
                       if not fn.is_lambda_impl]
        self.targets = sorted(targets)
        self.variants = collect_variants(self.ir, self.targets, typed)
        self.param_decl, self.field_decl = _declared_accesses(typed)
        self.fn_profiles: dict[str, AccessProfile] = {}
        self.tau_profiles: dict[str, AccessProfile] = {}
        self._fixpoint()

    # -- fixpoint -------------------------------------------------------------

    def _fixpoint(self):
        for name in self.ir.functions:
            self.fn_profiles[name] = EMPTY_PROFILE
        for key in self.variants:
            self.tau_profiles[key] = EMPTY_PROFILE
        changed = True
        while changed:
            changed = False
            for name in sorted(self.ir.functions):
                new = self._fn_step(self.ir.functions[name])
                if new != self.fn_profiles[name]:
                    self.fn_profiles[name] = new
                    changed = True
            for key in sorted(self.variants):
                new = self._tau_step(self.variants[key])
                if new != self.tau_profiles[key]:
                    self.tau_profiles[key] = new
                    changed = True

    def _declared_param_profile(self, fn_name, pname):
        return self.param_decl.get((fn_name, pname), EMPTY_PROFILE)

    def _tau_step(self, vs: FunVariantSet) -> AccessProfile:
        prof = self.tau_profiles[type_key(vs.fun_type)]
        for c in vs.closures:
            cp = self.fn_profiles.get(c.fn, EMPTY_PROFILE)
            # capture-relative modify addresses are not expressible over the
            # invocation arguments; degrade them to whole-map havoc
            impl = self.ir.functions.get(c.fn)
            ncaps = impl.n_captures if impl else 0
            mods = []
            for res, ae in cp.modifies:
                if ae[0] == "param" and ae[1] >= ncaps:
                    mods.append((res, ("param", ae[1] - ncaps)))
                else:
                    mods.append((res, ANY_ADDR))
            prof = prof.union(AccessProfile(cp.reads, cp.unknown, tuple(sorted(set(mods)))))
        for fn_name, pname in vs.params:
            prof = prof.union(self._declared_param_profile(fn_name, pname))
        for sname, fname in vs.fields:
            prof = prof.union(self.field_decl.get((sname, fname), EMPTY_PROFILE))
        return prof

    def _fn_step(self, fn: I.IrFunction) -> AccessProfile:
        prof = self.fn_profiles[fn.name]
        copies = _copy_map(fn)
        reads, unknown, mods = set(prof.reads), prof.unknown, set(prof.modifies)

        def trace(op):
            return _trace(op, fn, copies)

        for instr in _walk(fn.body):
            if isinstance(instr, I.IBorrowGlobal):
                reads.add(instr.resource)
            elif isinstance(instr, I.ILoadPlace) and isinstance(instr.place, I.PGlobal):
                reads.add(instr.place.resource)
            elif isinstance(instr, I.IFieldSet) and isinstance(instr.place, I.PGlobal):
                reads.add(instr.place.resource)
                mods.add((instr.place.resource, trace(instr.place.addr)))
            elif isinstance(instr, (I.IMoveTo,)):
                reads.add(instr.resource)
                mods.add((instr.resource, trace(instr.addr)))
            elif isinstance(instr, I.IMoveFrom):
                reads.add(instr.resource)
                mods.add((instr.resource, trace(instr.addr)))
            elif isinstance(instr, I.IExists):
                reads.add(instr.resource)
            elif isinstance(instr, I.ICall):
                callee = self.fn_profiles.get(instr.fname, EMPTY_PROFILE)
                reads |= callee.reads
                unknown = unknown or callee.unknown
                cfn = self.ir.functions.get(instr.fname)
                for res, ae in callee.modifies:
                    mods.add((res, self._map_through_args(ae, instr.args, trace)))
                for a in instr.args:
                    if isinstance(a, I.ARef) and isinstance(a.place, I.PGlobal):
                        reads.add(a.place.resource)
                        mods.add((a.place.resource, trace(a.place.addr)))
            elif isinstance(instr, I.IInvoke):
                tp = self.tau_profiles.get(type_key(instr.fun_type), EMPTY_PROFILE)
                reads |= tp.reads
                unknown = unknown or tp.unknown
                for res, ae in tp.modifies:
                    mods.add((res, self._map_through_args(ae, instr.args, trace)))
                for a in instr.args:
                    if isinstance(a, I.ARef) and isinstance(a.place, I.PGlobal):
                        reads.add(a.place.resource)
                        mods.add((a.place.resource, trace(a.place.addr)))
        # reads-closure invariant: anything modified is also readable
        reads |= {r for r, _ in mods}
        return AccessProfile(frozenset(reads), unknown, tuple(sorted(mods)))

    @staticmethod
    def _map_through_args(ae, args, trace):
        if ae[0] != "param":
            return ANY_ADDR
        idx = ae[1]
        if idx >= len(args):
            return ANY_ADDR
        a = args[idx]
        if isinstance(a, I.AVal):
            return trace(a.op)
        return ANY_ADDR

    def declared_fn_modifies(self, fn: I.IrFunction):
        """Code-level `modifies R[e];` declarations of a function, as profile
        entries over its parameters."""
        if fn.spec is None or not fn.spec.modifies:
            return None
        out = []
        for md in fn.spec.modifies:
            ae = ANY_ADDR
            if isinstance(md.addr, A.EVar):
                for i, (pname, _) in enumerate(fn.params):
                    if pname == md.addr.name:
                        ae = ("param", i)
            out.append((md.resource, ae))
        return tuple(sorted(set(out)))


@dataclass
class ProgramModel:
    typed: TypedModule
    ir: I.IrModule
    variants: dict
    fn_profiles: dict
    tau_profiles: dict
    targets: list
    param_decl: dict
    field_decl: dict
    builder: ModelBuilder

    def variant_set(self, ft: A.TFun) -> FunVariantSet:
        return self.variants.get(type_key(ft)) or FunVariantSet(ft.key())

    def tau_profile(self, ft: A.TFun) -> AccessProfile:
        return self.tau_profiles.get(type_key(ft), EMPTY_PROFILE)

    def fn_profile(self, name: str) -> AccessProfile:
        return self.fn_profiles.get(name, EMPTY_PROFILE)

    def dump_variants(self, universe=None) -> dict:
        out = {}
        for key in sorted(self.variants):
            vs = self.variants[key]
            prof = self.tau_profiles.get(key, EMPTY_PROFILE)
            out[key] = vs.to_json()
            out[key]["profile"] = prof.to_json(universe)
        return out


def access_profile(ft: A.TFun, model: ProgramModel) -> AccessProfile:
    """Per-τ access profile: the union of all accesses of τ's variants."""
    return model.tau_profile(ft)


def build_model(typed: TypedModule, targets=None) -> ProgramModel:
    b = ModelBuilder(typed, targets)
    return ProgramModel(typed, b.ir, b.variants, b.fn_profiles, b.tau_profiles,
                        b.targets, b.param_decl, b.field_decl, b)

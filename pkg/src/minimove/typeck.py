"""Type checking for code and specifications.

Code arithmetic is bounded (u64/u128) with abort-on-overflow semantics made
explicit later during lowering; spec arithmetic is unbounded. Ability
discipline is enforced where values cross storage boundaries and at closure
captures (references may not be captured).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import AbilityError, CaptureError, Span, TypeError_
from .frontend import ast_nodes as A
from .frontend.resolve import BUILTIN_CONSTS, ResolvedModule

UNIT = ()


@dataclass
class TypedModule:
    resolved: ResolvedModule
    lambda_owner: dict = field(default_factory=dict)  # (owner, id) -> ELambda

    @property
    def name(self):
        return self.resolved.name

    @property
    def functions(self):
        return self.resolved.functions

    @property
    def structs(self):
        return self.resolved.structs

    @property
    def spec_funs(self):
        return self.resolved.spec_funs

    def lambda_symbol(self, lam: A.ELambda) -> str:
        return f"{lam.owner}$lam{lam.lambda_id}"


def _is_num(t):
    return isinstance(t, (A.TUInt, A.TNum))


def _numeric_compat(a, b):
    if isinstance(a, A.TNum) or isinstance(b, A.TNum):
        return _is_num(a) and _is_num(b)
    return a == b


class Checker:
    def __init__(self, rm: ResolvedModule):
        self.rm = rm
        self.errors: list[TypeError_] = []
        self.typed = TypedModule(rm)
        self.subst: dict = {}

    def err(self, msg, span=Span()):
        self.errors.append(TypeError_(msg, span))

    def ability_err(self, msg, span=Span()):
        self.errors.append(AbilityError(msg, span))

    # -- entry ----------------------------------------------------------------

    def run(self):
        for s in self.rm.structs.values():
            self.check_struct_decl(s)
        for f in self.rm.functions.values():
            self.check_fun(f)
        for sf in self.rm.spec_funs.values():
            env = dict(sf.params)
            t = self.spec_expr(sf.body, env, ctx="spec_fun")
            if t is not None and not self.spec_assignable(t, sf.result):
                self.err(f"spec fun {sf.name!r} body has type {t}, declared {sf.result}", sf.span)
        if self.errors:
            return self.errors
        return self.typed

    def check_struct_decl(self, s: A.StructDecl):
        for f in s.fields:
            t = f.ty
            if isinstance(t, A.TRef):
                self.err(f"struct field {s.name}.{f.name} may not hold a reference", f.span)
            if isinstance(t, A.TFun):
                if "store" not in t.abilities:
                    # keeps every storable field a defunctionalization variant
                    self.ability_err(
                        f"function-typed field {s.name}.{f.name} must declare the "
                        f"`store` ability", f.span)
                if "key" in s.abilities and "store" not in t.abilities:
                    self.ability_err(
                        f"field {s.name}.{f.name} of a key struct lacks `store`", f.span)
            if isinstance(t, A.TStruct) and t.name not in self.rm.structs:
                self.err(f"unknown type {t.name!r} in field {s.name}.{f.name}", f.span)

    # -- functions --------------------------------------------------------------

    def check_fun(self, f: A.FunDecl):
        env = {}
        for pname, pty in f.params:
            self.check_type_wf(pty, f.span, f.type_params)
            env[pname] = pty
        if f.body is not None:
            t = self.code_expr(f.body, env, f)
            want = f.results[0] if f.results else None
            if want is not None:
                if t is None:
                    self.err(f"function {f.name!r} must return {want}", f.span)
                elif not self.code_assignable(t, want):
                    self.err(f"function {f.name!r} returns {t}, declared {want}", f.span)
            elif t not in (None, UNIT) and not isinstance(t, A.TNum):
                pass  # value discarded at function exit
        if f.spec is not None:
            self.check_spec_block(f.spec, f, env)
        for s in self.rm.structs.values():
            pass
        return

    def check_type_wf(self, t, span, type_params=()):
        if isinstance(t, A.TStruct):
            if t.name in (type_params or ()):
                return
            if t.name not in self.rm.structs:
                self.err(f"unknown type {t.name!r}", span)
        elif isinstance(t, A.TVector):
            self.check_type_wf(t.elem, span, type_params)
        elif isinstance(t, A.TRef):
            self.check_type_wf(t.target, span, type_params)
        elif isinstance(t, A.TFun):
            for p in t.params:
                self.check_type_wf(p, span, type_params)
            for r in t.results:
                self.check_type_wf(r, span, type_params)

    # -- code expressions ---------------------------------------------------------

    def code_assignable(self, got, want):
        if got is None or want is None:
            return True
        if isinstance(got, A.TNum) and isinstance(want, A.TUInt):
            return True
        if isinstance(got, A.TRef) and not isinstance(want, A.TRef):
            return self.code_assignable(got.target, want)  # auto-deref (copy out)
        if isinstance(want, A.TRef) and not want.mut and not isinstance(got, A.TRef):
            return self.code_assignable(got, want.target)  # auto-borrow (immutable)
        if isinstance(got, A.TFun) and isinstance(want, A.TFun):
            return got.key() == want.key()
        if isinstance(got, A.TRef) and isinstance(want, A.TRef):
            return (got.mut or not want.mut) and self.code_assignable(got.target, want.target)
        return got == want

    def struct_field(self, sname, fname, span):
        s = self.rm.structs.get(sname)
        if s is None:
            self.err(f"unknown struct {sname!r}", span)
            return None
        fd = s.field(fname)
        if fd is None:
            self.err(f"struct {sname!r} has no field {fname!r}", span)
            return None
        return fd.ty

    def code_expr(self, e, env, f, expected=None):
        t = self._code_expr(e, env, f, expected)
        if isinstance(t, A.TNum) and isinstance(expected, A.TUInt):
            t = expected
        if isinstance(t, A.TNum) and expected is None:
            pass  # literal type settles at its use site; default handled there
        e.ty = t
        return t

    def _code_expr(self, e, env, f, expected):
        if isinstance(e, A.EInt):
            if isinstance(expected, A.TUInt):
                if e.value >= 2 ** expected.width:
                    self.err(f"literal {e.value} exceeds {expected}", e.span)
                return expected
            return A.TNum()
        if isinstance(e, A.EBool):
            return A.TBool()
        if isinstance(e, A.EConst):
            return A.TUInt(64) if e.name == "MAX_U64" else A.TUInt(128)
        if isinstance(e, A.EVar):
            if e.binding == "fun":
                fn = self.rm.functions[e.name]
                if fn.is_generic:
                    self.err(f"generic function {e.name!r} cannot be used as a value", e.span)
                    return None
                return A.TFun(tuple(t for _, t in fn.params), tuple(fn.results),
                              frozenset({"copy", "drop", "store"}))
            if e.binding == "const":
                return A.TUInt(64) if e.name == "MAX_U64" else A.TUInt(128)
            t = env.get(e.name)
            if t is None:
                self.err(f"unbound {e.name!r}", e.span)
            return t
        if isinstance(e, A.EField):
            bt = self.code_expr(e.base, env, f)
            bt = A.strip_ref(bt) if bt else bt
            if isinstance(bt, A.TStruct):
                return self.struct_field(bt.name, e.fname, e.span)
            if bt is not None:
                self.err(f"field access on non-struct {bt}", e.span)
            return None
        if isinstance(e, A.EIndex):
            bt = self.code_expr(e.base, env, f)
            self.code_expr(e.index, env, f, expected=A.TUInt(64))
            bt = A.strip_ref(bt) if bt else bt
            if isinstance(bt, A.TVector):
                return bt.elem
            if bt is not None:
                self.err(f"indexing non-vector {bt}", e.span)
            return None
        if isinstance(e, A.EGlobal):
            self.code_expr(e.addr, env, f, expected=A.TAddress())
            self.require_key(e.resource, e.span)
            return A.TStruct(e.resource)
        if isinstance(e, A.EVecLen):
            bt = self.code_expr(e.base, env, f)
            bt = A.strip_ref(bt) if bt else bt
            if bt is not None and not isinstance(bt, A.TVector):
                self.err(f".length() on non-vector {bt}", e.span)
            return A.TUInt(64)
        if isinstance(e, A.ECall):
            return self.check_call(e, env, f, spec=False)
        if isinstance(e, A.EInvoke):
            ct = self.code_expr(e.callee, env, f)
            ct = A.strip_ref(ct) if ct else ct
            if not isinstance(ct, A.TFun):
                if ct is not None:
                    self.err(f"invoking a non-function value of type {ct}", e.span)
                return None
            self.check_args(e.args, list(ct.params), env, f, e.span)
            return ct.results[0] if ct.results else UNIT
        if isinstance(e, A.ELambda):
            want = expected
            if want is not None and isinstance(want, A.TRef):
                want = want.target
            if not isinstance(want, A.TFun):
                self.err("lambda requires a function-typed context", e.span)
                return None
            if len(want.params) != len(e.params):
                self.err(f"lambda takes {len(e.params)} parameters, expected "
                         f"{len(want.params)}", e.span)
                return None
            e.param_types = list(want.params)
            e.result_types = list(want.results)
            inner = dict(env)
            for p, pt in zip(e.params, want.params):
                inner[p] = pt
            bt = self.code_expr(e.body, inner, f,
                                expected=want.results[0] if want.results else None)
            if want.results and not self.code_assignable(bt, want.results[0]):
                self.err(f"lambda body has type {bt}, expected {want.results[0]}", e.span)
            caps = []
            for cname in getattr(e, "capture_names", []):
                ct = env.get(cname)
                if isinstance(ct, A.TRef):
                    self.errors.append(CaptureError(
                        f"lambda captures reference {cname!r}; references may not "
                        f"be captured", e.span))
                    continue
                caps.append((cname, ct))
            e.captures = caps
            self.typed.lambda_owner[(e.owner, e.lambda_id)] = e
            if e.spec is not None:
                lenv = {p: pt for p, pt in zip(e.params, want.params)}
                lenv.update({c: t for c, t in caps})
                self.check_spec_block(e.spec, _lambda_fn(e, want), lenv)
            return want.key()
        if isinstance(e, A.EFunValue):
            fn = self.rm.functions[e.fname]
            return A.TFun(tuple(t for _, t in fn.params), tuple(fn.results),
                          frozenset({"copy", "drop", "store"}))
        if isinstance(e, A.EBinop):
            return self.check_binop(e, env, f, spec=False, expected=expected)
        if isinstance(e, A.EUnop):
            t = self.code_expr(e.arg, env, f)
            if e.op == "!" and not isinstance(t, A.TBool) and t is not None:
                self.err(f"`!` on non-bool {t}", e.span)
            return A.TBool()
        if isinstance(e, A.ECast):
            t = self.code_expr(e.arg, env, f)
            if not isinstance(e.to, A.TUInt):
                self.err(f"cast target must be u64/u128, got {e.to}", e.span)
            elif t is not None and not _is_num(t):
                self.err(f"cast of non-numeric {t}", e.span)
            return e.to
        if isinstance(e, A.EIf):
            self.code_expr(e.cond, env, f, expected=A.TBool())
            t1 = self.code_expr(e.then, env, f, expected=expected)
            if e.els is None:
                return UNIT
            t2 = self.code_expr(e.els, env, f, expected=expected if expected else t1)
            if isinstance(t1, A.TNum) and t2 is not None:
                e.then.ty = t2
                return t2
            if isinstance(t2, A.TNum) and t1 is not None:
                e.els.ty = t1
                return t1
            if t1 is not None and t2 is not None and t1 != t2:
                self.err(f"if branches disagree: {t1} vs {t2}", e.span)
            return t1
        if isinstance(e, A.EBlock):
            inner = dict(env)
            self.check_stmts(e.stmts, inner, f)
            if e.tail is not None:
                return self.code_expr(e.tail, inner, f, expected=expected)
            return UNIT
        if isinstance(e, A.EPack):
            s = self.rm.structs.get(e.sname)
            if s is None:
                return None
            for fname, val in e.fields:
                ft = s.field(fname).ty
                vt = self.code_expr(val, env, f, expected=ft)
                if not self.code_assignable(vt, ft):
                    self.err(f"field {e.sname}.{fname} expects {ft}, got {vt}", e.span)
                if isinstance(ft, A.TFun):
                    self.check_fun_value_abilities(val, vt, ft, e.span)
            return A.TStruct(e.sname)
        if isinstance(e, A.EBorrow):
            t = self.code_expr(e.target, env, f)
            if t is None:
                return None
            if isinstance(t, A.TRef):
                return t if (t.mut or not e.mut) else self.err_ref(e)
            if not _is_place(e.target):
                self.err("can only borrow a variable, field, index, or resource", e.span)
            return A.TRef(e.mut, t)
        if isinstance(e, A.EMoveTo):
            self.code_expr(e.addr, env, f, expected=A.TAddress())
            self.require_key(e.resource, e.span)
            vt = self.code_expr(e.value, env, f, expected=A.TStruct(e.resource))
            if vt is not None and vt != A.TStruct(e.resource):
                self.err(f"move_to<{e.resource}> value has type {vt}", e.span)
            return UNIT
        if isinstance(e, A.EMoveFrom):
            self.code_expr(e.addr, env, f, expected=A.TAddress())
            self.require_key(e.resource, e.span)
            return A.TStruct(e.resource)
        if isinstance(e, A.EExistsGlobal):
            self.code_expr(e.addr, env, f, expected=A.TAddress())
            self.require_key(e.resource, e.span)
            return A.TBool()
        if isinstance(e, (A.EOld, A.EResult, A.EBehavioral, A.ELabeled, A.EQuant)):
            self.err(f"{type(e).__name__[1:].lower()} is only allowed in specifications", e.span)
            return None
        self.err(f"unsupported expression {type(e).__name__}", e.span)
        return None

    def err_ref(self, e):
        self.err("cannot reborrow an immutable reference as mutable", e.span)
        return None

    def require_key(self, resource, span):
        s = self.rm.structs.get(resource)
        if s is not None and "key" not in s.abilities:
            self.ability_err(f"{resource!r} lacks the `key` ability required for "
                             f"global storage", span)

    def check_fun_value_abilities(self, val, vt, declared: A.TFun, span):
        need = declared.abilities
        if isinstance(val, A.ELambda):
            have = {"copy", "drop", "store"}
            for _, ct in val.captures:
                have &= self.abilities_of(ct)
        elif isinstance(vt, A.TFun):
            have = set(vt.abilities) or {"copy", "drop", "store"}
        else:
            return
        missing = set(need) - have
        if missing:
            self.ability_err(
                f"function value lacks abilities {sorted(missing)} required by the "
                f"declaration", span)

    def abilities_of(self, t):
        if isinstance(t, (A.TUInt, A.TBool, A.TAddress, A.TNum)):
            return {"copy", "drop", "store"}
        if isinstance(t, A.TVector):
            return self.abilities_of(t.elem)
        if isinstance(t, A.TStruct):
            s = self.rm.structs.get(t.name)
            return set(s.abilities) & {"copy", "drop", "store"} if s else set()
        if isinstance(t, A.TFun):
            return set(t.abilities) or {"copy", "drop", "store"}
        return set()

    def check_binop(self, e, env, f, spec, expected=None):
        op = e.op
        check = (lambda x, exp=None: self.spec_expr(x, env, ctx=self._spec_ctx)) if spec \
            else (lambda x, exp=None: self.code_expr(x, env, f, expected=exp))
        if op in ("&&", "||", "==>", "<==>"):
            if op in ("==>", "<==>") and not spec:
                self.err(f"{op} is only allowed in specifications", e.span)
            for side in (e.lhs, e.rhs):
                t = check(side)
                if t is not None and not isinstance(t, A.TBool):
                    self.err(f"{op} expects bool operands, got {t}", e.span)
            return A.TBool()
        if op in ("==", "!=", "<", "<=", ">", ">="):
            lt = check(e.lhs)
            rt = check(e.rhs, lt if isinstance(lt, A.TUInt) else None)
            if isinstance(lt, A.TNum) and isinstance(rt, A.TUInt) and not spec:
                lt = rt
                e.lhs.ty = rt
            if lt is not None and rt is not None:
                if _is_num(lt) and _is_num(rt):
                    if not spec and isinstance(lt, A.TUInt) and isinstance(rt, A.TUInt) and lt != rt:
                        self.err(f"comparison of {lt} and {rt} needs an explicit cast", e.span)
                elif op in ("==", "!=") and (lt == rt):
                    pass
                elif lt != rt:
                    self.err(f"cannot compare {lt} and {rt}", e.span)
                elif op not in ("==", "!=") and not _is_num(lt):
                    self.err(f"ordering on non-numeric {lt}", e.span)
            return A.TBool()
        if op in ("+", "-", "*", "/", "%"):
            lt = check(e.lhs, expected if isinstance(expected, A.TUInt) else None)
            rt = check(e.rhs, lt if isinstance(lt, A.TUInt) else None)
            if spec:
                for t in (lt, rt):
                    if t is not None and not _is_num(t):
                        self.err(f"arithmetic on non-numeric {t}", e.span)
                return A.TNum()
            if isinstance(lt, A.TNum) and isinstance(rt, A.TUInt):
                lt = rt
                e.lhs.ty = rt
            for t in (lt, rt):
                if t is not None and not _is_num(t):
                    self.err(f"arithmetic on non-numeric {t}", e.span)
            if isinstance(lt, A.TUInt) and isinstance(rt, A.TUInt) and lt != rt:
                self.err(f"mixed-width arithmetic {lt} {op} {rt} needs an explicit cast", e.span)
            return lt if isinstance(lt, A.TUInt) else rt if isinstance(rt, A.TUInt) else A.TNum()
        self.err(f"unknown operator {op}", e.span)
        return None

    def check_args(self, args, params, env, f, span, spec=False):
        if len(args) != len(params):
            self.err(f"call takes {len(params)} arguments, got {len(args)}", span)
        for a, pt in zip(args, params):
            if spec:
                at = self.spec_expr(a, env, ctx=self._spec_ctx)
                if at is not None and not self.spec_assignable(at, pt):
                    self.err(f"argument has type {at}, expected {pt}", a.span)
            else:
                at = self.code_expr(a, env, f, expected=pt)
                if not self.code_assignable(at, pt):
                    self.err(f"argument has type {at}, expected {pt}", a.span)

    def check_call(self, e: A.ECall, env, f, spec):
        rm = self.rm
        if e.fname in rm.functions:
            callee = rm.functions[e.fname]
            if spec:
                self.err(f"calls to code functions are not allowed in specs "
                         f"(use behavioral predicates)", e.span)
                return None
            params = [t for _, t in callee.params]
            results = list(callee.results)
            if callee.is_generic:
                subst = self.infer_type_args(e, callee, params, env, f)
                if subst is None:
                    return None
                e.inst = subst
                params = [substitute(t, subst) for t in params]
                results = [substitute(t, subst) for t in results]
            self.check_args(e.args, params, env, f, e.span, spec=False)
            return results[0] if results else UNIT
        if e.fname in rm.spec_funs:
            sf = rm.spec_funs[e.fname]
            if not spec:
                self.err(f"spec fun {e.fname!r} called from code", e.span)
                return None
            params = [t for _, t in sf.params]
            result = sf.result
            if sf.type_params:
                subst = self.infer_type_args(e, sf, params, env, f, spec=True)
                if subst is None:
                    return None
                e.inst = subst
                params = [substitute(t, subst) for t in params]
                result = substitute(result, subst)
            self.check_args(e.args, params, env, f, e.span, spec=True)
            return result
        self.err(f"unknown function {e.fname!r}", e.span)
        return None

    def infer_type_args(self, e, callee, params, env, f, spec=False):
        tp = callee.type_params[0]
        subst = {}
        if e.type_args:
            subst[tp] = e.type_args[0]
        else:
            for a, pt in zip(e.args, params):
                if isinstance(a, A.ELambda):
                    continue
                at = self.spec_expr(a, env, ctx=self._spec_ctx) if spec \
                    else self.code_expr(a, env, f)
                if at is None:
                    continue
                got = unify_param(pt, at, tp)
                if got is not None:
                    subst[tp] = got
                    break
        if tp not in subst:
            self.err(f"cannot infer type argument for {callee.name!r}", e.span)
            return None
        return subst

    def check_stmts(self, stmts, env, f):
        for s in stmts:
            if isinstance(s, A.SLet):
                t = self.code_expr(s.value, env, f, expected=s.ty)
                if s.ty is not None:
                    if not self.code_assignable(t, s.ty):
                        self.err(f"let {s.name!r}: value has type {t}, annotated {s.ty}", s.span)
                    env[s.name] = s.ty
                else:
                    env[s.name] = A.TUInt(64) if isinstance(t, A.TNum) else t
            elif isinstance(s, A.SAssign):
                lt = self.code_expr(s.lvalue, env, f)
                if not _is_place(s.lvalue):
                    self.err("assignment target must be a variable, field, or element", s.span)
                lt_val = A.strip_ref(lt) if lt else lt
                self.code_expr(s.value, env, f, expected=lt_val if isinstance(lt_val, A.TUInt) else lt_val)
                if s.op in ("+=", "-=") and lt_val is not None and not isinstance(lt_val, A.TUInt):
                    self.err(f"{s.op} on non-integer {lt_val}", s.span)
            elif isinstance(s, A.SExpr):
                self.code_expr(s.value, env, f)
            elif isinstance(s, A.SReturn):
                want = f.results[0] if f.results else None
                if s.value is not None:
                    t = self.code_expr(s.value, env, f, expected=want)
                    if want is None:
                        self.err("return with a value in a unit function", s.span)
                    elif not self.code_assignable(t, want):
                        self.err(f"return has type {t}, declared {want}", s.span)
                elif want is not None:
                    self.err(f"return without a value; function returns {want}", s.span)
            elif isinstance(s, A.SAbort):
                self.code_expr(s.code, env, f, expected=A.TUInt(64))
            elif isinstance(s, A.SIf):
                self.code_expr(s.cond, env, f, expected=A.TBool())
                self.check_stmts(s.then, dict(env), f)
                if s.els is not None:
                    self.check_stmts(s.els, dict(env), f)
            elif isinstance(s, A.SWhile):
                self.code_expr(s.cond, env, f, expected=A.TBool())
                inner = dict(env)
                self.check_stmts(s.body, inner, f)
                for c in s.invariants:
                    self._spec_ctx = "invariant"
                    t = self.spec_expr(c.expr, inner, ctx="invariant")
                    if t is not None and not isinstance(t, A.TBool):
                        self.err(f"loop invariant must be bool, got {t}", c.span)

    # -- specifications ------------------------------------------------------------

    _spec_ctx = "ensures"

    def spec_assignable(self, got, want):
        if got is None or want is None:
            return True
        if _is_num(got) and _is_num(want):
            return True
        if isinstance(got, A.TRef):
            return self.spec_assignable(got.target, want)
        if isinstance(want, A.TRef):
            return self.spec_assignable(got, want.target)
        if isinstance(got, A.TFun) and isinstance(want, A.TFun):
            return got.key() == want.key()
        return got == want

    def check_spec_block(self, blk: A.SpecBlock, f: A.FunDecl, env: dict):
        self.check_spec_purity(blk, f, env)

    def check_spec_purity(self, blk: A.SpecBlock, f, env: dict):
        """Every clause must be a pure, boolean, state-arity-correct formula."""
        for c in blk.clauses:
            self._spec_ctx = c.kind
            t = self.spec_expr(c.expr, dict(env), ctx=c.kind)
            if t is not None and not isinstance(t, A.TBool):
                self.err(f"{c.kind} clause must be bool, got {t}", c.span)
            self.check_state_arity(c.expr, c.kind, c.span)
            if c.kind != "ensures":
                bad = _find_node(c.expr, A.EOld)
                if bad is not None:
                    self.err("old(..) appears outside an ensures clause", bad.span)
                bad = _find_node(c.expr, A.EResult)
                if bad is not None:
                    self.err("`result` appears outside an ensures clause", bad.span)
        for rd in blk.reads_of:
            t = self.path_type(rd.target, env)
            if t is not None and not isinstance(t, A.TFun):
                self.err(f"reads_of target must be function-typed, got {t}", rd.span)
            if rd.resources is not None:
                for r in rd.resources:
                    if r not in self.rm.structs:
                        self.err(f"unknown resource {r!r} in reads_of", rd.span)
                    else:
                        self.require_key(r, rd.span)
        for md in blk.modifies_of:
            t = self.path_type(md.target, env)
            if t is not None and not isinstance(t, A.TFun):
                self.err(f"modifies_of target must be function-typed, got {t}", md.span)
            if md.locations is not None:
                benv = dict(md.params)
                for res, addr in md.locations:
                    at = self.spec_expr(addr, benv, ctx="modifies_of")
                    if at is not None and at != A.TAddress():
                        self.err(f"modifies_of location address has type {at}", md.span)
        for md in blk.modifies:
            at = self.spec_expr(md.addr, dict(env), ctx="modifies")
            if at is not None and at != A.TAddress():
                self.err(f"modifies location address has type {at}", md.span)

    def path_type(self, path, env):
        if isinstance(path, A.EVar):
            if path.name == "self":
                return None
            if path.binding == "fun":
                fn = self.rm.functions[path.name]
                return A.TFun(tuple(t for _, t in fn.params), tuple(fn.results))
            return env.get(path.name)
        if isinstance(path, A.EField):
            bt = self.path_type(path.base, env)
            if bt is None and isinstance(path.base, A.EVar) and path.base.name == "self":
                return None
            bt = A.strip_ref(bt) if bt else bt
            if isinstance(bt, A.TStruct):
                return self.struct_field(bt.name, path.fname, path.span)
            return None
        if isinstance(path, A.EIndex) or isinstance(path, A.EGlobal):
            return None
        return None

    def spec_expr(self, e, env, ctx="ensures"):
        self._spec_ctx = ctx
        t = self._spec_expr(e, env, ctx)
        e.ty = t
        return t

    def _spec_expr(self, e, env, ctx):
        if isinstance(e, A.EInt):
            return A.TNum()
        if isinstance(e, A.EBool):
            return A.TBool()
        if isinstance(e, A.EConst):
            return A.TNum()
        if isinstance(e, A.EVar):
            if e.binding == "fun":
                fn = self.rm.functions[e.name]
                return A.TFun(tuple(t for _, t in fn.params), tuple(fn.results))
            if e.binding == "const":
                return A.TNum()
            t = env.get(e.name)
            if t is None:
                self.err(f"unbound {e.name!r} in spec", e.span)
            return t
        if isinstance(e, A.EField):
            bt = self.spec_expr(e.base, env, ctx)
            bt = A.strip_ref(bt) if bt else bt
            if isinstance(bt, A.TStruct):
                return self.struct_field(bt.name, e.fname, e.span)
            if bt is not None:
                self.err(f"field access on non-struct {bt} in spec", e.span)
            return None
        if isinstance(e, A.EIndex):
            bt = self.spec_expr(e.base, env, ctx)
            self.spec_expr(e.index, env, ctx)
            bt = A.strip_ref(bt) if bt else bt
            if isinstance(bt, A.TVector):
                return bt.elem
            if bt is not None:
                self.err(f"indexing non-vector {bt} in spec", e.span)
            return None
        if isinstance(e, A.EGlobal):
            at = self.spec_expr(e.addr, env, ctx)
            if at is not None and at != A.TAddress():
                self.err(f"resource address has type {at}", e.span)
            return A.TStruct(e.resource)
        if isinstance(e, A.EExistsGlobal):
            self.spec_expr(e.addr, env, ctx)
            return A.TBool()
        if isinstance(e, A.EVecLen):
            self.spec_expr(e.base, env, ctx)
            return A.TNum()
        if isinstance(e, A.EOld):
            return self.spec_expr(e.arg, env, ctx)
        if isinstance(e, A.EResult):
            return None  # concrete type attached during encoding
        if isinstance(e, A.EBinop):
            return self.check_binop(e, env, None, spec=True)
        if isinstance(e, A.EUnop):
            t = self.spec_expr(e.arg, env, ctx)
            if t is not None and not isinstance(t, A.TBool):
                self.err(f"`!` on non-bool {t}", e.span)
            return A.TBool()
        if isinstance(e, A.ECast):
            self.spec_expr(e.arg, env, ctx)
            return A.TNum()
        if isinstance(e, A.EIf):
            ct = self.spec_expr(e.cond, env, ctx)
            if ct is not None and not isinstance(ct, A.TBool):
                self.err("spec `if` condition must be bool", e.span)
            t1 = self.spec_expr(e.then, env, ctx)
            t2 = self.spec_expr(e.els, env, ctx) if e.els is not None else None
            return t1 if t1 is not None else t2
        if isinstance(e, A.ECall):
            return self.check_call(e, env, None, spec=True)
        if isinstance(e, A.EBehavioral):
            return self.check_behavioral(e, env, ctx)
        if isinstance(e, A.ELabeled):
            return self.spec_expr(e.body, env, ctx)
        if isinstance(e, A.EQuant):
            inner = dict(env)
            for b in e.binders:
                if b.kind == "label":
                    continue
                if b.kind == "range":
                    self.spec_expr(b.lo, inner, ctx)
                    self.spec_expr(b.hi, inner, ctx)
                    inner[b.name] = A.TNum()
                else:
                    inner[b.name] = b.btype
            t = self.spec_expr(e.body, inner, ctx)
            if t is not None and not isinstance(t, A.TBool):
                self.err(f"quantifier body must be bool, got {t}", e.span)
            return A.TBool()
        if isinstance(e, (A.EPack, A.EMoveTo, A.EMoveFrom, A.EInvoke, A.ELambda,
                          A.EBlock, A.EBorrow)):
            self.err(f"{type(e).__name__[1:]} is not allowed in a specification "
                     f"(specs are pure)", e.span)
            return None
        self.err(f"unsupported spec expression {type(e).__name__}", e.span)
        return None

    def check_behavioral(self, e: A.EBehavioral, env, ctx):
        t = self.path_type(e.target, env)
        if t is None and not _is_self_path(e.target):
            # field paths through globals: resolve via resource type
            t = self.global_path_type(e.target, env)
        if t is not None and not isinstance(t, A.TFun):
            self.err(f"behavioral predicate target must be function-typed, got {t}", e.span)
            return A.TBool()
        ft: A.TFun | None = t if isinstance(t, A.TFun) else None
        if _is_self_path(e.target):
            ft = self.self_field_type(e.target)
        if ft is not None:
            want = list(ft.params)
            if e.kind == "ensures_of":
                want = want + list(ft.results)
            if len(e.args) != len(want):
                self.err(f"{e.kind} takes {len(want)} arguments here, got {len(e.args)}",
                         e.span)
            for a, pt in zip(e.args, want):
                at = self.spec_expr(a, env, ctx)
                if at is not None and not self.spec_assignable(at, pt):
                    self.err(f"{e.kind} argument has type {at}, expected {pt}", a.span)
            if e.kind == "result_of":
                if not ft.results:
                    self.err("result_of on a function value with no result", e.span)
                    return None
                return ft.results[0]
        else:
            for a in e.args:
                self.spec_expr(a, env, ctx)
            if e.kind == "result_of":
                return None
        return A.TBool()

    def self_field_type(self, path):
        if isinstance(path, A.EField) and isinstance(path.base, A.EVar) \
                and path.base.name == "self":
            for s in self.rm.structs.values():
                if s.spec is not None:
                    fd = s.field(path.fname)
                    if fd is not None:
                        return fd.ty if isinstance(fd.ty, A.TFun) else None
        return None

    def global_path_type(self, path, env):
        if isinstance(path, A.EField):
            base = path.base
            if isinstance(base, A.EIndex) and isinstance(base.base, A.EVar) \
                    and base.base.name in self.rm.structs:
                return self.struct_field(base.base.name, path.fname, path.span)
            if isinstance(base, A.EGlobal):
                return self.struct_field(base.resource, path.fname, path.span)
        return None

    # -- state-arity rules ---------------------------------------------------------

    def check_state_arity(self, e, clause_kind, span):
        """Single-state ranges wrap only single-state predicates; two-state
        ranges must wrap at least one two-state predicate."""

        def scan(x):
            if isinstance(x, A.ELabeled):
                two = x.range.kind in ("from", "to", "between")
                kinds = _behavioral_kinds_outside_labels(x.body)
                if two and not ({"ensures_of", "result_of"} & kinds):
                    self.err(
                        f"two-state range `{x.range}` wraps no two-state "
                        f"behavioral predicate", x.span)
                if not two and ({"ensures_of", "result_of"} & kinds):
                    self.err(
                        f"single-state range `{x.range}` wraps a two-state "
                        f"behavioral predicate (result_of/ensures_of need a "
                        f"two-state range)", x.span)
            for c in A._children(x):
                scan(c)

        scan(e)


def _behavioral_kinds_outside_labels(e) -> set:
    out = set()

    def go(x):
        if isinstance(x, A.ELabeled):
            return
        if isinstance(x, A.EBehavioral):
            out.add(x.kind)
        for c in A._children(x):
            go(c)

    go(e)
    return out


def _is_self_path(path):
    return isinstance(path, A.EField) and isinstance(path.base, A.EVar) \
        and path.base.name == "self"


def _is_place(e):
    if isinstance(e, A.EVar):
        return True
    if isinstance(e, (A.EField, A.EIndex)):
        return _is_place(e.base)
    if isinstance(e, A.EGlobal):
        return True
    return False


def _find_node(e, cls):
    found = []

    def go(x):
        if isinstance(x, cls):
            found.append(x)

    A.walk_expr(e, go)
    return found[0] if found else None


def _lambda_fn(lam: A.ELambda, ft: A.TFun) -> A.FunDecl:
    """View a typed lambda as a function declaration for spec checking."""
    params = [(p, pt) for p, pt in zip(lam.params, ft.params)]
    return A.FunDecl(f"{lam.owner}$lam{lam.lambda_id}", [], params,
                     list(ft.results), None, spec=lam.spec, span=lam.span)


def unify_param(pt, at, tp):
    """Match an argument type against a parameter type mentioning type
    parameter `tp`; returns the binding for tp or None."""
    if isinstance(pt, A.TStruct) and pt.name == tp and not pt.args:
        return A.strip_ref(at)
    if isinstance(pt, A.TRef) and isinstance(at, A.TRef):
        return unify_param(pt.target, at.target, tp)
    if isinstance(pt, A.TRef):
        return unify_param(pt.target, at, tp)
    if isinstance(at, A.TRef):
        return unify_param(pt, at.target, tp)
    if isinstance(pt, A.TVector) and isinstance(at, A.TVector):
        return unify_param(pt.elem, at.elem, tp)
    if isinstance(pt, A.TFun) and isinstance(at, A.TFun):
        for p1, a1 in zip(pt.params, at.params):
            got = unify_param(p1, a1, tp)
            if got is not None:
                return got
        for r1, b1 in zip(pt.results, at.results):
            got = unify_param(r1, b1, tp)
            if got is not None:
                return got
    return None


def substitute(t, subst):
    if isinstance(t, A.TStruct) and t.name in subst and not t.args:
        return subst[t.name]
    if isinstance(t, A.TVector):
        return A.TVector(substitute(t.elem, subst))
    if isinstance(t, A.TRef):
        return A.TRef(t.mut, substitute(t.target, subst))
    if isinstance(t, A.TFun):
        return A.TFun(tuple(substitute(p, subst) for p in t.params),
                      tuple(substitute(r, subst) for r in t.results), t.abilities)
    return t


def check(rm: ResolvedModule):
    """Type-check a resolved module. Returns TypedModule or a list of errors."""
    return Checker(rm).run()

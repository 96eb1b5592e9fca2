"""Lowering from the typed AST to the structured three-address IR.

Compound expressions get temporaries, `x += e` becomes read / checked-op /
write, `&&`/`||` become short-circuit branches, and every lambda body becomes
a synthetic function whose leading parameters are its captures.
"""

from __future__ import annotations

from ..diagnostics import EncodeError
from ..frontend import ast_nodes as A
from ..typeck import TypedModule, substitute
from . import ir as I


def mangle_instance(name: str, targs) -> str:
    return f"{name}<{','.join(str(t) for t in targs)}>"


class _FnLower:
    def __init__(self, mod_lower, decl: A.FunDecl, name: str, subst: dict):
        self.ml = mod_lower
        self.decl = decl
        self.name = name
        self.subst = subst
        self.tmp = 0
        self.sites = 0
        self.locals: dict = {}
        self.env: dict = {}  # var -> ('val', local) | ('ref', Place, mut)
        self.out: list = []  # current instruction list (stack of blocks)

    # -- helpers ------------------------------------------------------------

    def sub(self, t):
        return substitute(t, self.subst) if (t is not None and self.subst) else t

    def fresh(self, ty, hint="t") -> str:
        name = f"%{hint}{self.tmp}"
        self.tmp += 1
        self.locals[name] = self.sub(ty)
        return name

    def site(self) -> int:
        self.sites += 1
        return self.sites - 1

    def emit(self, instr):
        self.out.append(instr)

    def ty_of(self, e: A.Expr):
        t = self.sub(e.ty)
        if isinstance(t, A.TNum):
            return A.TUInt(64)
        return t

    def width_of(self, e: A.Expr) -> int:
        t = self.ty_of(e)
        return t.width if isinstance(t, A.TUInt) else 64

    # -- function ----------------------------------------------------------

    def run(self) -> I.IrFunction:
        f = self.decl
        params = [(n, self.sub(t)) for n, t in f.params]
        fn = I.IrFunction(
            name=self.name,
            params=params,
            results=[self.sub(t) for t in f.results],
            body=[],
            decl=f,
            spec=f.spec,
            span=f.span,
        )
        for n, t in params:
            if isinstance(t, A.TRef):
                self.env[n] = ("ref", I.PLocal(n), t.mut)
                self.locals[n] = t.target
                fn.ref_params.append(n)
                if t.mut:
                    fn.mut_ref_params.append(n)
            else:
                self.env[n] = ("val", n)
                self.locals[n] = t
        body = f.body
        assert body is not None
        self.lower_block_into(body, tail_returns=True)
        fn.body = self.out
        fn.locals = self.locals
        return fn

    def lower_block_into(self, blk: A.EBlock, tail_returns=False):
        saved_env = dict(self.env)
        self.lower_stmts(blk.stmts)
        if blk.tail is not None:
            op = self.lower_expr(blk.tail)
            if tail_returns:
                self.emit(I.IReturn([op] if self.decl.results else [], span=blk.tail.span))
        elif tail_returns:
            self.emit(I.IReturn([], span=blk.span))
        self.env = saved_env

    # -- statements ----------------------------------------------------------

    def lower_stmts(self, stmts):
        for s in stmts:
            self.lower_stmt(s)

    def lower_stmt(self, s):
        if isinstance(s, A.SLet):
            if isinstance(s.value, A.EBorrow):
                place = self.lower_to_place(s.value.target, s.value.mut)
                self.env[s.name] = ("ref", place, s.value.mut)
                declared = self.sub(s.ty) if s.ty else None
                tgt = declared.target if isinstance(declared, A.TRef) else self.ty_of(s.value.target)
                self.locals[s.name] = tgt
                return
            op = self.lower_expr(s.value)
            local = s.name
            self.locals[local] = self.sub(s.ty) if s.ty else self.ty_of(s.value)
            self.env[s.name] = ("val", local)
            self.emit(I.IAssign(local, I.RUse(op), span=s.span))
            return
        if isinstance(s, A.SAssign):
            self.lower_assign(s)
            return
        if isinstance(s, A.SExpr):
            self.lower_expr(s.value)
            return
        if isinstance(s, A.SReturn):
            ops = [self.lower_expr(s.value)] if s.value is not None else []
            self.emit(I.IReturn(ops, span=s.span))
            return
        if isinstance(s, A.SAbort):
            self.emit(I.IAbort(self.lower_expr(s.code), span=s.span))
            return
        if isinstance(s, A.SIf):
            cond = self.lower_expr(s.cond)
            then = self.in_block(lambda: self.lower_stmts(s.then))
            els = self.in_block(lambda: self.lower_stmts(s.els)) if s.els else []
            self.emit(I.IIf(cond, then, els, span=s.span))
            return
        if isinstance(s, A.SWhile):
            cond_ops = []
            cond_block = self.in_block(lambda: cond_ops.append(self.lower_expr(s.cond)))
            body = self.in_block(lambda: self.lower_stmts(s.body))
            self.emit(I.ILoop(s.invariants, cond_block, cond_ops[0], body, span=s.span))
            return
        raise EncodeError(f"cannot lower statement {type(s).__name__}", s.span)

    def in_block(self, thunk) -> list:
        saved, self.out = self.out, []
        saved_env = dict(self.env)
        thunk()
        block, self.out = self.out, saved
        self.env = saved_env
        return block

    def lower_assign(self, s: A.SAssign):
        lv = s.lvalue
        if isinstance(lv, A.EField):
            place = self.lower_to_place(lv.base, mut=True)
            if s.op == "=":
                val = self.lower_expr(s.value)
            else:
                cur = self.read_field(place, lv.fname, lv)
                rhs = self.lower_expr(s.value)
                t = self.fresh(lv.ty, "a")
                self.emit(I.IAssign(t, I.RBin(s.op[0], cur, rhs, self.width_of(lv)),
                                    span=s.span))
                val = I.OLocal(t)
            self.emit(I.IFieldSet(place, lv.fname, val, span=s.span))
            return
        if isinstance(lv, A.EVar):
            info = self.env.get(lv.name)
            if info is None:
                raise EncodeError(f"assignment to unbound {lv.name!r}", s.span)
            if s.op == "=":
                val = self.lower_expr(s.value)
            else:
                cur = self.lower_expr(lv)
                rhs = self.lower_expr(s.value)
                t = self.fresh(lv.ty, "a")
                self.emit(I.IAssign(t, I.RBin(s.op[0], cur, rhs, self.width_of(lv)),
                                    span=s.span))
                val = I.OLocal(t)
            if info[0] == "val":
                self.emit(I.IAssign(info[1], I.RUse(val), span=s.span))
            else:
                raise EncodeError("whole-reference assignment is not supported", s.span)
            return
        raise EncodeError("unsupported assignment target", s.span)

    # -- places ---------------------------------------------------------------

    def lower_to_place(self, e: A.Expr, mut: bool) -> I.Place:
        if isinstance(e, A.EVar):
            info = self.env[e.name]
            if info[0] == "ref":
                return info[1]
            return I.PLocal(info[1])
        if isinstance(e, A.EGlobal):
            addr = self.lower_expr(e.addr)
            ref = self.fresh(A.TStruct(e.resource), "g")
            self.emit(I.IBorrowGlobal(ref, e.resource, addr, mut, span=e.span))
            return I.PGlobal(e.resource, addr)
        if isinstance(e, A.EBorrow):
            return self.lower_to_place(e.target, e.mut)
        raise EncodeError("expression does not denote a mutable place", e.span)

    def read_field(self, place: I.Place, fname: str, e: A.Expr) -> I.Operand:
        if isinstance(place, I.PLocal):
            base = I.OLocal(place.name)
        else:
            tbase = self.fresh(A.TStruct(place.resource), "l")
            self.emit(I.ILoadPlace(tbase, place, span=e.span))
            base = I.OLocal(tbase)
        t = self.fresh(e.ty, "f")
        self.emit(I.IAssign(t, I.RFieldGet(base, fname), span=e.span))
        return I.OLocal(t)

    # -- expressions --------------------------------------------------------------

    def lower_expr(self, e: A.Expr) -> I.Operand:
        if isinstance(e, A.EInt):
            return I.OInt(e.value)
        if isinstance(e, A.EBool):
            return I.OBool(e.value)
        if isinstance(e, A.EConst):
            return I.OInt(2**64 - 1 if e.name == "MAX_U64" else 2**128 - 1)
        if isinstance(e, A.EVar):
            if e.binding == "fun":
                fn = self.ml.typed.functions[e.name]
                ft = A.TFun(tuple(self.sub(t) for _, t in fn.params),
                            tuple(self.sub(t) for t in fn.results))
                t = self.fresh(ft, "fv")
                self.emit(I.IAssign(t, I.RFunRef(e.name, ft, self.site()), span=e.span))
                return I.OLocal(t)
            if e.binding == "const":
                return I.OInt(2**64 - 1 if e.name == "MAX_U64" else 2**128 - 1)
            info = self.env[e.name]
            if info[0] == "val":
                return I.OLocal(info[1])
            place = info[1]
            if isinstance(place, I.PLocal):
                return I.OLocal(place.name)
            t = self.fresh(e.ty, "l")
            self.emit(I.ILoadPlace(t, place, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EField):
            base = e.base
            if isinstance(base, (A.EVar, A.EGlobal)) or isinstance(base, A.EBorrow):
                try:
                    place = self.lower_to_place(base, mut=False)
                    return self.read_field(place, e.fname, e)
                except EncodeError:
                    pass
            bop = self.lower_expr(base)
            t = self.fresh(e.ty, "f")
            self.emit(I.IAssign(t, I.RFieldGet(bop, e.fname), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EGlobal):
            addr = self.lower_expr(e.addr)
            ref = self.fresh(A.TStruct(e.resource), "g")
            self.emit(I.IBorrowGlobal(ref, e.resource, addr, False, span=e.span))
            t = self.fresh(A.TStruct(e.resource), "l")
            self.emit(I.ILoadPlace(t, I.PGlobal(e.resource, addr), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EIndex):
            base = self.lower_expr(e.base)
            idx = self.lower_expr(e.index)
            t = self.fresh(e.ty, "v")
            self.emit(I.IVecGet(t, base, idx, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EVecLen):
            base = self.lower_expr(e.base)
            t = self.fresh(A.TUInt(64), "n")
            self.emit(I.IVecLen(t, base, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EBinop):
            return self.lower_binop(e)
        if isinstance(e, A.EUnop):
            a = self.lower_expr(e.arg)
            t = self.fresh(A.TBool(), "b")
            self.emit(I.IAssign(t, I.RUn("!", a), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.ECast):
            a = self.lower_expr(e.arg)
            src = self.ty_of(e.arg)
            from_w = src.width if isinstance(src, A.TUInt) else e.to.width
            t = self.fresh(e.to, "c")
            self.emit(I.IAssign(t, I.RCast(a, from_w, e.to.width), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EIf):
            cond = self.lower_expr(e.cond)
            if e.els is None:
                then = self.in_block(lambda: self.lower_expr(e.then))
                self.emit(I.IIf(cond, then, [], span=e.span))
                return I.OBool(True)
            t = self.fresh(e.ty, "i")
            then = self.in_block(
                lambda: self.emit(I.IAssign(t, I.RUse(self.lower_expr(e.then)))))
            els = self.in_block(
                lambda: self.emit(I.IAssign(t, I.RUse(self.lower_expr(e.els)))))
            self.emit(I.IIf(cond, then, els, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EBlock):
            self.lower_stmts(e.stmts)
            if e.tail is not None:
                return self.lower_expr(e.tail)
            return I.OBool(True)
        if isinstance(e, A.EPack):
            s = self.ml.typed.structs[e.sname]
            given = dict(e.fields)
            ops = [(fd.name, self.lower_expr(given[fd.name])) for fd in s.fields]
            t = self.fresh(A.TStruct(e.sname), "p")
            self.emit(I.IAssign(t, I.RPack(e.sname, ops, self.site()), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.ELambda):
            impl = self.ml.lower_lambda(e, self)
            caps = []
            for cname, _ in e.captures:
                caps.append(self.lower_expr(A.EVar(cname, binding="local", span=e.span)
                                            if self.env.get(cname, ("val",))[0] != "ref"
                                            else A.EVar(cname, binding="local", span=e.span)))
            ft = A.TFun(tuple(self.sub(t) for t in e.param_types),
                        tuple(self.sub(t) for t in e.result_types))
            t = self.fresh(ft, "fv")
            self.emit(I.IAssign(t, I.RClosure(impl, caps, ft, self.site()), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EFunValue):
            fn = self.ml.typed.functions[e.fname]
            ft = A.TFun(tuple(t for _, t in fn.params), tuple(fn.results))
            t = self.fresh(ft, "fv")
            self.emit(I.IAssign(t, I.RFunRef(e.fname, ft, self.site()), span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.ECall):
            return self.lower_call(e)
        if isinstance(e, A.EInvoke):
            callee = self.lower_expr(e.callee)
            ft = self.sub(A.strip_ref(e.callee.ty))
            args = self.lower_args(e.args, list(ft.params))
            dsts = []
            if ft.results:
                t = self.fresh(ft.results[0], "r")
                dsts = [t]
            self.emit(I.IInvoke(dsts, callee, ft.key(), args, self.site(), span=e.span))
            return I.OLocal(dsts[0]) if dsts else I.OBool(True)
        if isinstance(e, A.EMoveTo):
            addr = self.lower_expr(e.addr)
            val = self.lower_expr(e.value)
            self.emit(I.IMoveTo(e.resource, addr, val, self.site(), span=e.span))
            return I.OBool(True)
        if isinstance(e, A.EMoveFrom):
            addr = self.lower_expr(e.addr)
            t = self.fresh(A.TStruct(e.resource), "m")
            self.emit(I.IMoveFrom(t, e.resource, addr, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EExistsGlobal):
            addr = self.lower_expr(e.addr)
            t = self.fresh(A.TBool(), "e")
            self.emit(I.IExists(t, e.resource, addr, span=e.span))
            return I.OLocal(t)
        if isinstance(e, A.EBorrow):
            # immutable borrows pass values; only &mut survives (as places)
            return self.lower_expr(e.target)
        raise EncodeError(f"cannot lower {type(e).__name__}", e.span)

    def lower_binop(self, e: A.EBinop) -> I.Operand:
        if e.op == "&&":
            return self.lower_expr(A.EIf(e.lhs, e.rhs, A.EBool(False, ty=A.TBool()),
                                         ty=A.TBool(), span=e.span))
        if e.op == "||":
            return self.lower_expr(A.EIf(e.lhs, A.EBool(True, ty=A.TBool()), e.rhs,
                                         ty=A.TBool(), span=e.span))
        a = self.lower_expr(e.lhs)
        b = self.lower_expr(e.rhs)
        if e.op in ("+", "-", "*", "/", "%"):
            width = self.width_of(e)
            t = self.fresh(e.ty, "t")
            self.emit(I.IAssign(t, I.RBin(e.op, a, b, width), span=e.span))
            return I.OLocal(t)
        t = self.fresh(A.TBool(), "b")
        self.emit(I.IAssign(t, I.RBin(e.op, a, b, 0), span=e.span))
        return I.OLocal(t)

    def lower_args(self, args, param_types):
        out = []
        for a, pt in zip(args, param_types):
            pt = self.sub(pt)
            if isinstance(pt, A.TRef) and pt.mut:
                out.append(I.ARef(self.lower_to_place(a, mut=True), True))
            else:
                out.append(I.AVal(self.lower_expr(a)))
        return out

    def lower_call(self, e: A.ECall) -> I.Operand:
        fname = e.fname
        callee = self.ml.typed.functions[fname]
        inst = getattr(e, "inst", None)
        params = [t for _, t in callee.params]
        results = list(callee.results)
        if inst:
            conc = {k: self.sub(v) for k, v in inst.items()}
            fname = mangle_instance(fname, [conc[tp] for tp in callee.type_params])
            params = [substitute(t, conc) for t in params]
            results = [substitute(t, conc) for t in results]
        args = self.lower_args(e.args, params)
        dsts = []
        if results:
            t = self.fresh(results[0], "r")
            dsts = [t]
        self.emit(I.ICall(dsts, fname, args, self.site(), span=e.span))
        return I.OLocal(dsts[0]) if dsts else I.OBool(True)


class _ModLower:
    def __init__(self, typed: TypedModule, mono_functions: dict):
        self.typed = typed
        self.mono = mono_functions  # name -> (FunDecl, subst)
        self.out: dict = {}

    def run(self) -> IrModule:
        for name in self.mono:
            self.lower_fn(name)
        return IrModule(self.typed.name, self.out, typed=self.typed)

    def lower_fn(self, name: str) -> I.IrFunction:
        if name in self.out:
            return self.out[name]
        decl, subst = self.mono[name]
        fl = _FnLower(self, decl, name, subst)
        fn = fl.run()
        self.out[name] = fn
        return fn

    def lower_lambda(self, lam: A.ELambda, parent: _FnLower) -> str:
        symbol = f"{lam.owner}$lam{lam.lambda_id}"
        if parent.subst:
            symbol = f"{parent.name}$lam{lam.lambda_id}"
        if symbol in self.out:
            return symbol
        params = [(n, parent.sub(t)) for n, t in lam.captures] + \
                 [(p, parent.sub(t)) for p, t in zip(lam.params, lam.param_types)]
        results = [parent.sub(t) for t in lam.result_types]
        decl = A.FunDecl(symbol, [], params, results,
                         A.EBlock([], lam.body, span=lam.span),
                         spec=lam.spec, span=lam.span)
        fl = _FnLower(self, decl, symbol, parent.subst)
        fn = fl.run()
        fn.is_lambda_impl = True
        fn.n_captures = len(lam.captures)
        self.out[symbol] = fn
        return symbol


from .ir import IrModule  # noqa: E402  (re-export convenience)


def lower(typed: TypedModule, mono_functions: dict) -> IrModule:
    """Lower monomorphized functions to IR. `mono_functions` maps instance
    names to (FunDecl, type-substitution) as produced by monomorphize()."""
    return _ModLower(typed, mono_functions).run()

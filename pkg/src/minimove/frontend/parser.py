"""Recursive-descent parser for MiniMove modules.

The concrete syntax follows the published listing style: `|T1,..|T` function
types with trailing `has` ability lists, inline `spec { .. }` blocks after
lambdas and loops, `reads_of<..>`/`modifies_of<..>` declarations, state-label
predicates `S |~ p` / `S1..S2 |~ q`, and `forall S in *` quantifiers.
"""

from __future__ import annotations

from ..diagnostics import ParseError, Span
from . import ast_nodes as A
from .lexer import Token, tokenize

_TYPE_START = {"u64", "u128", "bool", "address", "vector", "&", "|", "||", "ident"}


class Parser:
    def __init__(self, toks: list, file: str):
        self.toks = toks
        self.pos = 0
        self.file = file
        self._lambda_counter = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, off: int = 0) -> Token:
        return self.toks[min(self.pos + off, len(self.toks) - 1)]

    def at(self, kind: str, off: int = 0) -> bool:
        t = self.peek(off)
        if kind in ("ident", "int", "eof"):
            return t.kind == kind
        return t.text == kind and t.kind in ("kw", kind)

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if self.pos < len(self.toks) - 1:
            self.pos += 1
        return t

    def accept(self, kind: str) -> Token | None:
        if self.at(kind):
            return self.advance()
        return None

    def expect(self, kind: str, ctx: str = "") -> Token:
        if self.at(kind):
            return self.advance()
        t = self.peek()
        what = f" in {ctx}" if ctx else ""
        raise ParseError(f"unexpected {t.text or 'end of input'!r}{what}", t.span, expected={kind})

    def error(self, msg: str, expected: set | None = None):
        raise ParseError(msg, self.peek().span, expected=expected)

    def save(self) -> int:
        return self.pos

    def restore(self, mark: int):
        self.pos = mark

    # -- module -------------------------------------------------------------

    def parse_module(self) -> A.ModuleAst:
        start = self.peek().span
        self.expect("module")
        name = self.expect("ident", "module header").text
        self.expect("{")
        structs, enums, funs, spec_funs, orphans = [], [], [], [], []
        while not self.at("}"):
            if self.at("struct"):
                structs.append(self.parse_struct())
            elif self.at("enum"):
                enums.append(self.parse_enum())
            elif self.at("fun"):
                funs.append(self.parse_fun())
            elif self.at("spec"):
                d = self.parse_spec_decl()
                if isinstance(d, A.SpecFunDecl):
                    spec_funs.append(d)
                else:
                    orphans.append(d)
            else:
                self.error("expected a declaration", {"struct", "enum", "fun", "spec"})
        self.expect("}")
        self.expect("eof")
        return A.ModuleAst(name, structs, enums, funs, spec_funs, orphans,
                           span=start, source_file=self.file)

    # -- declarations --------------------------------------------------------

    def parse_abilities(self) -> frozenset:
        self.expect("has")
        abis = set()
        while True:
            t = self.expect("ident", "ability list") if self.peek().kind == "ident" else self.advance()
            if t.text not in A.ABILITIES:
                raise ParseError(f"unknown ability {t.text!r}", t.span, expected=set(A.ABILITIES))
            abis.add(t.text)
            if self.at("+"):
                self.advance()
                continue
            # `,` continues the ability list only when followed by another
            # ability name that is not itself a field declaration.
            if self.at(","):
                nxt = self.peek(1)
                if nxt.kind == "ident" and nxt.text in A.ABILITIES and self.peek(2).text != ":":
                    self.advance()
                    continue
            break
        return frozenset(abis)

    def parse_struct(self) -> A.StructDecl:
        start = self.expect("struct").span
        name = self.expect("ident", "struct declaration").text
        fields, positional = [], False
        if self.accept("("):
            positional = True
            idx = 0
            while not self.at(")"):
                t = self.parse_type()
                fields.append(A.FieldDecl(str(idx), t))
                idx += 1
                if not self.accept(","):
                    break
            self.expect(")")
        abis = self.parse_abilities() if self.at("has") else frozenset()
        if self.accept(";"):
            return A.StructDecl(name, abis, fields, positional, span=start)
        self.expect("{", "struct body")
        while not self.at("}"):
            fspan = self.peek().span
            fname = self.expect("ident", "field").text
            self.expect(":")
            fty = self.parse_type()
            fields.append(A.FieldDecl(fname, fty, fspan))
            if not self.accept(","):
                break
        self.expect("}")
        return A.StructDecl(name, abis, fields, positional, span=start)

    def parse_enum(self) -> A.EnumDecl:
        start = self.expect("enum").span
        name = self.expect("ident", "enum declaration").text
        abis = self.parse_abilities() if self.at("has") else frozenset()
        self.expect("{")
        variants = []
        while not self.at("}"):
            vname = self.expect("ident", "enum variant").text
            self.expect("(", "enum variant payload")
            vty = self.parse_type()
            self.expect(")")
            variants.append((vname, vty))
            if not self.accept(","):
                break
        self.expect("}")
        return A.EnumDecl(name, abis, variants, span=start)

    def parse_params(self) -> list:
        params = []
        self.expect("(")
        while not self.at(")"):
            pname = self.expect("ident", "parameter").text
            self.expect(":")
            pty = self.parse_type()
            params.append((pname, pty))
            if not self.accept(","):
                break
        self.expect(")")
        return params

    def parse_fun(self) -> A.FunDecl:
        start = self.expect("fun").span
        name = self.expect("ident", "function declaration").text
        type_params = []
        if self.accept("<"):
            type_params.append(self.expect("ident", "type parameter").text)
            self.expect(">")
        params = self.parse_params()
        results = []
        if self.accept(":"):
            results.append(self.parse_type())
        body = self.parse_block()
        return A.FunDecl(name, type_params, params, results, body, span=start)

    def parse_spec_decl(self):
        start = self.expect("spec").span
        if self.at("fun"):
            self.advance()
            name = self.expect("ident", "spec fun").text
            type_params = []
            if self.accept("<"):
                type_params.append(self.expect("ident").text)
                self.expect(">")
            params = self.parse_params()
            self.expect(":")
            rty = self.parse_type()
            self.expect("{")
            body = self.parse_expr(spec=True)
            self.expect("}")
            return A.SpecFunDecl(name, type_params, params, rty, body, span=start)
        name = self.expect("ident", "spec target").text
        params = self.parse_params() if self.at("(") else None
        block = self.parse_spec_block()
        return A.OrphanSpec(name, params, block, span=start)

    def parse_spec_block(self) -> A.SpecBlock:
        start = self.expect("{", "spec block").span
        block = A.SpecBlock(span=start)
        while not self.at("}"):
            t = self.peek()
            if t.text in ("requires", "aborts_if", "ensures", "invariant"):
                self.advance()
                inferred = False
                if self.at("["):
                    self.advance()
                    self.expect("inferred")
                    self.expect("]")
                    inferred = True
                e = self.parse_expr(spec=True)
                self.expect(";")
                block.clauses.append(A.SpecClause(t.text, e, inferred, t.span))
            elif t.text == "reads_of":
                self.advance()
                self.expect("<")
                target = self.parse_path()
                self.expect(">")
                if self.accept("*"):
                    resources = None
                else:
                    resources = [self.expect("ident", "resource name").text]
                    while self.accept(","):
                        resources.append(self.expect("ident").text)
                self.expect(";")
                block.reads_of.append(A.ReadsDecl(target, resources, t.span))
            elif t.text == "modifies_of":
                self.advance()
                self.expect("<")
                target = self.parse_path()
                self.expect(">")
                params = self.parse_params() if self.at("(") else []
                if self.accept("*"):
                    locations = None
                else:
                    locations = [self.parse_location()]
                    while self.accept(","):
                        locations.append(self.parse_location())
                self.expect(";")
                block.modifies_of.append(A.ModifiesOfDecl(target, params, locations, t.span))
            elif t.text == "modifies":
                self.advance()
                res, addr = self.parse_location()
                self.expect(";")
                block.modifies.append(A.ModifiesDecl(res, addr, t.span))
            elif t.text == "pragma":
                self.advance()
                block.pragmas.add(self.expect("ident", "pragma name").text)
                self.expect(";")
            else:
                self.error("expected a spec member",
                           {"requires", "aborts_if", "ensures", "invariant",
                            "reads_of", "modifies_of", "modifies", "pragma"})
        self.expect("}")
        return block

    def parse_location(self):
        res = self.expect("ident", "modifies location").text
        self.expect("[")
        addr = self.parse_expr(spec=True)
        self.expect("]")
        return (res, addr)

    def parse_path(self) -> A.Expr:
        """Function-value path inside `<..>`: parameter, self.field, global field."""
        t = self.peek()
        if self.accept("self"):
            e = A.EVar("self", span=t.span)
        else:
            e = A.EVar(self.expect("ident", "function-value path").text, span=t.span)
        while True:
            if self.accept("."):
                f = self.advance()
                e = A.EField(e, f.text, span=f.span)
            elif self.at("["):
                self.advance()
                idx = self.parse_expr(spec=True)
                self.expect("]")
                e = A.EIndex(e, idx, span=t.span)
            else:
                return e

    # -- types ---------------------------------------------------------------

    def parse_type(self) -> A.Type:
        t = self.peek()
        if self.accept("u64"):
            return A.TUInt(64)
        if self.accept("u128"):
            return A.TUInt(128)
        if self.accept("bool"):
            return A.TBool()
        if self.accept("address"):
            return A.TAddress()
        if self.accept("vector"):
            self.expect("<")
            elem = self.parse_type()
            self.expect(">")
            return A.TVector(elem)
        if self.accept("&"):
            mut = bool(self.accept("mut"))
            return A.TRef(mut, self.parse_type())
        if self.at("|") or self.at("||"):
            return self.parse_fun_type()
        if t.kind == "ident":
            self.advance()
            args = ()
            if self.at("<") and self._looks_like_type_args():
                self.advance()
                lst = [self.parse_type()]
                while self.accept(","):
                    lst.append(self.parse_type())
                self.expect(">")
                args = tuple(lst)
            return A.TStruct(t.text, args)
        raise ParseError("expected a type", t.span, expected=_TYPE_START)

    def _looks_like_type_args(self) -> bool:
        mark = self.save()
        try:
            self.advance()
            self.parse_type()
            while self.accept(","):
                self.parse_type()
            ok = self.at(">")
        except ParseError:
            ok = False
        self.restore(mark)
        return ok

    def parse_fun_type(self) -> A.TFun:
        params = []
        if self.accept("||"):
            pass  # empty parameter list
        else:
            self.expect("|")
            if not self.at("|"):
                params.append(self.parse_type())
                while self.accept(","):
                    params.append(self.parse_type())
            self.expect("|")
        results = []
        if self._at_type_start():
            results.append(self.parse_type())
        abis = self.parse_abilities() if self.at("has") else frozenset()
        return A.TFun(tuple(params), tuple(results), abis)

    def _at_type_start(self) -> bool:
        t = self.peek()
        return t.text in ("u64", "u128", "bool", "address", "vector", "&") or t.kind == "ident"

    # -- statements / blocks --------------------------------------------------

    def parse_block(self) -> A.EBlock:
        start = self.expect("{").span
        stmts: list = []
        tail = None
        while not self.at("}"):
            if self.at("let"):
                sp = self.advance().span
                name = self.expect("ident", "let binding").text
                ty = None
                if self.accept(":"):
                    ty = self.parse_type()
                self.expect("=")
                val = self.parse_expr()
                self.expect(";")
                stmts.append(A.SLet(name, ty, val, span=sp))
            elif self.at("while"):
                sp = self.advance().span
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                body = self.parse_block()
                invariants = []
                if self.at("spec"):
                    self.advance()
                    blk = self.parse_spec_block()
                    invariants = blk.invariants
                self.accept(";")
                stmts.append(A.SWhile(cond, list(body.stmts) + ([A.SExpr(body.tail)] if body.tail else []),
                                      invariants, span=sp))
            elif self.at("return"):
                sp = self.advance().span
                val = None
                if not self.at(";"):
                    val = self.parse_expr()
                self.expect(";")
                stmts.append(A.SReturn(val, span=sp))
            elif self.at("abort"):
                sp = self.advance().span
                code = self.parse_expr()
                self.expect(";")
                stmts.append(A.SAbort(code, span=sp))
            elif self.at("if"):
                node = self.parse_if()
                if self.at("}") and isinstance(node, A.EIf):
                    tail = node
                    break
                if isinstance(node, A.EIf):
                    self.accept(";")
                    stmts.append(A.SExpr(node, span=node.span))
                else:
                    stmts.append(node)
            else:
                e = self.parse_expr()
                if self.peek().text in ("=", "+=", "-="):
                    op = self.advance().text
                    val = self.parse_expr()
                    self.expect(";")
                    stmts.append(A.SAssign(e, op, val, span=e.span))
                elif self.accept(";"):
                    stmts.append(A.SExpr(e, span=e.span))
                else:
                    tail = e
                    break
        self.expect("}")
        return A.EBlock(stmts, tail, span=start)

    def parse_if(self):
        """Parse `if (c) ...` which may be an expression-if or a statement-if."""
        sp = self.expect("if").span
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")

        def arm():
            if self.at("{"):
                blk = self.parse_block()
                return blk, None
            if self.at("return"):
                s = self.advance().span
                val = None if self.at(";") else self.parse_expr()
                self.expect(";")
                return None, A.SReturn(val, span=s)
            if self.at("abort"):
                s = self.advance().span
                code = self.parse_expr()
                self.expect(";")
                return None, A.SAbort(code, span=s)
            return self.parse_expr(), None

        then_e, then_s = arm()
        els_e = els_s = None
        if self.accept("else"):
            if self.at("if"):
                nested = self.parse_if()
                if isinstance(nested, A.EIf):
                    els_e = nested
                else:
                    els_s = nested
            else:
                els_e, els_s = arm()
        if then_s is None and els_s is None:
            return A.EIf(cond, then_e, els_e, span=sp)
        def as_stmts(e, s):
            if s is not None:
                return [s]
            if e is None:
                return None
            if isinstance(e, A.EBlock):
                out = list(e.stmts)
                if e.tail is not None:
                    out.append(A.SExpr(e.tail, span=e.tail.span))
                return out
            return [A.SExpr(e, span=e.span)]
        return A.SIf(cond, as_stmts(then_e, then_s) or [],
                     as_stmts(els_e, els_s), span=sp)

    # -- expressions -----------------------------------------------------------

    def parse_expr(self, spec: bool = False) -> A.Expr:
        if self.at("|") or self.at("||"):
            return self.parse_lambda()
        if spec:
            q = self.try_quant_or_labeled()
            if q is not None:
                return q
        return self.parse_implies(spec)

    def parse_lambda(self) -> A.Expr:
        sp = self.peek().span
        params = []
        if self.accept("||"):
            pass
        else:
            self.expect("|")
            if not self.at("|"):
                params.append(self.expect("ident", "lambda parameter").text)
                while self.accept(","):
                    params.append(self.expect("ident").text)
            self.expect("|")
        body = self.parse_expr()
        spec_blk = None
        if self.at("spec") and self.peek(1).text == "{":
            self.advance()
            spec_blk = self.parse_spec_block()
        lam = A.ELambda(params, body, spec_blk, self._lambda_counter, span=sp)
        self._lambda_counter += 1
        return lam

    def try_quant_or_labeled(self):
        t = self.peek()
        if t.text in ("forall", "exists"):
            # `exists<R>(a)` is a global-state read, not a quantifier
            if t.text == "exists" and self.peek(1).text == "<":
                return None
            self.advance()
            binders = [self.parse_binder()]
            while self.accept(","):
                binders.append(self.parse_binder())
            self.expect(":", "quantifier")
            body = self.parse_expr(spec=True)
            return A.EQuant(t.text, binders, body, span=t.span)
        rng = self.try_state_range()
        if rng is not None:
            self.expect("|~")
            body = self.parse_expr(spec=True)
            return A.ELabeled(rng, body, span=t.span)
        return None

    def try_state_range(self):
        """Lookahead for `S |~`, `S.. |~`, `..S |~`, `S1..S2 |~`."""
        mark = self.save()
        t = self.peek()
        if self.accept(".."):
            if self.peek().kind == "ident" and self.peek(1).text == "|~":
                b = self.advance().text
                return A.StateRange("to", None, b)
            self.restore(mark)
            return None
        if t.kind == "ident":
            if self.peek(1).text == "|~":
                self.advance()
                return A.StateRange("single", t.text)
            if self.peek(1).text == "..":
                if self.peek(2).text == "|~":
                    self.advance()
                    self.advance()
                    return A.StateRange("from", t.text)
                if self.peek(2).kind == "ident" and self.peek(3).text == "|~":
                    self.advance()
                    self.advance()
                    b = self.advance().text
                    return A.StateRange("between", t.text, b)
        return None

    def parse_binder(self) -> A.Binder:
        name = self.expect("ident", "binder").text
        if self.accept("in"):
            if self.accept("*"):
                return A.Binder("label", name)
            lo = self.parse_add(True)
            self.expect("..")
            hi = self.parse_add(True)
            return A.Binder("range", name, lo=lo, hi=hi)
        self.expect(":")
        return A.Binder("typed", name, btype=self.parse_type())

    def parse_implies(self, spec) -> A.Expr:
        lhs = self.parse_or(spec)
        t = self.peek()
        if self.accept("==>"):
            rhs = self.parse_expr(spec)  # right-associative, label/quant-transparent
            return A.EBinop("==>", lhs, rhs, span=t.span)
        if self.accept("<==>"):
            rhs = self.parse_expr(spec)
            return A.EBinop("<==>", lhs, rhs, span=t.span)
        return lhs

    def parse_or(self, spec) -> A.Expr:
        lhs = self.parse_and(spec)
        while self.at("||"):
            t = self.advance()
            rhs = self.parse_and(spec)
            lhs = A.EBinop("||", lhs, rhs, span=t.span)
        return lhs

    def parse_and(self, spec) -> A.Expr:
        lhs = self.parse_cmp(spec)
        while self.at("&&"):
            t = self.advance()
            rhs = self.parse_cmp(spec)
            lhs = A.EBinop("&&", lhs, rhs, span=t.span)
        return lhs

    def parse_cmp(self, spec) -> A.Expr:
        lhs = self.parse_add(spec)
        t = self.peek()
        if t.text in ("==", "!=", "<", "<=", ">", ">="):
            self.advance()
            rhs = self.parse_add(spec)
            return A.EBinop(t.text, lhs, rhs, span=t.span)
        return lhs

    def parse_add(self, spec) -> A.Expr:
        lhs = self.parse_mul(spec)
        while self.peek().text in ("+", "-"):
            t = self.advance()
            rhs = self.parse_mul(spec)
            lhs = A.EBinop(t.text, lhs, rhs, span=t.span)
        return lhs

    def parse_mul(self, spec) -> A.Expr:
        lhs = self.parse_cast(spec)
        while self.peek().text in ("*", "/", "%"):
            t = self.advance()
            rhs = self.parse_cast(spec)
            lhs = A.EBinop(t.text, lhs, rhs, span=t.span)
        return lhs

    def parse_cast(self, spec) -> A.Expr:
        e = self.parse_unary(spec)
        while self.at("as"):
            t = self.advance()
            ty = self.parse_type()
            e = A.ECast(e, ty, span=t.span)
        return e

    def parse_unary(self, spec) -> A.Expr:
        t = self.peek()
        if self.accept("!"):
            return A.EUnop("!", self.parse_unary(spec), span=t.span)
        if self.accept("&"):
            mut = bool(self.accept("mut"))
            return A.EBorrow(mut, self.parse_unary(spec), span=t.span)
        return self.parse_postfix(spec)

    def parse_postfix(self, spec) -> A.Expr:
        e = self.parse_primary(spec)
        while True:
            t = self.peek()
            if self.accept("."):
                f = self.advance()
                if f.kind not in ("ident", "int") and f.text != "length":
                    raise ParseError("expected a field name", f.span, expected={"ident"})
                if f.text == "length" and self.at("(") and self.peek(1).text == ")":
                    self.advance()
                    self.advance()
                    e = A.EVecLen(e, method_style=True, span=f.span)
                else:
                    e = A.EField(e, f.text, span=f.span)
            elif self.at("["):
                self.advance()
                idx = self.parse_expr(spec)
                self.expect("]")
                e = A.EIndex(e, idx, span=t.span)
            elif self.at("("):
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.parse_expr(spec))
                    if not self.accept(","):
                        break
                self.expect(")")
                if isinstance(e, A.EVar):
                    e = A.ECall(e.name, [], args, span=e.span)
                else:
                    e = A.EInvoke(e, args, span=t.span)
            else:
                return e

    def parse_primary(self, spec) -> A.Expr:
        t = self.peek()
        if t.kind == "int":
            self.advance()
            return A.EInt(int(t.text), span=t.span)
        if self.accept("true"):
            return A.EBool(True, span=t.span)
        if self.accept("false"):
            return A.EBool(False, span=t.span)
        if self.accept("("):
            e = self.parse_expr(spec)
            self.expect(")")
            return e
        if self.at("if"):
            node = self.parse_if()
            if not isinstance(node, A.EIf):
                raise ParseError("statement `if` used in expression position", t.span)
            return node
        if t.text in ("move_to", "move_from", "exists"):
            self.advance()
            self.expect("<")
            rty = self.parse_type()
            self.expect(">")
            self.expect("(")
            addr = self.parse_expr(spec)
            if t.text == "move_to":
                self.expect(",")
                val = self.parse_expr(spec)
                self.expect(")")
                return A.EMoveTo(_struct_name(rty, t.span), addr, val, span=t.span)
            self.expect(")")
            if t.text == "move_from":
                return A.EMoveFrom(_struct_name(rty, t.span), addr, span=t.span)
            return A.EExistsGlobal(_struct_name(rty, t.span), addr, span=t.span)
        if self.accept("old"):
            self.expect("(")
            e = self.parse_expr(spec)
            self.expect(")")
            return A.EOld(e, span=t.span)
        if self.accept("result"):
            return A.EResult(0, span=t.span)
        if t.text in A.BEHAVIORAL_KINDS:
            self.advance()
            self.expect("<")
            target = self.parse_path()
            self.expect(">")
            self.expect("(")
            args = []
            while not self.at(")"):
                args.append(self.parse_expr(spec))
                if not self.accept(","):
                    break
            self.expect(")")
            return A.EBehavioral(t.text, target, args, span=t.span)
        if self.accept("self"):
            return A.EVar("self", span=t.span)
        if t.text in ("MAX_U64", "MAX_U128"):
            self.advance()
            return A.EConst(t.text, span=t.span)
        if t.kind == "ident":
            self.advance()
            # enum variant constructor E::V(payload)
            if self.at("::"):
                self.advance()
                vname = self.expect("ident", "enum variant").text
                self.expect("(")
                payload = self.parse_expr(spec)
                self.expect(")")
                return A.EPack(t.text, [("payload", payload)], enum_variant=vname, span=t.span)
            # struct literal: IDENT { fname: e, ... }
            if self.at("{") and (self.peek(1).text == "}" or
                                 (self.peek(1).kind in ("ident", "int") and self.peek(2).text == ":")):
                self.advance()
                fields = []
                while not self.at("}"):
                    fn = self.advance()
                    self.expect(":")
                    fields.append((fn.text, self.parse_expr(spec)))
                    if not self.accept(","):
                        break
                self.expect("}")
                return A.EPack(t.text, fields, span=t.span)
            # generic call: IDENT<types>(args)
            if self.at("<"):
                mark = self.save()
                try:
                    self.advance()
                    targs = [self.parse_type()]
                    while self.accept(","):
                        targs.append(self.parse_type())
                    self.expect(">")
                    self.expect("(")
                except ParseError:
                    self.restore(mark)
                else:
                    args = []
                    while not self.at(")"):
                        args.append(self.parse_expr(spec))
                        if not self.accept(","):
                            break
                    self.expect(")")
                    return A.ECall(t.text, targs, args, span=t.span)
            return A.EVar(t.text, span=t.span)
        self.error("expected an expression",
                   {"ident", "int", "true", "false", "(", "|", "if", "old", "result"})


def _struct_name(t: A.Type, span: Span) -> str:
    if isinstance(t, A.TStruct) and not t.args:
        return t.name
    raise ParseError(f"expected a resource struct name, got {t}", span)


def parse_module(source: str, file: str = "<input>") -> A.ModuleAst:
    """Parse MiniMove source text into a raw module AST.

    Raises ParseError with line/column and the expected-token set on failure.
    """
    return Parser(tokenize(source), file).parse_module()

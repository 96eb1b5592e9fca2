"""Pretty-printer producing parseable MiniMove text from an AST.

Used for the parse/print round-trip property and for splicing `[inferred]`
spec clauses back into source form.
"""

from __future__ import annotations

from . import ast_nodes as A

_PREC = {
    "==>": 1, "<==>": 1, "||": 2, "&&": 3,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6,
}


def pretty_type(t: A.Type) -> str:
    return str(t)


def pretty_expr(e: A.Expr, prec: int = 0) -> str:
    s, p = _expr(e)
    if p < prec:
        return f"({s})"
    return s


def _expr(e: A.Expr):
    """Returns (text, precedence); precedence 9 means atomic."""
    if isinstance(e, A.EInt):
        return str(e.value), 9
    if isinstance(e, A.EBool):
        return ("true" if e.value else "false"), 9
    if isinstance(e, A.EConst):
        return e.name, 9
    if isinstance(e, A.EVar):
        return e.name, 9
    if isinstance(e, A.EField):
        return f"{pretty_expr(e.base, 8)}.{e.fname}", 8
    if isinstance(e, A.EIndex):
        return f"{pretty_expr(e.base, 8)}[{pretty_expr(e.index)}]", 8
    if isinstance(e, A.EGlobal):
        return f"{e.resource}[{pretty_expr(e.addr)}]", 8
    if isinstance(e, A.EVecLen):
        if e.method_style:
            return f"{pretty_expr(e.base, 8)}.length()", 8
        return f"len({pretty_expr(e.base)})", 9
    if isinstance(e, A.ECall):
        targs = f"<{', '.join(map(str, e.type_args))}>" if e.type_args else ""
        return f"{e.fname}{targs}({', '.join(pretty_expr(a) for a in e.args)})", 8
    if isinstance(e, A.EInvoke):
        return f"{pretty_expr(e.callee, 9)}({', '.join(pretty_expr(a) for a in e.args)})", 8
    if isinstance(e, A.ELambda):
        body = pretty_expr(e.body)
        s = f"|{', '.join(e.params)}| {body}"
        if e.spec is not None:
            s += " spec " + _spec_block(e.spec, indent="  ", inline=True)
        return s, 0
    if isinstance(e, A.EFunValue):
        return e.fname, 9
    if isinstance(e, A.EBinop):
        p = _PREC[e.op]
        lhs = pretty_expr(e.lhs, p)
        rhs = pretty_expr(e.rhs, p + 1 if e.op not in ("==>", "<==>") else p)
        return f"{lhs} {e.op} {rhs}", p
    if isinstance(e, A.EUnop):
        return f"{e.op}{pretty_expr(e.arg, 7)}", 7
    if isinstance(e, A.EBorrow):
        return ("&mut " if e.mut else "&") + pretty_expr(e.target, 7), 7
    if isinstance(e, A.ECast):
        return f"{pretty_expr(e.arg, 7)} as {e.to}", 6
    if isinstance(e, A.EIf):
        s = f"if ({pretty_expr(e.cond)}) {pretty_expr(e.then, 1)}"
        if e.els is not None:
            s += f" else {pretty_expr(e.els, 1)}"
        return s, 0
    if isinstance(e, A.EBlock):
        return _block(e, "  "), 9
    if isinstance(e, A.EPack):
        if e.enum_variant is not None:
            return f"{e.sname}::{e.enum_variant}({pretty_expr(e.fields[0][1])})", 8
        fs = ", ".join(f"{n}: {pretty_expr(v)}" for n, v in e.fields)
        return f"{e.sname} {{ {fs} }}", 9
    if isinstance(e, A.EMoveTo):
        return f"move_to<{e.resource}>({pretty_expr(e.addr)}, {pretty_expr(e.value)})", 8
    if isinstance(e, A.EMoveFrom):
        return f"move_from<{e.resource}>({pretty_expr(e.addr)})", 8
    if isinstance(e, A.EExistsGlobal):
        return f"exists<{e.resource}>({pretty_expr(e.addr)})", 8
    if isinstance(e, A.EOld):
        return f"old({pretty_expr(e.arg)})", 9
    if isinstance(e, A.EResult):
        return "result", 9
    if isinstance(e, A.EBehavioral):
        return f"{e.kind}<{pretty_expr(e.target)}>({', '.join(pretty_expr(a) for a in e.args)})", 8
    if isinstance(e, A.ELabeled):
        return f"{e.range} |~ {pretty_expr(e.body)}", 0
    if isinstance(e, A.EQuant):
        bs = ", ".join(_binder(b) for b in e.binders)
        return f"{e.quant} {bs}: {pretty_expr(e.body)}", 0
    raise TypeError(f"cannot print {type(e).__name__}")


def _binder(b: A.Binder) -> str:
    if b.kind == "label":
        return f"{b.name} in *"
    if b.kind == "range":
        return f"{b.name} in {pretty_expr(b.lo)}..{pretty_expr(b.hi)}"
    return f"{b.name}: {b.btype}"


def _stmt(s: A.Stmt, ind: str) -> str:
    if isinstance(s, A.SLet):
        ty = f": {s.ty}" if s.ty else ""
        return f"{ind}let {s.name}{ty} = {pretty_expr(s.value)};"
    if isinstance(s, A.SAssign):
        return f"{ind}{pretty_expr(s.lvalue)} {s.op} {pretty_expr(s.value)};"
    if isinstance(s, A.SExpr):
        return f"{ind}{pretty_expr(s.value)};"
    if isinstance(s, A.SReturn):
        return f"{ind}return{' ' + pretty_expr(s.value) if s.value else ''};"
    if isinstance(s, A.SAbort):
        return f"{ind}abort {pretty_expr(s.code)};"
    if isinstance(s, A.SIf):
        out = f"{ind}if ({pretty_expr(s.cond)}) {{\n"
        out += "\n".join(_stmt(x, ind + "  ") for x in s.then)
        out += f"\n{ind}}}"
        if s.els is not None:
            out += " else {\n" + "\n".join(_stmt(x, ind + "  ") for x in s.els) + f"\n{ind}}}"
        return out
    if isinstance(s, A.SWhile):
        out = f"{ind}while ({pretty_expr(s.cond)}) {{\n"
        out += "\n".join(_stmt(x, ind + "  ") for x in s.body)
        out += f"\n{ind}}}"
        if s.invariants:
            out += " spec {\n"
            for c in s.invariants:
                out += f"{ind}  invariant {pretty_expr(c.expr)};\n"
            out += f"{ind}}}"
        return out + ";"
    raise TypeError(f"cannot print {type(s).__name__}")


def _block(b: A.EBlock, ind: str) -> str:
    lines = [_stmt(s, ind) for s in b.stmts]
    if b.tail is not None:
        lines.append(f"{ind}{pretty_expr(b.tail)}")
    inner = "\n".join(lines)
    outer = ind[:-2]
    return "{\n" + inner + f"\n{outer}}}" if inner else "{ }"


def _spec_block(blk: A.SpecBlock, indent: str, inline: bool = False) -> str:
    lines = []
    for p in sorted(blk.pragmas):
        lines.append(f"pragma {p};")
    for rd in blk.reads_of:
        rs = "*" if rd.resources is None else ", ".join(rd.resources)
        lines.append(f"reads_of<{pretty_expr(rd.target)}> {rs};")
    for md in blk.modifies_of:
        ps = f"({', '.join(f'{n}: {t}' for n, t in md.params)})" if md.params else ""
        locs = "*" if md.locations is None else ", ".join(
            f"{r}[{pretty_expr(a)}]" for r, a in md.locations)
        lines.append(f"modifies_of<{pretty_expr(md.target)}>{ps} {locs};")
    for md in blk.modifies:
        lines.append(f"modifies {md.resource}[{pretty_expr(md.addr)}];")
    for c in blk.clauses:
        tag = "[inferred] " if c.inferred else ""
        lines.append(f"{c.kind} {tag}{pretty_expr(c.expr)};")
    if inline:
        return "{ " + " ".join(lines) + " }"
    body = "\n".join(indent + "  " + ln for ln in lines)
    return "{\n" + body + f"\n{indent}}}"


def pretty_module(m: A.ModuleAst) -> str:
    out = [f"module {m.name} {{"]
    ind = "  "
    for s in m.structs:
        abis = (" has " + ", ".join(a for a in A.ABILITIES if a in s.abilities)) if s.abilities else ""
        if s.positional:
            tys = ", ".join(str(f.ty) for f in s.fields)
            out.append(f"{ind}struct {s.name}({tys}){abis};")
        else:
            out.append(f"{ind}struct {s.name}{abis} {{")
            for f in s.fields:
                out.append(f"{ind}  {f.name}: {f.ty},")
            out.append(f"{ind}}}")
        if s.spec is not None:
            out.append(f"{ind}spec {s.name} " + _spec_block(s.spec, ind))
    for en in m.enums:
        abis = (" has " + ", ".join(a for a in A.ABILITIES if a in en.abilities)) if en.abilities else ""
        out.append(f"{ind}enum {en.name}{abis} {{")
        for vn, vt in en.variants:
            out.append(f"{ind}  {vn}({vt}),")
        out.append(f"{ind}}}")
    for sf in m.spec_functions:
        tps = f"<{', '.join(sf.type_params)}>" if sf.type_params else ""
        ps = ", ".join(f"{n}: {t}" for n, t in sf.params)
        out.append(f"{ind}spec fun {sf.name}{tps}({ps}): {sf.result} {{")
        out.append(f"{ind}  {pretty_expr(sf.body)}")
        out.append(f"{ind}}}")
    for f in m.functions:
        tps = f"<{', '.join(f.type_params)}>" if f.type_params else ""
        ps = ", ".join(f"{n}: {t}" for n, t in f.params)
        res = f": {f.results[0]}" if f.results else ""
        if f.body is None:
            sig_ps = ps
            if f.spec is not None:
                out.append(f"{ind}spec {f.name}({sig_ps}) " + _spec_block(f.spec, ind))
            continue
        body = _block(f.body, ind + "  ")
        out.append(f"{ind}fun {f.name}{tps}({ps}){res} {body}")
        if f.spec is not None:
            out.append(f"{ind}spec {f.name} " + _spec_block(f.spec, ind))
    for o in m.orphan_specs:
        ps = f"({', '.join(f'{n}: {t}' for n, t in o.params)})" if o.params is not None else ""
        out.append(f"{ind}spec {o.name}{ps} " + _spec_block(o.block, ind))
    out.append("}")
    return "\n".join(out) + "\n"

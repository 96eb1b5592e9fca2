"""MiniMove prover: a desk-scale verifier for an imperative language with
first-class, state-mutating function values.

Pipeline: frontend (parse/resolve) -> typeck -> model (monomorphize, lower,
variant/access analysis) -> ivl (verification-condition emission) -> smt
(solver driver) plus spec inference (infer) and a bounded concrete
interpreter used as a differential oracle (oracle).
"""

__version__ = "0.1.0"

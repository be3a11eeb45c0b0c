"""Problem templates and program transforms for corpus synthesis.

Twelve parametrized templates produce the base programs; per-problem integer
constants make same-template problems behaviorally distinct while keeping
them nearly identical as text.  Every template ends in a shared bucketed
print cascade and contains at least one input-dependent branch so fuzzing
yields informative suites.  Variant transforms (renaming, loop restructuring,
algebraic rewrites, dead code) are semantics-preserving by construction;
mutant transforms (off-by-one, operator swap) are meant to change behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

from .minilang import KEYWORDS, Node

# ---------------------------------------------------------------------------
# AST construction helpers
# ---------------------------------------------------------------------------


def _iv(v):
    return Node("int-literal", (), v)


def _var(name):
    return Node("var", (), name)


def _bin(op, a, b):
    return Node("binop", (a, b), op)


def _assign(name, expr):
    return Node("assign", (expr,), name)


def _read(name):
    return Node("assign", (Node("read"),), name)


def _print(expr):
    return Node("print", (expr,))


def _block(*stmts):
    return Node("program", tuple(stmts))


def _if(test, then, orelse=None):
    if orelse is None:
        return Node("if", (test, then))
    return Node("if", (test, then, orelse))


def _while(test, body):
    return Node("while", (test, body))


def _neg(name):
    # MiniLang has no unary minus; negation is written `0 - x`.
    return _bin("-", _iv(0), _var(name))


def _abs_clamp(name, modulus):
    """`x = x % m ; if (x < 0) { x = 0 - x ; }` -- bounds loop ranges."""
    return [
        _assign(name, _bin("%", _var(name), _iv(modulus))),
        _if(_bin("<", _var(name), _iv(0)), _block(_assign(name, _neg(name)))),
    ]


def _trailer(name, t1, t2, k):
    """Bucketed print: behavior differs per (t1, t2, k) problem constants."""
    return _if(
        _bin("<", _var(name), _iv(t1)),
        _block(_print(_bin("+", _var(name), _iv(k)))),
        _block(
            _if(
                _bin("<", _var(name), _iv(t2)),
                _block(_print(_bin("-", _iv(k), _var(name)))),
                _block(_print(_bin("+", _bin("%", _var(name), _iv(997)), _iv(k)))),
            )
        ),
    )


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Template:
    name: str
    params: tuple  # tuple of parameter tuples, one per problem instance
    build: object  # params tuple -> program Node


def _t_sum(p):
    c, t1, t2, k = p
    return _block(
        _read("a"),
        _read("b"),
        _if(
            _bin(">", _var("a"), _var("b")),
            _block(_assign("t", _var("a")), _assign("a", _var("b")), _assign("b", _var("t"))),
        ),
        _assign("s", _bin("+", _bin("+", _var("a"), _var("b")), _iv(c))),
        _trailer("s", t1, t2, k),
    )


def _t_max(p):
    c, t1, t2, k = p
    return _block(
        _read("a"),
        _read("b"),
        _if(
            _bin(">", _var("a"), _var("b")),
            _block(_assign("m", _var("a"))),
            _block(_assign("m", _var("b"))),
        ),
        _assign("m", _bin("+", _var("m"), _iv(c))),
        _trailer("m", t1, t2, k),
    )


def _t_min(p):
    c, t1, t2, k = p
    return _block(
        _read("a"),
        _read("b"),
        _if(
            _bin("<", _var("a"), _var("b")),
            _block(_assign("m", _var("a"))),
            _block(_assign("m", _var("b"))),
        ),
        _assign("m", _bin("+", _var("m"), _iv(c))),
        _trailer("m", t1, t2, k),
    )


def _t_gcd(p):
    c, t1, t2, k = p
    return _block(
        _read("a"),
        _read("b"),
        _while(
            _bin("!=", _var("b"), _iv(0)),
            _block(
                _assign("t", _bin("%", _var("a"), _var("b"))),
                _assign("a", _var("b")),
                _assign("b", _var("t")),
            ),
        ),
        _assign("g", _bin("+", _var("a"), _iv(c))),
        _trailer("g", t1, t2, k),
    )


def _t_fibonacci(p):
    m, s0, s1, t1, t2, k = p
    return _block(
        _read("n"),
        *_abs_clamp("n", m),
        _assign("a", _iv(s0)),
        _assign("b", _iv(s1)),
        _assign("i", _iv(0)),
        _while(
            _bin("<", _var("i"), _var("n")),
            _block(
                _assign("t", _bin("+", _var("a"), _var("b"))),
                _assign("a", _var("b")),
                _assign("b", _var("t")),
                _assign("i", _bin("+", _var("i"), _iv(1))),
            ),
        ),
        _trailer("a", t1, t2, k),
    )


def _t_count_evens(p):
    d, m, t1, t2, k = p
    return _block(
        _read("n"),
        *_abs_clamp("n", m),
        _assign("c", _iv(0)),
        _assign("i", _iv(0)),
        _while(
            _bin("<", _var("i"), _var("n")),
            _block(
                _read("v"),
                _if(
                    _bin("==", _bin("%", _var("v"), _iv(d)), _iv(0)),
                    _block(_assign("c", _bin("+", _var("c"), _iv(1)))),
                ),
                _assign("i", _bin("+", _var("i"), _iv(1))),
            ),
        ),
        _trailer("c", t1, t2, k),
    )


def _t_digit_sum(p):
    base, c, t1, t2, k = p
    return _block(
        _read("n"),
        _assign("s", _iv(c)),
        _while(
            _bin("!=", _var("n"), _iv(0)),
            _block(
                _assign("s", _bin("+", _var("s"), _bin("%", _var("n"), _iv(base)))),
                _assign("n", _bin("/", _var("n"), _iv(base))),
            ),
        ),
        _trailer("s", t1, t2, k),
    )


def _t_power(p):
    e, m, t1, t2, k = p
    return _block(
        _read("x"),
        *_abs_clamp("x", m),
        _assign("r", _iv(1)),
        _assign("i", _iv(0)),
        _while(
            _bin("<", _var("i"), _iv(e)),
            _block(
                _assign("r", _bin("*", _var("r"), _var("x"))),
                _assign("i", _bin("+", _var("i"), _iv(1))),
            ),
        ),
        _trailer("r", t1, t2, k),
    )


def _t_reverse_digits(p):
    c, t1, t2, k = p
    return _block(
        _read("n"),
        _assign("r", _iv(c)),
        _while(
            _bin("!=", _var("n"), _iv(0)),
            _block(
                _assign("r", _bin("+", _bin("*", _var("r"), _iv(10)), _bin("%", _var("n"), _iv(10)))),
                _assign("n", _bin("/", _var("n"), _iv(10))),
            ),
        ),
        _trailer("r", t1, t2, k),
    )


def _t_sorted_check(p):
    strict, w, t1, t2, k = p
    cmp_op = "<=" if strict else "<"
    return _block(
        _read("n"),
        *_abs_clamp("n", 5),
        _assign("ok", _iv(1)),
        _assign("prev", _iv(0)),
        _assign("i", _iv(0)),
        _while(
            _bin("<", _var("i"), _var("n")),
            _block(
                _read("cur"),
                _if(
                    _bin(">", _var("i"), _iv(0)),
                    _block(
                        _if(
                            _bin(cmp_op, _var("cur"), _var("prev")),
                            _block(_assign("ok", _iv(0))),
                        )
                    ),
                ),
                _assign("prev", _var("cur")),
                _assign("i", _bin("+", _var("i"), _iv(1))),
            ),
        ),
        _assign("ok", _bin("+", _bin("*", _var("ok"), _iv(w)), _var("n"))),
        _trailer("ok", t1, t2, k),
    )


def _t_triangular(p):
    m, w, t1, t2, k = p
    return _block(
        _read("n"),
        *_abs_clamp("n", m),
        _assign("s", _iv(0)),
        _assign("i", _iv(1)),
        _while(
            _bin("<=", _var("i"), _var("n")),
            _block(
                _assign("s", _bin("+", _var("s"), _bin("*", _var("i"), _iv(w)))),
                _assign("i", _bin("+", _var("i"), _iv(1))),
            ),
        ),
        _trailer("s", t1, t2, k),
    )


def _t_collatz(p):
    m, c, t1, t2, k = p
    return _block(
        _read("n"),
        _assign("n", _bin("%", _var("n"), _iv(m))),
        _if(_bin("<", _var("n"), _iv(1)), _block(_assign("n", _iv(1)))),
        _assign("steps", _iv(c)),
        _while(
            _bin("!=", _var("n"), _iv(1)),
            _block(
                _if(
                    _bin("==", _bin("%", _var("n"), _iv(2)), _iv(0)),
                    _block(_assign("n", _bin("/", _var("n"), _iv(2)))),
                    _block(_assign("n", _bin("+", _bin("*", _iv(3), _var("n")), _iv(1)))),
                ),
                _assign("steps", _bin("+", _var("steps"), _iv(1))),
            ),
        ),
        _trailer("steps", t1, t2, k),
    )


TEMPLATES = (
    Template("sum", ((0, 8, 60, 1), (3, 5, 44, 2), (5, 12, 90, 3), (9, 0, 75, 4), (2, 20, 55, 5), (7, 3, 33, 6)), _t_sum),
    Template("max", ((0, 7, 50, 2), (4, 10, 64, 3), (6, 2, 39, 5), (1, 15, 81, 7), (8, 5, 47, 1), (3, 9, 70, 4)), _t_max),
    Template("min", ((0, 6, 52, 3), (5, 11, 68, 2), (2, 4, 41, 6), (7, 14, 77, 1), (9, 1, 36, 5), (4, 8, 59, 7)), _t_min),
    Template("gcd", ((0, 9, 66, 2), (3, 4, 48, 4), (6, 13, 72, 1), (1, 7, 38, 6), (8, 2, 84, 3), (5, 16, 57, 5)), _t_gcd),
    Template(
        "fibonacci",
        ((24, 0, 1, 10, 60, 2), (28, 1, 1, 6, 45, 3), (31, 2, 1, 13, 80, 1), (26, 1, 2, 4, 52, 5), (22, 0, 2, 17, 69, 4), (30, 3, 1, 8, 40, 6)),
        _t_fibonacci,
    ),
    Template(
        "count_evens",
        ((2, 7, 2, 10, 1), (3, 7, 1, 8, 2), (4, 6, 3, 12, 3), (5, 7, 2, 9, 4), (2, 5, 4, 11, 5), (3, 6, 1, 7, 6)),
        _t_count_evens,
    ),
    Template(
        "digit_sum",
        ((10, 0, 9, 55, 1), (2, 0, 5, 40, 2), (7, 1, 12, 63, 3), (3, 2, 7, 48, 4), (10, 3, 15, 70, 5), (5, 1, 3, 35, 6)),
        _t_digit_sum,
    ),
    Template(
        "power",
        ((2, 50, 18, 90, 1), (3, 30, 9, 64, 2), (4, 20, 26, 85, 3), (5, 12, 5, 49, 4), (2, 80, 13, 75, 5), (3, 40, 2, 58, 6)),
        _t_power,
    ),
    Template(
        "reverse_digits",
        ((0, 11, 67, 2), (1, 6, 51, 3), (2, 16, 79, 1), (3, 3, 42, 5), (4, 9, 61, 4), (5, 14, 73, 6)),
        _t_reverse_digits,
    ),
    Template(
        "sorted_check",
        ((0, 10, 4, 16, 1), (1, 10, 3, 14, 2), (0, 20, 6, 25, 3), (1, 20, 2, 22, 4), (0, 15, 5, 19, 5), (1, 15, 1, 17, 6)),
        _t_sorted_check,
    ),
    Template(
        "triangular",
        ((40, 1, 20, 300, 1), (60, 2, 35, 500, 2), (80, 1, 15, 420, 3), (50, 3, 28, 350, 4), (70, 2, 10, 480, 5), (45, 1, 40, 260, 6)),
        _t_triangular,
    ),
    Template(
        "collatz",
        ((97, 0, 12, 60, 1), (193, 1, 8, 45, 2), (389, 0, 20, 75, 3), (997, 2, 5, 38, 4), (149, 1, 16, 66, 5), (251, 0, 25, 52, 6)),
        _t_collatz,
    ),
)

TEMPLATE_NAMES = tuple(t.name for t in TEMPLATES)


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------


def _contains_read(node):
    return node.kind == "read" or any(_contains_read(c) for c in node.children)


def collect_names(node, names=None):
    """Identifiers in first-appearance order (assign targets and var refs)."""
    if names is None:
        names = []
    if node.kind in ("assign", "var") and node.payload not in names:
        names.append(node.payload)
    for child in node.children:
        collect_names(child, names)
    return names


def _count_whiles(node):
    return (node.kind == "while") + sum(_count_whiles(c) for c in node.children)


def has_while(ast):
    return _count_whiles(ast) > 0


# ---------------------------------------------------------------------------
# Semantics-preserving transforms
# ---------------------------------------------------------------------------

_NAME_POOL = (
    "n", "m", "p", "q", "r", "s", "u", "v", "w", "y", "z",
    "acc", "tmp", "cnt", "idx", "val", "tot", "res", "cur", "lim",
    "pos", "num", "ans", "lo", "hi", "mid", "len", "sum1", "aux", "reg",
)


def rename_variables(ast, rng):
    """Consistent program-wide renaming drawn from a neutral name pool."""
    old = collect_names(ast)
    fresh = [x for x in _NAME_POOL if x not in KEYWORDS]
    order = rng.permutation(len(fresh))
    mapping = {}
    picked = 0
    for name in old:
        while picked < len(order) and fresh[order[picked]] in old:
            picked += 1  # avoid swapping two existing names into collision
        if picked >= len(order):
            break
        mapping[name] = fresh[order[picked]]
        picked += 1

    def rewrite(node):
        payload = node.payload
        if node.kind in ("assign", "var"):
            payload = mapping.get(payload, payload)
        return Node(node.kind, tuple(rewrite(c) for c in node.children), payload)

    return rewrite(ast)


def _structurally_equal(a, b):
    return a == b


def _applicable_rewrites(node):
    """Names of algebraic rewrites valid at this expression node."""
    out = []
    if node.kind != "binop":
        if node.kind in ("var", "int-literal"):
            out.extend(["plus_zero", "times_one"])
        return out
    op = node.payload
    pure = not _contains_read(node)
    if op in ("+", "*", "==", "!=") and pure:
        out.append("commute")
    if op in ("<", ">", "<=", ">=") and pure:
        out.append("flip")
    if op == "+" and pure and _structurally_equal(node.children[0], node.children[1]):
        out.append("double")
    if op == "*" and node.children[0] == _iv(2) and pure:
        out.append("undouble")
    out.extend(["plus_zero", "times_one"])
    return out


_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


def _apply_rewrite(node, name):
    if name == "commute":
        return Node("binop", (node.children[1], node.children[0]), node.payload)
    if name == "flip":
        return Node("binop", (node.children[1], node.children[0]), _FLIP[node.payload])
    if name == "double":
        return _bin("*", _iv(2), node.children[0])
    if name == "undouble":
        return _bin("+", node.children[1], node.children[1])
    if name == "plus_zero":
        return _bin("+", node, _iv(0))
    if name == "times_one":
        return _bin("*", node, _iv(1))
    raise ValueError(name)


def _expr_sites(node, path=(), in_expr=False):
    """All (path, node) pairs for expression positions in the tree."""
    sites = []
    is_expr = in_expr or node.kind in ("binop", "var", "int-literal")
    if node.kind in ("binop", "var", "int-literal"):
        sites.append((path, node))
    for i, child in enumerate(node.children):
        if node.kind in ("if", "while") and i == 0:
            sites.extend(_expr_sites(child, path + (i,), True))
        elif node.kind in ("assign", "print"):
            sites.extend(_expr_sites(child, path + (i,), True))
        elif is_expr:
            sites.extend(_expr_sites(child, path + (i,), True))
        else:
            sites.extend(_expr_sites(child, path + (i,), False))
    return sites


def _replace_at(node, path, replacement):
    if not path:
        return replacement
    children = list(node.children)
    children[path[0]] = _replace_at(children[path[0]], path[1:], replacement)
    return Node(node.kind, tuple(children), node.payload)


def algebraic_rewrite(ast, rng, max_sites=3):
    """Apply 1..max_sites wrapping-safe identities at random sites."""
    n_sites = int(rng.integers(1, max_sites + 1))
    result = ast
    applied = 0
    for _ in range(n_sites):
        sites = [(p, n, _applicable_rewrites(n)) for p, n in _expr_sites(result)]
        sites = [(p, n, r) for p, n, r in sites if r]
        if not sites:
            break
        path, node, rewrites = sites[int(rng.integers(0, len(sites)))]
        rewrite = rewrites[int(rng.integers(0, len(rewrites)))]
        result = _replace_at(result, path, _apply_rewrite(node, rewrite))
        applied += 1
    if applied == 0:
        raise ValueError("no eligible rewrite site")
    return result


def _block_slots(node, path=()):
    """(path, n_statements) for every statement-block node."""
    slots = []
    if node.kind == "program":
        slots.append((path, len(node.children)))
    for i, child in enumerate(node.children):
        slots.extend(_block_slots(child, path + (i,)))
    return slots


def _insert_stmt(node, path, index, stmt):
    if not path:
        children = list(node.children)
        children.insert(index, stmt)
        return Node(node.kind, tuple(children), node.payload)
    children = list(node.children)
    children[path[0]] = _insert_stmt(children[path[0]], path[1:], index, stmt)
    return Node(node.kind, tuple(children), node.payload)


def dead_code_insert(ast, rng, max_stmts=3):
    """Insert assignments to fresh never-read variables, or unreachable ifs."""
    used = set(collect_names(ast))
    result = ast
    n_stmts = int(rng.integers(1, max_stmts + 1))
    fresh_idx = 0
    for _ in range(n_stmts):
        while f"dc{fresh_idx}" in used:
            fresh_idx += 1
        name = f"dc{fresh_idx}"
        used.add(name)
        fresh_idx += 1
        value = _bin("+", _iv(int(rng.integers(0, 9))), _iv(int(rng.integers(0, 9))))
        if rng.integers(0, 3) == 0:
            stmt = _if(_bin(">", _iv(0), _iv(1)), _block(_assign(name, value)))
        else:
            stmt = _assign(name, value)
        slots = _block_slots(result)
        path, size = slots[int(rng.integers(0, len(slots)))]
        result = _insert_stmt(result, path, int(rng.integers(0, size + 1)), stmt)
    return result


def _while_paths(node, path=()):
    found = [path] if node.kind == "while" else []
    for i, child in enumerate(node.children):
        found.extend(_while_paths(child, path + (i,)))
    return found


def loop_restructure(ast, rng):
    """Rewrite one while loop: peel the first iteration, or guard by a flag."""
    paths = _while_paths(ast)
    if not paths:
        raise ValueError("program has no while loop")
    path = paths[int(rng.integers(0, len(paths)))]

    target = ast
    for i in path:
        target = target.children[i]
    test, body = target.children
    if _contains_read(test):
        raise ValueError("loop test reads input; restructuring unsafe")

    if rng.integers(0, 2) == 0:
        # Peel: while (t) { B }  ==  if (t) { B ; while (t) { B } }
        replacement = _if(test, Node("program", body.children + (target,)))
        return _replace_at(ast, path, replacement)

    # Flag guard: go = 1 ; while (go) { if (t) { B } else { go = 0 ; } }
    used = set(collect_names(ast))
    flag = "go"
    n = 0
    while flag in used:
        n += 1
        flag = f"go{n}"
    guarded = _while(
        _var(flag),
        _block(_if(test, body, _block(_assign(flag, _iv(0))))),
    )
    block = _block(_assign(flag, _iv(1)), guarded)
    # Splice the two statements in place of the while.
    parent = ast
    for i in path[:-1]:
        parent = parent.children[i]
    idx = path[-1]
    children = parent.children[:idx] + block.children + parent.children[idx + 1 :]
    new_parent = Node(parent.kind, children, parent.payload)
    return _replace_at(ast, path[:-1], new_parent)


# ---------------------------------------------------------------------------
# Behavior-changing mutations
# ---------------------------------------------------------------------------

_OP_SWAP = {
    "+": "-", "-": "+", "*": "+", "/": "%", "%": "/",
    "<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "!=", "!=": "==",
}


def _literal_paths(node, path=()):
    found = [path] if node.kind == "int-literal" else []
    for i, child in enumerate(node.children):
        found.extend(_literal_paths(child, path + (i,)))
    return found


def _relop_paths(node, path=()):
    found = [path] if node.kind == "binop" and node.payload in ("<", ">", "<=", ">=") else []
    for i, child in enumerate(node.children):
        found.extend(_relop_paths(child, path + (i,)))
    return found


def _binop_paths(node, path=()):
    found = [path] if node.kind == "binop" else []
    for i, child in enumerate(node.children):
        found.extend(_binop_paths(child, path + (i,)))
    return found


_REL_OFF_BY_ONE = {"<": "<=", "<=": "<", ">": ">=", ">=": ">"}


def mutate_off_by_one(ast, rng):
    """Shift an integer literal by one, or relax/tighten a comparison."""
    literals = _literal_paths(ast)
    relops = _relop_paths(ast)
    pick = int(rng.integers(0, len(literals) + len(relops)))
    if pick < len(literals):
        path = literals[pick]
        node = ast
        for i in path:
            node = node.children[i]
        value = node.payload
        delta = 1 if value == 0 or rng.integers(0, 2) == 0 else -1
        return _replace_at(ast, path, _iv(value + delta))
    path = relops[pick - len(literals)]
    node = ast
    for i in path:
        node = node.children[i]
    swapped = Node("binop", node.children, _REL_OFF_BY_ONE[node.payload])
    return _replace_at(ast, path, swapped)


def mutate_op_swap(ast, rng):
    """Swap one binary operator for its counterpart."""
    paths = _binop_paths(ast)
    path = paths[int(rng.integers(0, len(paths)))]
    node = ast
    for i in path:
        node = node.children[i]
    return _replace_at(ast, path, Node("binop", node.children, _OP_SWAP[node.payload]))

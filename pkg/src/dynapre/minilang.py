"""MiniLang: a deterministic toy language with an instrumented interpreter.

The language covers integer variables, `read()` input, `print()` output,
`if`/`else`, `while`, and eleven binary operators over 64-bit signed wrapping
integers.  Execution is fully deterministic, reports branch-edge coverage,
and never raises for program-level failures: hangs, exhausted input, and
division by zero are encoded as statuses.  See docs/minilang.md for the
grammar and the exact arithmetic semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

INT_BITS = 64
INT_MIN = -(1 << (INT_BITS - 1))
INT_MAX = (1 << (INT_BITS - 1)) - 1
_WRAP_MASK = (1 << INT_BITS) - 1

DEFAULT_STEP_LIMIT = 100_000

BINOPS = ("+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=")
KEYWORDS = frozenset({"if", "else", "while", "read", "print"})

STATUS_OK = "OK"
STATUS_STEP_LIMIT = "STEP_LIMIT"
STATUS_INPUT_EXHAUSTED = "INPUT_EXHAUSTED"
STATUS_DIV_BY_ZERO = "DIV_BY_ZERO"
STATUSES = (STATUS_OK, STATUS_STEP_LIMIT, STATUS_INPUT_EXHAUSTED, STATUS_DIV_BY_ZERO)


class ParseError(ValueError):
    """Malformed source; carries 1-based line and column."""

    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


def wrap_int(v):
    """Reduce an arbitrary integer to two's-complement 64-bit."""
    v &= _WRAP_MASK
    return v - (1 << INT_BITS) if v > INT_MAX else v


@dataclass(frozen=True)
class Node:
    """One AST node.

    kind is one of {program, assign, if, while, read, print, binop, var,
    int-literal}.  `program` doubles as the statement-block container, so an
    `if` node has exactly (test, then-block) or (test, then-block, else-block)
    children.  payload holds the operator symbol (binop), identifier
    (assign/var), or integer value (int-literal).
    """

    kind: str
    children: tuple = ()
    payload: object = None


@dataclass
class Program:
    """Parsed program plus its static branch metadata.

    branch_count is 2x the number of `if`/`while` tests; edge ids are
    assigned in AST pre-order: test k owns true-edge 2k and false-edge 2k+1.
    """

    source: str
    ast: Node
    branch_count: int
    _compiled: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ExecOutcome:
    status: str
    output: str
    steps: int
    covered_edges: frozenset


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT_SINGLE = set("(){};%*/+-")


def _lex(source):
    """Produce (text, line, col) tokens; raises ParseError on bad chars."""
    toks = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            if int(text) > INT_MAX:
                raise ParseError(f"integer literal {text} out of range", line, start_col)
            toks.append((text, line, start_col))
            col += j - i
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append((source[i:j], line, start_col))
            col += j - i
            i = j
        elif ch in "<>=!" :
            if i + 1 < n and source[i + 1] == "=":
                toks.append((source[i : i + 2], line, start_col))
                i += 2
                col += 2
            elif ch in "<>=":
                toks.append((ch, line, start_col))
                i += 1
                col += 1
            else:
                raise ParseError("stray '!'", line, start_col)
        elif ch in _PUNCT_SINGLE:
            toks.append((ch, line, start_col))
            i += 1
            col += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", line, start_col)
    toks.append(("<eof>", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser (recursive descent)
# ---------------------------------------------------------------------------

# Binary operators by ascending precedence tier; all left-associative.
_PRECEDENCE_TIERS = (("==", "!="), ("<", ">", "<=", ">="), ("+", "-"), ("*", "/", "%"))


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos][0]

    def advance(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, message):
        _, line, col = self.toks[self.pos]
        raise ParseError(message, line, col)

    def expect(self, text):
        if self.peek() != text:
            self.fail(f"expected {text!r}, found {self.peek()!r}")
        return self.advance()

    def parse_program(self):
        stmts = []
        while self.peek() != "<eof>":
            stmts.append(self.parse_stmt())
        return Node("program", tuple(stmts))

    def parse_block(self):
        self.expect("{")
        stmts = []
        while self.peek() != "}":
            if self.peek() == "<eof>":
                self.fail("unterminated block")
            stmts.append(self.parse_stmt())
        self.expect("}")
        return Node("program", tuple(stmts))

    def parse_stmt(self):
        tok = self.peek()
        if tok == "if":
            self.advance()
            self.expect("(")
            test = self.parse_expr()
            self.expect(")")
            then = self.parse_block()
            if self.peek() == "else":
                self.advance()
                return Node("if", (test, then, self.parse_block()))
            return Node("if", (test, then))
        if tok == "while":
            self.advance()
            self.expect("(")
            test = self.parse_expr()
            self.expect(")")
            return Node("while", (test, self.parse_block()))
        if tok == "print":
            self.advance()
            self.expect("(")
            expr = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return Node("print", (expr,))
        if tok and (tok[0].isalpha() or tok[0] == "_") and tok not in KEYWORDS:
            name = self.advance()[0]
            self.expect("=")
            expr = self.parse_expr()
            self.expect(";")
            return Node("assign", (expr,), name)
        self.fail(f"expected a statement, found {tok!r}")

    def parse_expr(self, tier=0):
        if tier == len(_PRECEDENCE_TIERS):
            return self.parse_primary()
        ops = _PRECEDENCE_TIERS[tier]
        node = self.parse_expr(tier + 1)
        while self.peek() in ops:
            op = self.advance()[0]
            rhs = self.parse_expr(tier + 1)
            node = Node("binop", (node, rhs), op)
        return node

    def parse_primary(self):
        tok = self.peek()
        if tok == "(":
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if tok == "read":
            self.advance()
            self.expect("(")
            self.expect(")")
            return Node("read")
        if tok.isdigit():
            return Node("int-literal", (), int(self.advance()[0]))
        if tok and (tok[0].isalpha() or tok[0] == "_") and tok not in KEYWORDS:
            return Node("var", (), self.advance()[0])
        self.fail(f"expected an expression, found {tok!r}")


def count_branches(node):
    """Number of if/while tests in pre-order (branch_count is twice this)."""
    total = 1 if node.kind in ("if", "while") else 0
    return total + sum(count_branches(c) for c in node.children)


def parse(source):
    parser = _Parser(_lex(source))
    ast = parser.parse_program()
    return Program(source, ast, 2 * count_branches(ast))


# ---------------------------------------------------------------------------
# Serializers
# ---------------------------------------------------------------------------

_TIER_OF_OP = {op: t for t, ops in enumerate(_PRECEDENCE_TIERS) for op in ops}


def _render_expr(node, parent_tier=-1, right_operand=False):
    if node.kind == "int-literal":
        return str(node.payload)
    if node.kind == "var":
        return node.payload
    if node.kind == "read":
        return "read ( )"
    tier = _TIER_OF_OP[node.payload]
    text = "{} {} {}".format(
        _render_expr(node.children[0], tier, False),
        node.payload,
        _render_expr(node.children[1], tier, True),
    )
    # Parenthesize when binding looser than the parent, or equally on the
    # right of a left-associative operator.
    if tier < parent_tier or (tier == parent_tier and right_operand):
        return "( " + text + " )"
    return text


def _render_stmts(node, indent, lines):
    pad = "  " * indent
    for stmt in node.children:
        if stmt.kind == "assign":
            lines.append(f"{pad}{stmt.payload} = {_render_expr(stmt.children[0])} ;")
        elif stmt.kind == "print":
            lines.append(f"{pad}print ( {_render_expr(stmt.children[0])} ) ;")
        elif stmt.kind == "if":
            lines.append(f"{pad}if ( {_render_expr(stmt.children[0])} ) {{")
            _render_stmts(stmt.children[1], indent + 1, lines)
            if len(stmt.children) == 3:
                lines.append(f"{pad}}} else {{")
                _render_stmts(stmt.children[2], indent + 1, lines)
            lines.append(f"{pad}}}")
        elif stmt.kind == "while":
            lines.append(f"{pad}while ( {_render_expr(stmt.children[0])} ) {{")
            _render_stmts(stmt.children[1], indent + 1, lines)
            lines.append(f"{pad}}}")
        else:
            raise ValueError(f"not a statement kind: {stmt.kind}")


def serialize_source(ast):
    """Canonical source rendering: one statement per line, tokens spaced.

    parse(serialize_source(ast)).ast == ast for every well-formed tree, and
    the rendering is stable across runs.
    """
    lines = []
    _render_stmts(ast, 0, lines)
    return "\n".join(lines) + ("\n" if lines else "")


_AST_LABEL = {"int-literal": "int"}


def _sexpr(node, out):
    out.append("(")
    out.append(_AST_LABEL.get(node.kind, node.kind))
    if node.payload is not None:
        out.append(" ")
        out.append(str(node.payload))
    for child in node.children:
        out.append(" ")
        _sexpr(child, out)
    out.append(")")


def serialize_ast(program):
    """Deterministic pre-order s-expression of the AST, one token per label."""
    out = []
    _sexpr(program.ast if isinstance(program, Program) else program, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


class _Abort(Exception):
    def __init__(self, status):
        self.status = status


class _State:
    __slots__ = ("env", "inp", "cursor", "out", "steps", "limit", "covered")

    def __init__(self, inp, limit):
        self.env = {}
        self.inp = inp
        self.cursor = 0
        self.out = []
        self.steps = 0
        self.limit = limit
        self.covered = set()


def _compile_expr(node):
    kind = node.kind
    if kind == "int-literal":
        value = node.payload

        def lit(st):
            return value

        return lit
    if kind == "var":
        name = node.payload

        def var(st):
            # Unassigned variables read as 0: keeps execution total.
            return st.env.get(name, 0)

        return var
    if kind == "read":

        def read(st):
            if st.cursor >= len(st.inp):
                raise _Abort(STATUS_INPUT_EXHAUSTED)
            v = st.inp[st.cursor]
            st.cursor += 1
            return v

        return read
    # binop
    lhs = _compile_expr(node.children[0])
    rhs = _compile_expr(node.children[1])
    op = node.payload
    if op == "+":
        return lambda st: wrap_int(lhs(st) + rhs(st))
    if op == "-":
        return lambda st: wrap_int(lhs(st) - rhs(st))
    if op == "*":
        return lambda st: wrap_int(lhs(st) * rhs(st))
    if op == "/":

        def div(st):
            a, b = lhs(st), rhs(st)
            if b == 0:
                raise _Abort(STATUS_DIV_BY_ZERO)
            q = abs(a) // abs(b)
            return wrap_int(q if (a < 0) == (b < 0) else -q)

        return div
    if op == "%":

        def mod(st):
            a, b = lhs(st), rhs(st)
            if b == 0:
                raise _Abort(STATUS_DIV_BY_ZERO)
            r = abs(a) % abs(b)
            return -r if a < 0 else r

        return mod
    if op == "<":
        return lambda st: 1 if lhs(st) < rhs(st) else 0
    if op == ">":
        return lambda st: 1 if lhs(st) > rhs(st) else 0
    if op == "<=":
        return lambda st: 1 if lhs(st) <= rhs(st) else 0
    if op == ">=":
        return lambda st: 1 if lhs(st) >= rhs(st) else 0
    if op == "==":
        return lambda st: 1 if lhs(st) == rhs(st) else 0
    if op == "!=":
        return lambda st: 1 if lhs(st) != rhs(st) else 0
    raise ValueError(f"unknown operator {op!r}")


def _compile_block(node, counter):
    return [_compile_stmt(s, counter) for s in node.children]


def _compile_stmt(node, counter):
    kind = node.kind
    if kind == "assign":
        name = node.payload
        expr = _compile_expr(node.children[0])

        def assign(st):
            st.steps += 1
            if st.steps > st.limit:
                raise _Abort(STATUS_STEP_LIMIT)
            st.env[name] = expr(st)

        return assign
    if kind == "print":
        expr = _compile_expr(node.children[0])

        def pr(st):
            st.steps += 1
            if st.steps > st.limit:
                raise _Abort(STATUS_STEP_LIMIT)
            st.out.append(str(expr(st)))

        return pr
    if kind == "if":
        test_id = counter[0]
        counter[0] += 1
        true_edge, false_edge = 2 * test_id, 2 * test_id + 1
        test = _compile_expr(node.children[0])
        then_body = _compile_block(node.children[1], counter)
        else_body = _compile_block(node.children[2], counter) if len(node.children) == 3 else []

        def branch(st):
            st.steps += 1
            if st.steps > st.limit:
                raise _Abort(STATUS_STEP_LIMIT)
            if test(st) != 0:
                st.covered.add(true_edge)
                for s in then_body:
                    s(st)
            else:
                st.covered.add(false_edge)
                for s in else_body:
                    s(st)

        return branch
    if kind == "while":
        test_id = counter[0]
        counter[0] += 1
        true_edge, false_edge = 2 * test_id, 2 * test_id + 1
        test = _compile_expr(node.children[0])
        body = _compile_block(node.children[1], counter)

        def loop(st):
            while True:
                st.steps += 1
                if st.steps > st.limit:
                    raise _Abort(STATUS_STEP_LIMIT)
                if test(st) == 0:
                    st.covered.add(false_edge)
                    return
                st.covered.add(true_edge)
                for s in body:
                    s(st)

        return loop
    raise ValueError(f"not a statement kind: {kind}")


def _compiled(program):
    if program._compiled is None:
        counter = [0]
        program._compiled = _compile_block(program.ast, counter)
    return program._compiled


def parse_input_text(text):
    """Whitespace-separated integer tokens, wrapped into the 64-bit range."""
    return [wrap_int(int(tok)) for tok in text.split()]


def execute(program, input_text, step_limit=DEFAULT_STEP_LIMIT):
    """Run a program on an input string; never raises for program behavior.

    A step is charged for every statement execution and every if/while test
    evaluation.  Each test evaluation marks exactly one of its two edges.
    """
    if step_limit < 1:
        raise ValueError("step_limit must be >= 1")
    stmts = _compiled(program)
    st = _State(parse_input_text(input_text), step_limit)
    status = STATUS_OK
    try:
        for s in stmts:
            s(st)
    except _Abort as abort:
        status = abort.status
    return ExecOutcome(status, "\n".join(st.out), st.steps, frozenset(st.covered))

"""A tour of MiniLang: parsing, serialization, and instrumented execution.

Run:  python3 demos/01_minilang_tour.py
"""

from dynapre.minilang import INT_MAX, execute, parse, serialize_ast, serialize_source

# A small program: read a number, classify its sign, then count it down.
SOURCE = """\
x = read ( ) ;
if ( x > 0 ) {
  print ( 1 ) ;
} else {
  print ( 0 ) ;
}
while ( x > 0 ) {
  x = x - 1 ;
}
print ( x ) ;
"""

program = parse(SOURCE)
print(f"branch_count = {program.branch_count}  (2 edges per if/while test)")

# The AST serializes to a deterministic s-expression; this is the alternate
# "ast" input representation for the encoder.
print("\nAST s-expression:")
print(serialize_ast(program))

# Canonical source round-trips through the parser exactly.
assert parse(serialize_source(program.ast)).ast == program.ast

# Execution is deterministic and reports status, output, steps, and the
# covered branch edges. Edge 2k is test k's true edge, 2k+1 its false edge.
for input_text in ["7", "-3", ""]:
    outcome = execute(program, input_text)
    print(
        f"\ninput={input_text!r:6} status={outcome.status:15} "
        f"output={outcome.output!r} steps={outcome.steps} "
        f"edges={sorted(outcome.covered_edges)}"
    )

# Abnormal terminations are statuses, not exceptions: hangs hit STEP_LIMIT,
# and arithmetic wraps like 64-bit two's complement.
hang = parse("while ( 1 == 1 ) { x = x + 1 ; }")
print(f"\ninfinite loop -> {execute(hang, '').status}")

wrap = parse(f"print ( {INT_MAX} + 1 ) ;")
print(f"INT_MAX + 1 -> {execute(wrap, '').output}")

crash = parse("x = read ( ) ;\nprint ( 100 / x ) ;")
print(f"100 / 0 -> {execute(crash, '0').status}")

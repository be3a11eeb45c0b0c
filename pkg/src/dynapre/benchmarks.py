"""Shipped fuzzing benchmark: ten small programs with known reachable edges.

Each program has 2-6 branch edges; REACHABLE_EDGES holds the statically
reachable subset per program, derived with the input-enumeration oracle in
the test suite (each program is designed so that inputs of at most three
small tokens exercise every reachable edge).  `unreachable_if` carries one
contradictory test on purpose: its true edge is dead and must stay out of
the coverage denominator.
"""

from __future__ import annotations

from .minilang import parse

BENCH_SOURCES = {
    "sign": """\
x = read ( ) ;
if ( x > 0 ) {
  print ( 1 ) ;
} else {
  print ( 0 ) ;
}
""",
    "clamp_chain": """\
x = read ( ) ;
if ( x > 10 ) {
  x = 10 ;
}
if ( x < 0 ) {
  x = 0 ;
}
print ( x ) ;
""",
    "countdown": """\
n = read ( ) ;
n = n % 6 ;
if ( n < 0 ) {
  n = 0 - n ;
}
while ( n > 0 ) {
  print ( n ) ;
  n = n - 1 ;
}
""",
    "parity": """\
x = read ( ) ;
if ( x % 2 == 0 ) {
  print ( 0 ) ;
} else {
  print ( 1 ) ;
}
""",
    "max_of_three": """\
a = read ( ) ;
b = read ( ) ;
if ( a > b ) {
  m = a ;
} else {
  m = b ;
}
c = read ( ) ;
if ( c > m ) {
  m = c ;
}
print ( m ) ;
""",
    "guarded_division": """\
a = read ( ) ;
b = read ( ) ;
if ( b != 0 ) {
  print ( a / b ) ;
} else {
  print ( 0 ) ;
}
""",
    "euclid": """\
a = read ( ) ;
b = read ( ) ;
while ( b != 0 ) {
  t = a % b ;
  a = b ;
  b = t ;
}
print ( a ) ;
""",
    "bounded_sum": """\
n = read ( ) ;
n = n % 5 ;
if ( n < 1 ) {
  n = 1 ;
}
s = 0 ;
i = 0 ;
while ( i < n ) {
  s = s + i ;
  i = i + 1 ;
}
print ( s ) ;
""",
    "nested_bands": """\
x = read ( ) ;
if ( x > 0 ) {
  if ( x > 100 ) {
    print ( 2 ) ;
  } else {
    print ( 1 ) ;
  }
} else {
  print ( 0 ) ;
}
""",
    "unreachable_if": """\
x = read ( ) ;
if ( x != x ) {
  print ( 999 ) ;
}
while ( x > 5 ) {
  x = x - 1 ;
}
print ( x ) ;
""",
}

# Statically reachable edge ids per program (edge 2k/2k+1 = test k true/false,
# tests numbered in AST pre-order).  Derived by the enumeration oracle; the
# test suite recomputes and compares.
REACHABLE_EDGES = {
    "sign": frozenset({0, 1}),
    "clamp_chain": frozenset({0, 1, 2, 3}),
    "countdown": frozenset({0, 1, 2, 3}),
    "parity": frozenset({0, 1}),
    "max_of_three": frozenset({0, 1, 2, 3}),
    "guarded_division": frozenset({0, 1}),
    "euclid": frozenset({0, 1}),
    "bounded_sum": frozenset({0, 1, 2, 3}),
    "nested_bands": frozenset({0, 1, 2, 3}),
    "unreachable_if": frozenset({1, 2, 3}),  # edge 0 (x != x true) is dead
}


def bench_programs():
    """name -> parsed Program for the shipped suite."""
    return {name: parse(src) for name, src in BENCH_SOURCES.items()}

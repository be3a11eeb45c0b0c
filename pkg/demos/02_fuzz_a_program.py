"""Coverage-guided fuzzing: watch a test suite earn its cases.

Run:  python3 demos/02_fuzz_a_program.py
"""

from dynapre.fuzzer import fuzz_program, mutate_input, replay_verify
from dynapre.minilang import execute, parse

import numpy as np

# Three behavioral regions: negative, small positive, large positive.
SOURCE = """\
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
"""

program = parse(SOURCE)

# The mutation engine applies exactly one operator per call: append, delete,
# replace, duplicate, perturb by +-{1,2,16,256}, or negate.
rng = np.random.default_rng(0)
text = "2 3"
print("a mutation chain:")
for _ in range(6):
    text = mutate_input(text, rng)
    print(f"  -> {text!r}")

# Fuzzing keeps an input iff it covers a new branch edge or produces a new
# status; retained inputs seed further mutations, round-robin.
suite = fuzz_program(program, budget=2000, rng_seed=0, program_id="demo")
print(f"\ncovered {len(suite.covered_edges)}/{program.branch_count} edges "
      f"with {len(suite.cases)} retained cases:")
for case in suite.cases:
    edges = sorted(execute(program, case.input).covered_edges)
    print(f"  input={case.input!r:18} status={case.status:15} "
          f"output={case.output!r:6} edges={edges}")

# Every recorded case replays to the identical output and status.
print(f"\nreplay_verify: {replay_verify(program, suite)}")

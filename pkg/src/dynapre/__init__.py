"""dynapre: execution-aware code representation pre-training at desk scale.

A toy-language corpus is fuzzed for test cases, a small transformer encoder
is pre-trained with masked-token, code/test-case matching, and contrastive
distillation objectives, and the frozen code embeddings are scored on
retrieval and defect-probing tasks.
"""

__version__ = "0.1.0"

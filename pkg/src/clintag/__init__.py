"""clintag: clinical sequence-labeling toolkit.

Trainable Transformer encoder, linear-chain CRF and classification
decoding heads, a CoNLL/BIOES corpus pipeline, and an entity/token/
binary/BIOES evaluation harness.
"""

from ._backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]

"""Desk-scale continual test-time adaptation with expandable expert pools.

A frozen toy vision transformer hosts a dual-branch mixture-of-experts
adapter at every feed-forward site. A spectral online domain discriminator
watches the low-frequency content of the incoming stream, assigns batches to
known domains, and spawns fresh expert branches when the stream drifts
somewhere new. Adaptation itself is entropy minimization on confident
predictions only.

The sklearn-style estimators in `xpmo.estimators` are the composition-friendly
entry points; `xpmo.cli` drives full experiments.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]

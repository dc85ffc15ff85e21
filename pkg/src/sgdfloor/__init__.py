"""Adversarial SGD instances and gradient-norm bound certification tools.

Subpackages map one-to-one onto the pipeline: exact 1-D pieces
(:mod:`.piecewise`), d-dimensional objectives (:mod:`.objectives`), the SGD
simulator (:mod:`.engine`), smooth interpolation machinery
(:mod:`.interpolation`), theorem-specific instance builders and verifiers
(:mod:`.instances`), closed-form upper bounds (:mod:`.bounds`), and the
experiment CLI (:mod:`.cli`).
"""

__version__ = "0.1.0"

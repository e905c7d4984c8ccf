"""mathforge: difficulty-controlled math problem generation.

The package has four layers: a difficulty encoding model
(:mod:`mathforge.difficulty`), corpus-guided samplers
(:mod:`mathforge.sampling`), the multi-role generation loop
(:mod:`mathforge.loop` over :mod:`mathforge.gateway`), and an
evaluation harness (:mod:`mathforge.harness`).  A FastAPI service
(:mod:`mathforge.service`) exposes the pipeline, and the ``mathforge``
command is a thin client over it.
"""

__version__ = "0.1.0"

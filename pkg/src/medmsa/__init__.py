"""Model synthesis for differential diagnosis.

Vignettes in, an auditable run directory out: synthesized causal
probabilistic programs, verifiable rejection-sampling inference, and an
equal-weight ensembled differential a clinician can inspect and intervene on.
"""

__version__ = "0.1.0"

"""beambench: mmWave V2I beam-prediction workbench.

Simulates a 64-beam receive-codebook link with five synchronized sensing
modalities, trains a multimodal transformer-fusion beam predictor, and
evaluates it with communication-centric metrics and a latency breakdown.
"""

__version__ = "0.1.0"

"""Fine-grained caption annotation for video moments.

Generates static- and dynamic-detail caption candidates through pluggable
model backends, trains a small dual-encoder evaluator with hard-negative
contrastive and matching losses, scores and selects candidates, and scores
moment-retrieval predictions.
"""
__version__ = "0.1.0"

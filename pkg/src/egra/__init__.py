"""Early-grade reading assessment toolkit.

Consensus labeling of child pronunciation recordings, an expert
validation workflow, a fine-tuning harness over pluggable speech
encoders, balanced experiment planning, evaluation metrics, an ASR
exact-match baseline, and report rendering.
"""

__version__ = "0.1.0"

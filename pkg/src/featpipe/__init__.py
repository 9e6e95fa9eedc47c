"""CNN-feature + SVM image classification pipeline with baselines and
an evaluation harness."""

__version__ = "0.1.0"

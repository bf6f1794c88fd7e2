"""Multi-task active learning: confidence scores, selection strategies,
budgeted selection, and a synthetic simulation lab."""

__version__ = "0.1.0"

"""Detection-metrics and dataset-curation toolkit."""

__version__ = "0.1.0"

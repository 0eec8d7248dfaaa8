"""Image-embedding extraction into the FETv1 feature-file format."""

__version__ = "0.1.0"

"""Language-guided 3D affordance segmentation pipeline and benchmark."""

__version__ = "0.1.0"

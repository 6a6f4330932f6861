"""bloombench: curation workbench and evaluation harness for
harmful-algal-bloom segmentation and severity datasets."""

__version__ = "0.1.0"

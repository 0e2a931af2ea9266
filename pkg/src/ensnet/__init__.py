"""Architecture DSL, small CNN engine and weighted late-fusion ensemble for food image classification."""

__version__ = "0.1.0"

"""Early-adopter discovery for predicting the future popularity of new accounts."""

__version__ = "0.1.0"

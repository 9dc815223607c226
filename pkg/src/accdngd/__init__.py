"""Accelerated distributed Nesterov gradient methods over simulated networks."""
__version__ = "0.1.0"

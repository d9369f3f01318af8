"""Experiment engine and command-line interface."""

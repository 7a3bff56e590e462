"""Experiment harness: configs, seeded runs, logs and oracle checks."""

"""Data, training, evaluation and command-line tooling."""

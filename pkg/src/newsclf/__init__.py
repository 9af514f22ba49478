"""Bi-LSTM + attention news classifier and its baselines, built on hand-written numpy layers."""

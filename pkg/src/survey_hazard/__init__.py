"""Discrete-time survival models of daily survey response."""

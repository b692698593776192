"""Unit tests for the reputation_engine package."""

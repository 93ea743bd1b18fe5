"""Readers and writers for external data artifacts."""

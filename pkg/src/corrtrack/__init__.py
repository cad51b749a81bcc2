"""Tracking-by-detection association engine with correlation-based appearance scoring."""

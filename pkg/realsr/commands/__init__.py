"""Command modules for realsr."""

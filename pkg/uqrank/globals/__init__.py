"""Core global utilities and types for uqrank."""

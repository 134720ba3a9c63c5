"""Multimodal in-hospital mortality toolkit."""

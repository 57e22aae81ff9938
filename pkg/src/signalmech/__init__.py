"""Selling mechanisms for buyers whose value predictions may be hallucinated."""

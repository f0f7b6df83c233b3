"""Dynamic two-sided matching with evolving awareness."""

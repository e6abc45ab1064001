"""Flat chains over abelian groups and topological singular sets of sampled fields."""
__version__ = "0.1.0"

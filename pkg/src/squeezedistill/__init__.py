"""Squeezed-state distillation and purification in truncated Fock space."""

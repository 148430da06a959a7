"""Kan loop groups of reduced CW-complexes and their representation spaces in U(1), SU(2), SO(3)."""

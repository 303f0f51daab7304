"""
Synthetic test potentials
"""

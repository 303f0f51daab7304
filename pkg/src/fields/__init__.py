"""
Sampled fields and radial profiles
"""

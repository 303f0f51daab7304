"""
Utility modules for bklab
"""

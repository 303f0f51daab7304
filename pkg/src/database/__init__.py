"""
Run history storage for bklab
"""

"""
Error metrics and numerical checks
"""

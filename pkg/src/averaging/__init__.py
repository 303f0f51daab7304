"""
Mollifier, angular, radial and frequency averaging
"""

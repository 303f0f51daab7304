"""
bklab Source Package
Main-term reconstruction of 2D potentials and its averaging procedures
"""

__version__ = "0.1.0"
__author__ = "bklab Team"

"""
Test suite for bklab
""" 
"""
Test suite for tworing.
"""

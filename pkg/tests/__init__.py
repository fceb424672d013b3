"""
Decay Lab Test Suite
"""

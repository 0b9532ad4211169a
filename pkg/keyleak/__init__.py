"""
KeyLeak - security-bound computation and brute-force verification for
imperfect secret keys
"""

__version__ = "0.1.0"

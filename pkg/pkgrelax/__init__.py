"""
pkgrelax - package query evaluation and query relaxation engine
"""

__version__ = "1.0.0"

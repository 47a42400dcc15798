"""
Core models, constraint evaluation and errors
"""

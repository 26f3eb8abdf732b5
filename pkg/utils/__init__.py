"""
Utilities package for the positive routing control toolkit.
Contains constants, validators, formatters, exceptions and logging setup.
"""

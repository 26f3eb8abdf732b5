"""
Command line package for the positive routing control toolkit.
Contains the subcommands and the JSON, CSV and spreadsheet report writers.
"""

"""
Network package for the positive routing control toolkit.
Handles routing graphs, model files and data models.
"""

"""
Control package for the positive routing control toolkit.
Contains controller synthesis, admissibility, horizon bounds, finite-horizon LPs and closed-loop simulation.
"""

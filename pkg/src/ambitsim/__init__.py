"""ambitsim: simulation and validation of Levy bases, trawl processes and
ambit fields, with every simulated object checked against its closed-form
cumulant, moment and covariance formulas."""

__version__ = "0.1.0"

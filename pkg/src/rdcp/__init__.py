"""Random degree-constrained process: simulation, limit objects and critical times."""

from rdcp.degree_dist import DegreeDistribution, from_pmf, parse_dist, point_mass

__all__ = ["DegreeDistribution", "from_pmf", "parse_dist", "point_mass"]
__version__ = "0.1.0"

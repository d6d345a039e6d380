"""A priori TSP: algorithms, exact evaluators, LP bounds and lower-bound families."""
__version__ = "0.1.0"

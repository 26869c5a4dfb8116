"""Two-layer validation for generalist robots: a finite-domain situation
calculus abstract layer (weakest preconditions, constraint-aware
combinatorial world-task generation) and a concrete layer (STL synthesis,
robustness monitoring, falsification against a toy kitchen simulator).
"""

__version__ = "0.1.0"

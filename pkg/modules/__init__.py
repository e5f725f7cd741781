"""
Hilfer-Langevin Modules
Fractional operators, problem model, certificates, solvers and stability checks
"""

__version__ = "1.0.0"
TOOL_NAME = "hilfer-langevin"

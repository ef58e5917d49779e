"""Human-in-the-loop text-to-SQL dataset annotation workbench."""

__version__ = "0.1.0"

"""Read-only figure scripts for solver CSV outputs."""

from .figures import plot_conservation, plot_solution, solution_panel

__all__ = ["plot_solution", "solution_panel", "plot_conservation"]

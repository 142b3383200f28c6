"""
Command-line interface for training, evaluation, simulation and sweeps.
"""

from .commands import build_parser, cmd_eval, cmd_simulate, cmd_sweep, cmd_train

__all__ = ["build_parser", "cmd_train", "cmd_eval", "cmd_simulate", "cmd_sweep"]

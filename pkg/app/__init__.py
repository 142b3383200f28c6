"""
Bi-level reinforcement-learning control for an underactuated blimp with a
movable-mass slider: simulator, SAC thrust controller, slider-configuration
policy, baselines and the evaluation harness.
"""

__version__ = "1.0.0"

from .approx import approx_command
from .rates import rates_command
from .simulate import simulate_command
from .sweep import sweep_command

__all__ = ["approx_command", "rates_command", "simulate_command", "sweep_command"]

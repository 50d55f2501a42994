"""
Subcomandos da CLI. Cada módulo expõe `register(subparsers)`.
"""

from . import experiment, fit, report, simulate

COMMAND_MODULES = (simulate, fit, experiment, report)

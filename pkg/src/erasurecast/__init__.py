from erasurecast import analysis, markov, tools
from erasurecast.tools import SimConfig, create_tail_scheme, run_experiment
from erasurecast.utils.checks import RejectedInputException

# Disable pyflaks warnings:
assert analysis
assert markov
assert tools
assert SimConfig
assert create_tail_scheme
assert run_experiment
assert RejectedInputException

__version__ = "0.1.0"

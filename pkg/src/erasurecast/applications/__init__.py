from __future__ import annotations

from erasurecast.applications.figures import (
    SweepOutput,
    SweepSpec,
    aggregate,
    create_figure_sweep,
    figures,
    run_sweep,
)

# Disable pyflaks warnings:
assert SweepOutput
assert SweepSpec
assert aggregate
assert create_figure_sweep
assert figures
assert run_sweep

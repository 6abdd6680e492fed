"""Parameter sweeps behind the figure presets.

Each preset returns a :class:`SweepSpec`; :func:`run_sweep` runs one
simulation per (axis value, seed), unless the preset is analytic, and co-emits the analytical columns the
figure compares against:

* ``fig2``: uncoded transmissions t̂₀ + t̂₁ + t̂₂ + t̂₃ against t*, with ε₁ = 0.3,
  ε₂ = 0.4 and ε₃ from 0.5 to 0.8.
* ``fig3``: overall latency with the preprocess-coding tail against w⁺ for
  ε₃ ≥ 0.85, where the instantly decodable phases cannot finish.
* ``fig4``: the certified builder distortion boundary, with ε₁ = 0.1,
  ε₃ = 0.6 and ε₂ from 0.2 to 0.6. Analytic only: at these points some user
  is satisfied before the chaining tail starts.
* ``fig4_latency``: end-to-end chaining latency against w⁺ for ε₃ ≥ 0.85,
  the same points as ``fig3``.

All presets use quadratic distortions d_i = ε_i².
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from erasurecast.analysis.chaining import ChainRoles, build_chain_mrp, sufficiency_check
from erasurecast.analysis.uncoded import latency_bounds, solve_uncoded_lp
from erasurecast.tools.experiment import run_experiment
from erasurecast.tools.simulator import RESULT_COLUMNS, SimConfig
from erasurecast.utils.checks import RejectedInputException
from erasurecast.utils.io import load_json

__all__ = [
    "AXES",
    "COMPARISONS",
    "SweepSpec",
    "SWEEP_COLUMNS",
    "AGGREGATE_COLUMNS",
    "SweepOutput",
    "run_sweep",
    "aggregate",
    "fig2",
    "fig3",
    "fig4",
    "fig4_latency",
    "figures",
    "create_figure_sweep",
]

logger = logging.getLogger(__name__)

AXES = ("eps1", "eps2", "eps3", "d1", "d2", "d3", "n_symbols")
COMPARISONS = ("t_star", "w_plus", "boundary")
DISTORTION_RULES = ("fixed", "quadratic")

SWEEP_COLUMNS = ("axis", "value") + RESULT_COLUMNS + (
    "uncoded_latency",
    "t_star",
    "boundary",
    "error",
)
_AVERAGED = ("latency", "uncoded_latency", "dist1", "dist2", "dist3")
AGGREGATE_COLUMNS = (
    ("axis", "value", "runs", "failures")
    + tuple(f"{c}_{s}" for c in _AVERAGED for s in ("mean", "se"))
    + ("t_star", "w_plus", "boundary")
)


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional sweep over a config field.

    :param base: Config every point starts from.
    :param axis: Field that varies, one of :data:`AXES`.
    :param values: Axis values.
    :param seeds: Seeds run at every axis value.
    :param comparisons: Analytical columns to co-emit, from
      :data:`COMPARISONS`.
    :param distortion_rule: "quadratic" recomputes d_i = ε_i² at every point.
    :param simulate: Run one simulation per point. Without it a row carries
      the point's parameters and the analytical columns only.
    """

    base: SimConfig
    axis: str
    values: Tuple[float, ...]
    seeds: Tuple[int, ...] = ()
    comparisons: Tuple[str, ...] = ("t_star", "w_plus")
    distortion_rule: str = "fixed"
    simulate: bool = True

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise RejectedInputException(f"Unknown sweep axis {self.axis!r}; use one of {AXES}.")
        unknown = set(self.comparisons) - set(COMPARISONS)
        if unknown:
            raise RejectedInputException(f"Unknown comparisons {sorted(unknown)}.")
        if self.distortion_rule not in DISTORTION_RULES:
            raise RejectedInputException(
                f"distortion_rule must be one of {DISTORTION_RULES}, got {self.distortion_rule!r}."
            )
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "comparisons", tuple(self.comparisons))
        # Building every point rejects values outside the field's domain.
        for value in self.values:
            self.config_at(value, 0)

    def config_at(self, value: float, seed: int) -> SimConfig:
        state = self.base.save()
        state["seed"] = seed
        if self.axis == "n_symbols":
            if float(value) != int(value):
                raise RejectedInputException(f"n_symbols must be an integer, got {value}.")
            state["n_symbols"] = int(value)
        else:
            field_name, u = self.axis[:-1], int(self.axis[-1]) - 1
            values = list(state[field_name])
            values[u] = float(value)
            state[field_name] = values
        if self.distortion_rule == "quadratic":
            state["d"] = [e * e for e in state["eps"]]
        return SimConfig.load(state)

    def replace(self, **changes: Any) -> "SweepSpec":
        kwargs = dict(
            base=self.base,
            axis=self.axis,
            values=self.values,
            seeds=self.seeds,
            comparisons=self.comparisons,
            distortion_rule=self.distortion_rule,
            simulate=self.simulate,
        )
        kwargs.update(changes)
        return SweepSpec(**kwargs)

    def save(self) -> Dict[str, Any]:
        return {
            "base": self.base.save(),
            "axis": self.axis,
            "values": list(self.values),
            "seeds": list(self.seeds),
            "comparisons": list(self.comparisons),
            "distortion_rule": self.distortion_rule,
            "simulate": self.simulate,
        }

    @classmethod
    def load(cls, state: Dict[str, Any]) -> "SweepSpec":
        known = {
            "base",
            "axis",
            "values",
            "seeds",
            "comparisons",
            "distortion_rule",
            "simulate",
        }
        unknown = set(state) - known
        if unknown:
            raise RejectedInputException(f"Unknown sweep keys: {sorted(unknown)}.")
        missing = {"base", "axis", "values"} - set(state)
        if missing:
            raise RejectedInputException(f"Missing sweep keys: {sorted(missing)}.")
        kwargs = dict(state)
        kwargs["base"] = SimConfig.load(state["base"])
        for key in ("values", "seeds", "comparisons"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def load_json(cls, fname: str) -> "SweepSpec":
        return cls.load(load_json(fname))


###############################################################################
# Running a sweep.
###############################################################################


def _comparisons(cfg: SimConfig, wanted: Sequence[str]) -> Dict[str, Optional[float]]:
    found: Dict[str, Optional[float]] = {}
    if "t_star" in wanted:
        found["t_star"] = solve_uncoded_lp(cfg.eps).t_star
    if "w_plus" in wanted:
        found["w_plus"] = latency_bounds(cfg.eps, cfg.d).w_plus
    if "boundary" in wanted:
        residual = [1.0 - d for d in cfg.d]
        builder = cfg.builder
        if builder is None:
            builder = min(range(3), key=lambda u: (cfg.eps[u], u))
        roles = ChainRoles.from_demands(builder, cfg.eps, residual)
        model = build_chain_mrp(*roles.role_eps(cfg.eps))
        report = sufficiency_check(model, roles, cfg.n_symbols, residual)
        found["boundary"] = report.d_i_boundary
    return found


def _point_columns(cfg: SimConfig) -> Dict[str, Any]:
    return dict(
        seed=cfg.seed,
        N=cfg.n_symbols,
        **{f"eps{u + 1}": cfg.eps[u] for u in range(3)},
        **{f"d{u + 1}": cfg.d[u] for u in range(3)},
    )


def _run_point(
    axis: str, value: float, cfg: SimConfig, wanted: Tuple[str, ...], simulate: bool = True
) -> Dict[str, Any]:
    row: Dict[str, Any] = {"axis": axis, "value": value}
    try:
        if simulate:
            result = run_experiment(cfg)
            row.update(result.to_row())
            row["uncoded_latency"] = result.uncoded_latency
        else:
            row.update(_point_columns(cfg))
        row.update(_comparisons(cfg, wanted))
        row["error"] = ""
    except Exception as e:  # noqa: B902
        logger.warning("Sweep point %s=%s seed %d failed: %s", axis, value, cfg.seed, e)
        row.update(_point_columns(cfg))
        row["error"] = f"{type(e).__name__}: {e}"
    return row


@dataclass(frozen=True)
class SweepOutput:
    rows: List[Dict[str, Any]]
    aggregates: List[Dict[str, Any]] = field(default_factory=list)


def _mean_se(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Per-axis-value means and standard errors over the successful runs."""
    by_value: Dict[float, List[Dict[str, Any]]] = {}
    for row in rows:
        by_value.setdefault(row["value"], []).append(row)
    out = []
    for value in sorted(by_value):
        group = by_value[value]
        ok = [r for r in group if not r.get("error")]
        agg: Dict[str, Any] = {
            "axis": group[0]["axis"],
            "value": value,
            "runs": len(group),
            "failures": len(group) - len(ok),
        }
        for column in _AVERAGED:
            agg[f"{column}_mean"], agg[f"{column}_se"] = _mean_se(
                [r[column] for r in ok if r.get(column) is not None]
            )
        for column in ("t_star", "w_plus", "boundary"):
            agg[column] = ok[0].get(column) if ok else None
        out.append(agg)
    return out


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepOutput:
    """One row per (axis value, seed), sorted by value then seed.

    :param workers: Run points in this many processes. Rows do not depend
      on it.
    """
    points = [(v, s) for v in sorted(spec.values) for s in sorted(spec.seeds)]
    jobs = [
        (spec.axis, v, spec.config_at(v, s), spec.comparisons, spec.simulate)
        for v, s in points
    ]
    logger.info("Sweep over %s: %d points on %d worker(s).", spec.axis, len(jobs), workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, *zip(*jobs)))
    else:
        rows = []
        for n, job in enumerate(jobs):
            rows.append(_run_point(*job))
            logger.info("Sweep point %d/%d done.", n + 1, len(jobs))
    rows.sort(key=lambda r: (r["value"], r["seed"]))
    return SweepOutput(rows=rows, aggregates=aggregate(rows))


###############################################################################
# Figure presets.
###############################################################################


def fig2(n_symbols: int = 10**5, seeds: Sequence[int] = tuple(range(20))) -> SweepSpec:
    """Uncoded transmissions against t*; the event handler is off so the
    instantly decodable phases run to their natural end."""
    base = SimConfig(
        n_symbols=n_symbols,
        eps=(0.3, 0.4, 0.5),
        d=(0.09, 0.16, 0.25),
        event_handler=False,
    )
    return SweepSpec(
        base=base,
        axis="eps3",
        values=(0.5, 0.6, 0.7, 0.8),
        seeds=tuple(seeds),
        comparisons=("t_star", "w_plus"),
        distortion_rule="quadratic",
    )


def fig3(n_symbols: int = 10**5, seeds: Sequence[int] = tuple(range(20))) -> SweepSpec:
    """Overall latency with the preprocess-coding tail."""
    base = SimConfig(
        n_symbols=n_symbols,
        eps=(0.3, 0.4, 0.85),
        d=(0.09, 0.16, 0.7225),
        tail_scheme="preprocess_coding",
    )
    return SweepSpec(
        base=base,
        axis="eps3",
        values=(0.85, 0.875, 0.9, 0.925, 0.95),
        seeds=tuple(seeds),
        comparisons=("t_star", "w_plus"),
        distortion_rule="quadratic",
    )


def fig4(n_symbols: int = 10**5, seeds: Sequence[int] = (0,)) -> SweepSpec:
    """Certified distortion boundary with user 1 building; nothing is simulated."""
    base = SimConfig(
        n_symbols=n_symbols,
        eps=(0.1, 0.2, 0.6),
        d=(0.01, 0.04, 0.36),
        tail_scheme="chaining",
        builder=0,
    )
    return SweepSpec(
        base=base,
        axis="eps2",
        values=(0.2, 0.3, 0.4, 0.5, 0.6),
        seeds=tuple(seeds),
        comparisons=("w_plus", "boundary"),
        distortion_rule="quadratic",
        simulate=False,
    )


def fig4_latency(
    n_symbols: int = 10**5, seeds: Sequence[int] = tuple(range(20))
) -> SweepSpec:
    """End-to-end chaining latency where the tail runs; compare with `fig3`."""
    spec = fig3(n_symbols, seeds)
    return spec.replace(base=spec.base.replace(tail_scheme="chaining"))


figures = {
    "fig2": fig2,
    "fig3": fig3,
    "fig4": fig4,
    "fig4_latency": fig4_latency,
}


def create_figure_sweep(name: str, **kwargs: Any) -> SweepSpec:
    """Instantiates the figure preset with the name 'name'.

    :raise KeyError: If there is no preset with the passed name.
    """
    try:
        preset = figures[name]
    except KeyError:
        raise KeyError(
            "No figure preset with the name '%s' could be found."
            " All possible names are: %s" % (name, list(figures.keys()))
        )
    return preset(**kwargs)

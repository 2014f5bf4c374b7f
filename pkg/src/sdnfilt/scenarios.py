"""Experiment scenarios: seeded multi-trial runs with plot-ready outputs.

Three built-in scenarios plus a bring-your-own-files one:

* fig1          inverse filtering of a blockwise polynomial signal through
                a two-hop kernel filter on a random geometric graph; one
                graph per run, filter and signal noise redrawn per trial.
* denoise       smoothing-penalty denoising on a k-NN graph of ingested
                points; observation noise redrawn per trial.
* time_varying  a filter sequence with fresh perturbations per epoch,
                solved entirely through the vertex-level simulator.
* custom        graph, filter and observation loaded from CSV files.

Every run is a pure function of (config, master_seed): output files are
byte-identical across reruns.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .filters import (
    GraphFilter,
    Signal,
    apply,
    build_denoise_filter,
    build_fig1_filter,
    extreme_singular_values,
    power_spectral_radius,
)
from .graphs import GenerationError, Graph, knn_graph, random_geometric_graph
from .io import (
    IngestError,
    read_edges_csv,
    read_filter_csv,
    read_points_csv,
    read_signal_csv,
    write_curves_csv,
    write_roundlog_csv,
    write_summary_json,
    atomic_write_text,
)
from .sdn import SdnNetwork, run_time_varying as sdn_run_time_varying
from .solvers import (
    METHODS,
    MethodParams,
    SolverConfig,
    direct_solve_oracle,
    iteration_matrix,
    prepare_params,
    solve,
)

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "TrialAggregate",
    "blockwise_polynomial",
    "add_uniform_noise",
    "synthetic_points",
    "run_fig1",
    "run_denoise",
    "run_time_varying",
    "run_custom",
    "run_scenario",
    "emit_outputs",
    "iterations_to_threshold",
]

SCENARIOS = ("fig1", "denoise", "time_varying", "custom")

# spawn-key stream tags so graph, filter noise and signal noise never share
# a random stream
_STREAM_FILTER = 1
_STREAM_SIGNAL = 2
_STREAM_OBS = 3
_STREAM_EPOCH = 4

GRAPH_ROUND_STRIDE = 100000
GRAPH_ROUNDS = 32

FIVE_PCT_THRESHOLD = 0.05
PLATEAU_DB = 0.1


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass
class ScenarioConfig:
    """Flat, JSON-compatible experiment configuration."""

    scenario: str = "fig1"
    n: int = 512
    radius: float | None = None          # default sqrt(2/n) for geometric graphs
    k: int = 5                           # k-NN degree for the denoise graph
    gamma: float = 0.05                  # filter perturbation level
    eta: float = 0.2                     # signal noise level
    alpha: float = 0.9075                # smoothing penalty
    methods: tuple = METHODS
    iterations: int = 200
    trials: int = 100
    master_seed: int = 777016
    output_dir: str | None = None
    points_csv: str | None = None
    edges_csv: str | None = None
    filter_csv: str | None = None
    signal_csv: str | None = None
    epochs: int = 3
    distributed: bool = False
    comm_range: int | None = None
    roundlog: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ConfigError("methods list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.scenario == "denoise" and self.points_csv is None:
            raise ConfigError("denoise scenario needs points_csv (id,x,y,value)")
        if self.scenario == "custom":
            for key in ("edges_csv", "filter_csv", "signal_csv"):
                if getattr(self, key) is None:
                    raise ConfigError(f"custom scenario needs {key}")
        if self.distributed:
            bad = [m for m in self.methods if m not in ("pgda", "spgda")]
            if bad:
                raise ConfigError(
                    f"distributed execution only supports pgda and spgda, got {bad}"
                )

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def resolved_radius(self) -> float:
        return float(np.sqrt(2.0 / self.n)) if self.radius is None else self.radius

    def echo(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass
class TrialAggregate:
    """Cross-trial statistics of one scenario run."""

    scenario: str
    methods: tuple
    metric_name: str
    trials: int
    master_seed: int
    curves: dict = field(default_factory=dict)           # method -> mean metric per m
    mean_spectral_radius: dict = field(default_factory=dict)
    iterations_to_5pct: dict = field(default_factory=dict)
    iterations_to_plateau: dict = field(default_factory=dict)
    limit_snr: float | None = None
    diverged: dict = field(default_factory=dict)
    condition_numbers: list = field(default_factory=list)
    graph_info: dict = field(default_factory=dict)
    message_totals: dict = field(default_factory=dict)
    epoch_rows: list = field(default_factory=list)       # time_varying only
    rounds: list | None = None                           # message log, if kept
    config_echo: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# signal constructions
# ---------------------------------------------------------------------------


def blockwise_polynomial(g: Graph) -> Signal:
    """Piecewise signal on four anti-diagonal strips of the unit square:
    strips 0 and 2 carry 0.5 - 2x, strips 1 and 3 carry 0.5 + x^2 + y^2."""
    if g.coordinates is None:
        raise ValueError("graph has no coordinates")
    pts = g.coordinates
    strip = np.minimum(3, np.floor(2.0 * (pts[:, 0] + pts[:, 1]))).astype(int)
    values = np.where(
        strip % 2 == 0,
        0.5 - 2.0 * pts[:, 0],
        0.5 + pts[:, 0] ** 2 + pts[:, 1] ** 2,
    )
    return Signal(g, values)


def add_uniform_noise(x: Signal, eta: float, rng_seed: int) -> Signal:
    """Componentwise x + u with u i.i.d. uniform on [-eta, eta]."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if eta == 0.0:
        return x.copy()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_seed))
    return Signal(x.graph, x.values + rng.uniform(-eta, eta, size=x.graph.n))


def synthetic_points(n: int = 218, rng_seed: int = 0):
    """Uniform points on [0,1]^2 with a smooth temperature-like field,
    for exercising the denoise scenario without any external dataset."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_seed))
    coords = rng.random((n, 2))
    x, y = coords[:, 0], coords[:, 1]
    values = (
        60.0
        + 25.0 * np.sin(2.1 * x + 0.4)
        + 18.0 * np.cos(1.7 * y - 0.2)
        + 10.0 * x * y
    )
    return coords, values


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _stream_seed(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1)[0])


def generate_run_graph(n: int, radius: float, master_seed: int) -> Graph:
    """Connected random geometric graph for one run. Each round hands the
    generator a fresh entropy and its own 64-sub-seed budget; at this
    graph density many rounds can be needed."""
    for round_idx in range(GRAPH_ROUNDS):
        try:
            return random_geometric_graph(
                n, radius, rng_seed=master_seed + GRAPH_ROUND_STRIDE * round_idx
            )
        except GenerationError:
            continue
    raise GenerationError(
        f"no connected geometric graph with n={n}, radius={radius} in "
        f"{GRAPH_ROUNDS} rounds from seed {master_seed}"
    )


def iterations_to_threshold(curve, threshold: float):
    """Smallest index m with curve[m] <= threshold, or None."""
    for m, v in enumerate(curve):
        if v <= threshold:
            return m
    return None


def _mean_curves(per_method_curves: dict) -> dict:
    out = {}
    for method, rows in per_method_curves.items():
        if rows:
            out[method] = np.mean(np.array(rows), axis=0).tolist()
        else:
            out[method] = []
    return out


def _spectral_radius_of(h: GraphFilter, method: str, params: MethodParams) -> float:
    op = iteration_matrix(h, method, params)
    return power_spectral_radius(op, tol=1e-9, max_iter=3000).value


def _snr_curve(iterates, clean: np.ndarray) -> list[float]:
    norm = np.linalg.norm(clean)
    out = []
    for xm in iterates:
        rel = np.linalg.norm(xm - clean) / norm
        out.append(300.0 if rel <= 0.0 else float(min(-20.0 * np.log10(rel), 300.0)))
    return out


# ---------------------------------------------------------------------------
# fig1: inverse filtering benchmark
# ---------------------------------------------------------------------------


def run_fig1(cfg: ScenarioConfig) -> TrialAggregate:
    graph = generate_run_graph(cfg.n, cfg.resolved_radius(), cfg.master_seed)
    base_signal = blockwise_polynomial(graph)

    per_curves = {m: [] for m in cfg.methods}
    radii = {m: [] for m in cfg.methods}
    diverged = {m: 0 for m in cfg.methods}
    kappas = []
    message_totals = {m: 0 for m in cfg.methods}
    kept_rounds = []

    for trial in range(cfg.trials):
        h = build_fig1_filter(
            graph, cfg.gamma, _stream_seed(cfg.master_seed, trial, _STREAM_FILTER)
        )
        params = MethodParams()
        for m in cfg.methods:
            prepare_params(h, m, params)
            radii[m].append(_spectral_radius_of(h, m, params))
        sv = params.singular_values or extreme_singular_values(h)
        kappas.append(float(sv.sigma_max / sv.sigma_min))

        x = add_uniform_noise(
            base_signal, cfg.eta, _stream_seed(cfg.master_seed, trial, _STREAM_SIGNAL)
        )
        y = apply(h, x)
        direct_solve_oracle(h, y)  # residual gate before any error curve

        for m in cfg.methods:
            if cfg.distributed:
                curve, messages, rounds = _distributed_error_curve(
                    graph, h, y, x, m, cfg
                )
                per_curves[m].append(curve)
                message_totals[m] += messages
                if cfg.roundlog:
                    kept_rounds.extend(rounds)
            else:
                _, trace = solve(
                    h, y, SolverConfig(method=m, max_iter=cfg.iterations),
                    reference=x, params=params,
                )
                if trace.status == "diverged":
                    diverged[m] += 1
                else:
                    per_curves[m].append(trace.relative_errors)

    agg = TrialAggregate(
        scenario="fig1",
        methods=cfg.methods,
        metric_name="rel_error",
        trials=cfg.trials,
        master_seed=cfg.master_seed,
        curves=_mean_curves(per_curves),
        mean_spectral_radius={m: float(np.mean(radii[m])) for m in cfg.methods},
        diverged=diverged,
        condition_numbers=kappas,
        graph_info={
            "n": graph.n,
            "edges": graph.num_edges(),
            "generator_seed": list(graph.generator_seed),
        },
        message_totals=message_totals,
        rounds=kept_rounds if cfg.roundlog else None,
        config_echo=cfg.echo(),
    )
    for m in cfg.methods:
        agg.iterations_to_5pct[m] = iterations_to_threshold(
            agg.curves[m], FIVE_PCT_THRESHOLD
        )
    return agg


def _distributed_iterates(graph, h, y, method, cfg):
    """Route one solve through the simulator, gathering the iterate after
    every iteration. Returns (iterates incl. the zero initial, messages,
    rounds). Bit-identical to the centralized iterates by construction."""
    net = SdnNetwork(
        graph, h, y,
        comm_range=cfg.comm_range if cfg.comm_range is not None else h.width,
        log_messages=cfg.roundlog, epoch=0,
    )
    if method == "pgda":
        net.distributed_preconditioner()
        stepper = net.run_pgda
    else:
        net.spgda_setup()
        stepper = net.run_spgda
    iterates = [np.zeros(graph.n)]
    for _ in range(cfg.iterations):
        iterates.append(stepper(1).values.copy())
    return iterates, net.total_messages(), net.rounds


def _distributed_error_curve(graph, h, y, reference, method, cfg):
    """Relative-error curve of a simulator-routed solve."""
    iterates, messages, rounds = _distributed_iterates(graph, h, y, method, cfg)
    ref = reference.values
    ref_norm = np.linalg.norm(ref)
    curve = [float(np.linalg.norm(xm - ref) / ref_norm) for xm in iterates]
    return curve, messages, rounds


# ---------------------------------------------------------------------------
# denoise: smoothing-penalty inversion on a k-NN graph
# ---------------------------------------------------------------------------


def run_denoise(cfg: ScenarioConfig) -> TrialAggregate:
    coords, values = read_points_csv(cfg.points_csv)
    if values is None:
        raise IngestError(
            f"{cfg.points_csv}: denoise scenario needs a 'value' column"
        )
    graph = knn_graph(coords, cfg.k)
    h = build_denoise_filter(graph, cfg.alpha)
    clean = Signal(graph, values)

    params = MethodParams()
    radii = {}
    for m in cfg.methods:
        prepare_params(h, m, params)
        radii[m] = _spectral_radius_of(h, m, params)

    per_curves = {m: [] for m in cfg.methods}
    diverged = {m: 0 for m in cfg.methods}
    limit_snrs = []
    clean_norm = np.linalg.norm(values)
    message_totals = {m: 0 for m in cfg.methods}
    kept_rounds = []

    for trial in range(cfg.trials):
        b = add_uniform_noise(
            clean, cfg.eta, _stream_seed(cfg.master_seed, trial, _STREAM_OBS)
        )
        x_tilde = direct_solve_oracle(h, b)
        rel_limit = np.linalg.norm(x_tilde.values - values) / clean_norm
        limit_snrs.append(
            300.0 if rel_limit <= 0 else float(min(-20.0 * np.log10(rel_limit), 300.0))
        )
        for m in cfg.methods:
            if cfg.distributed:
                iterates, messages, rounds = _distributed_iterates(
                    graph, h, b, m, cfg
                )
                per_curves[m].append(_snr_curve(iterates, values))
                message_totals[m] += messages
                if cfg.roundlog:
                    kept_rounds.extend(rounds)
            else:
                _, trace = solve(
                    h, b,
                    SolverConfig(method=m, max_iter=cfg.iterations,
                                 keep_iterates=True),
                    reference=x_tilde, params=params,
                )
                if trace.status == "diverged":
                    diverged[m] += 1
                else:
                    per_curves[m].append(_snr_curve(trace.iterates, values))

    agg = TrialAggregate(
        scenario="denoise",
        methods=cfg.methods,
        metric_name="snr",
        trials=cfg.trials,
        master_seed=cfg.master_seed,
        curves=_mean_curves(per_curves),
        mean_spectral_radius={m: float(radii[m]) for m in cfg.methods},
        limit_snr=float(np.mean(limit_snrs)),
        diverged=diverged,
        graph_info={"n": graph.n, "edges": graph.num_edges(), "k": cfg.k},
        message_totals=message_totals,
        rounds=kept_rounds if cfg.roundlog else None,
        config_echo=cfg.echo(),
    )
    for m in cfg.methods:
        curve = agg.curves[m]
        agg.iterations_to_plateau[m] = next(
            (i for i, v in enumerate(curve) if abs(v - agg.limit_snr) <= PLATEAU_DB),
            None,
        )
    return agg


# ---------------------------------------------------------------------------
# time-varying: per-epoch filters through the simulator
# ---------------------------------------------------------------------------


def run_time_varying(cfg: ScenarioConfig) -> TrialAggregate:
    n = cfg.n
    graph = generate_run_graph(n, cfg.resolved_radius(), cfg.master_seed)
    base = blockwise_polynomial(graph)
    x = add_uniform_noise(base, cfg.eta, _stream_seed(cfg.master_seed, 0, _STREAM_SIGNAL))

    filters = [
        build_fig1_filter(
            graph, cfg.gamma, _stream_seed(cfg.master_seed, t, _STREAM_EPOCH)
        )
        for t in range(cfg.epochs)
    ]
    observations = [apply(h, x) for h in filters]
    comm_range = cfg.comm_range
    if comm_range is None:
        comm_range = max(h.width for h in filters)

    epochs = sdn_run_time_varying(
        graph, filters, observations, cfg.iterations, comm_range,
        log_messages=cfg.roundlog,
    )

    rows = []
    kept_rounds = []
    for ep, h, y in zip(epochs, filters, observations):
        oracle = direct_solve_oracle(h, y)
        rel = float(
            np.linalg.norm(ep.x.values - oracle.values)
            / np.linalg.norm(oracle.values)
        )
        rows.append({
            "epoch": ep.epoch,
            "rel_error": rel,
            "messages": ep.messages,
            "rounds": ep.rounds,
        })
        if ep.round_log:
            kept_rounds.extend(ep.round_log)

    agg = TrialAggregate(
        scenario="time_varying",
        methods=("pgda",),
        metric_name="rel_error",
        trials=cfg.epochs,
        master_seed=cfg.master_seed,
        curves={"pgda": [r["rel_error"] for r in rows]},
        diverged={"pgda": 0},
        epoch_rows=rows,
        graph_info={
            "n": graph.n,
            "edges": graph.num_edges(),
            "generator_seed": list(graph.generator_seed),
        },
        message_totals={"pgda": sum(r["messages"] for r in rows)},
        rounds=kept_rounds if cfg.roundlog else None,
        config_echo=cfg.echo(),
    )
    return agg


# ---------------------------------------------------------------------------
# custom: everything from files
# ---------------------------------------------------------------------------


def run_custom(cfg: ScenarioConfig) -> TrialAggregate:
    n, edges = read_edges_csv(cfg.edges_csv)
    coords = None
    if cfg.points_csv:
        coords, _ = read_points_csv(cfg.points_csv)
    graph = Graph.from_edges(n, edges, coordinates=coords)
    h = read_filter_csv(cfg.filter_csv, graph)
    y = read_signal_csv(cfg.signal_csv, graph)
    oracle = direct_solve_oracle(h, y)

    params = MethodParams()
    per_curves = {}
    radii = {}
    diverged = {m: 0 for m in cfg.methods}
    message_totals = {m: 0 for m in cfg.methods}
    kept_rounds = []
    for m in cfg.methods:
        prepare_params(h, m, params)
        radii[m] = _spectral_radius_of(h, m, params)
        if cfg.distributed:
            curve, messages, rounds = _distributed_error_curve(
                graph, h, y, oracle, m, cfg
            )
            per_curves[m] = [curve]
            message_totals[m] += messages
            if cfg.roundlog:
                kept_rounds.extend(rounds)
            continue
        _, trace = solve(
            h, y, SolverConfig(method=m, max_iter=cfg.iterations),
            reference=oracle, params=params,
        )
        if trace.status == "diverged":
            diverged[m] += 1
            per_curves[m] = []
        else:
            per_curves[m] = [trace.relative_errors]

    agg = TrialAggregate(
        scenario="custom",
        methods=cfg.methods,
        metric_name="rel_error",
        trials=1,
        master_seed=cfg.master_seed,
        curves=_mean_curves(per_curves),
        mean_spectral_radius={m: float(radii[m]) for m in cfg.methods},
        diverged=diverged,
        graph_info={"n": graph.n, "edges": graph.num_edges()},
        message_totals=message_totals,
        rounds=kept_rounds if cfg.roundlog else None,
        config_echo=cfg.echo(),
    )
    for m in cfg.methods:
        agg.iterations_to_5pct[m] = iterations_to_threshold(
            agg.curves[m], FIVE_PCT_THRESHOLD
        )
    return agg


def run_scenario(cfg: ScenarioConfig) -> TrialAggregate:
    runner = {
        "fig1": run_fig1,
        "denoise": run_denoise,
        "time_varying": run_time_varying,
        "custom": run_custom,
    }[cfg.scenario]
    return runner(cfg)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def emit_outputs(agg: TrialAggregate, out_dir: str) -> list[str]:
    """Write curves.csv, summary.json and, when present, epochs.csv and
    roundlog.csv. Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    curves_path = os.path.join(out_dir, "curves.csv")
    write_curves_csv(curves_path, agg.curves)
    written.append(curves_path)

    summary = {
        "scenario": agg.scenario,
        "methods": list(agg.methods),
        "metric": agg.metric_name,
        "trials": agg.trials,
        "master_seed": agg.master_seed,
        "mean_spectral_radius": agg.mean_spectral_radius,
        "iterations_to_5pct": agg.iterations_to_5pct,
        "iterations_to_plateau": agg.iterations_to_plateau,
        "limit_snr": agg.limit_snr,
        "diverged": agg.diverged,
        "condition_numbers": agg.condition_numbers,
        "graph": agg.graph_info,
        "message_totals": agg.message_totals,
        "config": agg.config_echo,
    }
    summary_path = os.path.join(out_dir, "summary.json")
    write_summary_json(summary_path, summary)
    written.append(summary_path)

    if agg.epoch_rows:
        rows = ["epoch,rel_error,messages,rounds"]
        rows.extend(
            f"{r['epoch']},{r['rel_error']!r},{r['messages']},{r['rounds']}"
            for r in agg.epoch_rows
        )
        epochs_path = os.path.join(out_dir, "epochs.csv")
        atomic_write_text(epochs_path, "\n".join(rows) + "\n")
        written.append(epochs_path)

    if agg.rounds:
        roundlog_path = os.path.join(out_dir, "roundlog.csv")
        write_roundlog_csv(roundlog_path, agg.rounds)
        written.append(roundlog_path)

    return written

"""End-to-end reproduction scenarios: sweeps, reports, and figures.

A Scenario bundles the detector setting, sample sizes, families and the
classifier; run_scenario evaluates both the network and the matrix-of-
moments test on every histogram of every sweep and returns a report with
per-realization rows plus per-family summary rates. Presets cover the
linear-baseline study, the two family-sweep comparisons (ideal and lossy
detection) and the coherent/Fock mixture sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from matplotlib.figure import Figure

from .datagen import (
    family_label,
    family_name,
    generate_evaluation_set,
    generate_training_data,
)
from .mlp import (
    TrainingConfig,
    fit_linear,
    load_model,
    predict_batch,
    predict_linear,
    train,
)
from .moments import SIGNIFICANCE_THRESHOLD, moments_test
from .sampling import SampleSpec, derive_seed, derive_stream, sample_histogram
from .states import Coherent, DetectorConfig, Fock, Mixture, click_distribution

REPORT_FORMAT = "clickstats-report v1"
SUMMARY_FORMAT = "clickstats-summary v1"
BASELINE_FORMAT = "clickstats-baseline v1"

NETWORK_THRESHOLD = 0.9

# Purpose offsets for seed derivation: each (purpose, index) pair maps to
# an independent stream of the scenario's master seed.
_SEED_TRAINING_DATA = 1000
_SEED_TRAINING_INIT = 3000
_SEED_EVALUATION = 10000
_SEED_MOMENTS = 20000

_SVG_HASHSALT = "clickstats"


class ScenarioConfigError(ValueError):
    """Raised when a scenario lacks a model source or is inconsistent."""


@dataclass(frozen=True)
class Scenario:
    """One reproducible evaluation run.

    Either `model_paths` names one trained model per sample size, or
    `train_models` requests fresh training on the standard protocol.
    `mixture_photon_numbers` switches the sweep variable from the mean
    photon number to the mixing weight p of coherent/Fock mixtures.
    """

    name: str
    detector: DetectorConfig
    sample_sizes: tuple
    families: tuple = ()
    realizations: int = 1000
    nbar_range: tuple = (1.0, 16.0)
    mixture_photon_numbers: tuple = ()
    model_paths: tuple = ()
    train_models: bool = True
    training: TrainingConfig = field(default_factory=TrainingConfig)
    points_per_family: int = 1000
    threshold: float = NETWORK_THRESHOLD
    significance: float = SIGNIFICANCE_THRESHOLD
    bootstrap: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(m) for m in self.sample_sizes))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(
            self, "mixture_photon_numbers", tuple(int(n) for n in self.mixture_photon_numbers)
        )
        object.__setattr__(self, "model_paths", tuple(self.model_paths))
        if not self.sample_sizes:
            raise ScenarioConfigError("scenario needs at least one sample size")
        if self.realizations < 0:
            raise ScenarioConfigError(f"realizations must be >= 0, got {self.realizations}")
        if not self.families and not self.mixture_photon_numbers:
            raise ScenarioConfigError("scenario needs families or mixture photon numbers")
        if self.model_paths and len(self.model_paths) != len(self.sample_sizes):
            raise ScenarioConfigError(
                f"{len(self.model_paths)} model paths for {len(self.sample_sizes)} sample sizes"
            )
        if not self.model_paths and not self.train_models:
            raise ScenarioConfigError("no model paths given and training not requested")


@dataclass(frozen=True)
class ReportRow:
    """Both classifiers' results for one histogram."""

    family: str
    sample_size: int
    eta: float
    nbar: float
    p: float | None
    network_output: float
    x_mom: float
    delta_mom: float
    r_mom: float
    network_flag: bool
    moments_flag: bool


@dataclass(frozen=True)
class SummaryRow:
    """Flag rates for one (family, sample size) series."""

    family: str
    sample_size: int
    label: int
    realizations: int
    network_flag_rate: float
    moments_flag_rate: float


@dataclass(frozen=True)
class ScenarioReport:
    scenario: Scenario
    rows: tuple
    summary: tuple
    models: dict = field(default_factory=dict, compare=False)
    histories: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class BaselineRow:
    """Linear-regression score for one histogram of the baseline study."""

    family: str
    nbar: float
    score: float


def build_training_datasets(scenario, sample_size, seed_index):
    """Standard-protocol training data for one sample size of a scenario."""
    data_seed = derive_seed(scenario.seed, _SEED_TRAINING_DATA + seed_index)
    return generate_training_data(
        points_per_family=scenario.points_per_family,
        nbar_range=scenario.nbar_range,
        sample_size=sample_size,
        detector=scenario.detector,
        seed=data_seed,
    )


def train_classifier(scenario, sample_size, seed_index):
    """Train the network for one sample size; returns (model, history)."""
    train_set, val_set = build_training_datasets(scenario, sample_size, seed_index)
    config = dataclasses.replace(
        scenario.training, seed=derive_seed(scenario.seed, _SEED_TRAINING_INIT + seed_index)
    )
    return train(train_set, val_set, config, detector=scenario.detector)


def _resolve_models(scenario, models):
    """One NetworkModel per sample size: supplied, loaded, or trained."""
    resolved = dict(models or {})
    histories = {}
    for i, m in enumerate(scenario.sample_sizes):
        if m in resolved:
            continue
        if scenario.model_paths:
            resolved[m] = load_model(scenario.model_paths[i])
        else:
            resolved[m], histories[m] = train_classifier(scenario, m, i)
    return resolved, histories


def _sweep_specs(scenario):
    """Yield (family_index, display name, label, swept distributions)."""
    if scenario.mixture_photon_numbers:
        grid = (
            np.linspace(0.0, 1.0, scenario.realizations)
            if scenario.realizations > 1
            else np.zeros(scenario.realizations)
        )
        for j, n in enumerate(scenario.mixture_photon_numbers):
            states = [Mixture(float(p), Coherent(float(n)), Fock(n)) for p in grid]
            dists = [click_distribution(s, scenario.detector) for s in states]
            yield j, f"mixture_n{n}", 1, [
                (float(n), float(p), d) for p, d in zip(grid, dists)
            ]
    else:
        for j, family in enumerate(scenario.families):
            yield j, family_name(family), family_label(family), None


def _family_points(scenario, family, sample_size, eval_seed):
    """Evaluation histograms for one plain-family sweep."""
    dataset = generate_evaluation_set(
        family,
        realizations=scenario.realizations,
        nbar_range=scenario.nbar_range,
        sample_size=sample_size,
        detector=scenario.detector,
        seed=eval_seed,
    )
    return [(row.nbar, None, row.hist) for row in dataset.rows]


def _mixture_points(swept, sample_size, eval_seed):
    """Sample one histogram per mixture grid point."""
    return [
        (nbar, p, sample_histogram(dist, SampleSpec(sample_size, eval_seed, k)))
        for k, (nbar, p, dist) in enumerate(swept)
    ]


def run_scenario(scenario, *, threads=1, models=None):
    """Evaluate network and moments test over every sweep of the scenario.

    `models` may inject pre-trained networks keyed by sample size; any
    missing entry falls back to the scenario's model paths or training
    request. Rows are ordered by (sample size, family, grid point)
    independent of thread scheduling.
    """
    if threads < 1:
        raise ScenarioConfigError(f"threads must be >= 1, got {threads}")
    models, histories = _resolve_models(scenario, models)

    rows = []
    for i, m in enumerate(scenario.sample_sizes):
        model = models[m]
        for j, name, label, swept in _sweep_specs(scenario):
            eval_seed = derive_seed(scenario.seed, _SEED_EVALUATION + 100 * i + j)
            mom_seed = derive_seed(scenario.seed, _SEED_MOMENTS + 100 * i + j)
            if scenario.realizations == 0:
                continue
            if swept is None:
                points = _family_points(scenario, scenario.families[j], m, eval_seed)
            else:
                points = _mixture_points(swept, m, eval_seed)

            outputs = predict_batch(model, np.array([pt[2].freqs for pt in points]))

            def run_moments(item):
                k, (nbar, p, hist) = item
                rng = derive_stream(mom_seed, k)
                return moments_test(
                    hist, order=2, replicates=scenario.bootstrap, rng=rng
                )
            if threads == 1:
                tested = [run_moments(item) for item in enumerate(points)]
            else:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    tested = list(pool.map(run_moments, enumerate(points)))

            for (nbar, p, hist), output, result in zip(points, outputs, tested):
                rows.append(
                    ReportRow(
                        family=name,
                        sample_size=m,
                        eta=scenario.detector.efficiency,
                        nbar=float(nbar),
                        p=p,
                        network_output=float(output),
                        x_mom=result.min_eigenvalue,
                        delta_mom=result.error,
                        r_mom=result.significance,
                        network_flag=bool(output > scenario.threshold),
                        moments_flag=bool(result.significance > scenario.significance),
                    )
                )

    return ScenarioReport(
        scenario=scenario,
        rows=tuple(rows),
        summary=tuple(_summarize(scenario, rows)),
        models=models,
        histories=histories,
    )


def _summarize(scenario, rows):
    order = []
    groups = {}
    for row in rows:
        key = (row.family, row.sample_size)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    summary = []
    for family, m in order:
        group = groups[(family, m)]
        label = 1 if family.startswith("mixture") else family_label(family)
        summary.append(
            SummaryRow(
                family=family,
                sample_size=m,
                label=label,
                realizations=len(group),
                network_flag_rate=float(np.mean([r.network_flag for r in group])),
                moments_flag_rate=float(np.mean([r.moments_flag for r in group])),
            )
        )
    return summary


def run_fig3_baseline(
    detector=None,
    sample_size=1000,
    realizations=100,
    points_per_family=1000,
    nbar_range=(1.0, 16.0),
    seed=0,
):
    """Linear-regression baseline: fit on the standard protocol, then
    score `realizations` fresh histograms per family across the sweep.
    """
    detector = detector or DetectorConfig(16, 1.0)
    train_set, val_set = generate_training_data(
        points_per_family=points_per_family,
        nbar_range=nbar_range,
        sample_size=sample_size,
        detector=detector,
        seed=derive_seed(seed, _SEED_TRAINING_DATA),
    )
    # the baseline has no early stopping, so fit on train + validation
    all_rows = tuple(train_set.rows) + tuple(val_set.rows)
    features = np.array([r.hist.freqs for r in all_rows])
    labels = np.array([r.label for r in all_rows], dtype=float)
    model = fit_linear((features, labels))

    rows = []
    for j, family in enumerate(("coherent", "thermal", "fock", "squeezed")):
        dataset = generate_evaluation_set(
            family,
            realizations=realizations,
            nbar_range=nbar_range,
            sample_size=sample_size,
            detector=detector,
            seed=derive_seed(seed, _SEED_EVALUATION + j),
        )
        for row in dataset.rows:
            rows.append(
                BaselineRow(
                    family=family,
                    nbar=row.nbar,
                    score=predict_linear(model, row.hist),
                )
            )
    return model, tuple(rows)


def fig4_scenario(seed=0, **overrides):
    """Ideal detection: η=1, both sample sizes, all seven series."""
    defaults = dict(
        name="fig4",
        detector=DetectorConfig(16, 1.0),
        sample_sizes=(1000, 100),
        families=("coherent", "thermal", "fock", "squeezed",
                  "npats1", "npats2", "even_coherent"),
        realizations=1000,
        seed=seed,
    )
    defaults.update(overrides)
    return Scenario(**defaults)


def fig5_scenario(seed=0, **overrides):
    """Lossy detection: η=0.6, otherwise the fig4 layout."""
    detector = overrides.pop("detector", DetectorConfig(16, 0.6))
    return fig4_scenario(seed=seed, name="fig5", detector=detector, **overrides)


def fig6_scenario(seed=0, **overrides):
    """Coherent/Fock mixture sweep at η=1, m=1000.

    Shares the fig4 seed-derivation layout, so with the same master seed
    the m=1000 network is identical to fig4's and may be reused.
    """
    defaults = dict(
        name="fig6",
        detector=DetectorConfig(16, 1.0),
        sample_sizes=(1000,),
        mixture_photon_numbers=(3, 8, 15),
        realizations=1000,
        seed=seed,
    )
    defaults.update(overrides)
    return Scenario(**defaults)


SCENARIO_PRESETS = {
    "fig4": fig4_scenario,
    "fig5": fig5_scenario,
    "fig6": fig6_scenario,
}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


REPORT_HEADER = [
    "family", "sample_size", "eta", "nbar", "p", "network_output",
    "x_mom", "delta_mom", "r_mom", "network_flag", "moments_flag",
]

SUMMARY_HEADER = [
    "family", "sample_size", "label", "realizations",
    "network_flag_rate", "moments_flag_rate",
]

BASELINE_HEADER = ["family", "nbar", "score"]


def write_report(report, rows_path, summary_path):
    """Dump rows and summary CSVs with versioned schema lines."""
    with open(rows_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {REPORT_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for row in report.rows:
            writer.writerow([
                row.family, row.sample_size, _fmt(row.eta), _fmt(row.nbar),
                _fmt(row.p), _fmt(row.network_output), _fmt(row.x_mom),
                _fmt(row.delta_mom), _fmt(row.r_mom), _fmt(row.network_flag),
                _fmt(row.moments_flag),
            ])
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {SUMMARY_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in report.summary:
            writer.writerow([
                row.family, row.sample_size, row.label, row.realizations,
                _fmt(row.network_flag_rate), _fmt(row.moments_flag_rate),
            ])


def read_report_rows(path):
    """Parse a rows CSV back into ReportRow tuples."""
    with open(path, encoding="utf-8", newline="") as fh:
        schema = fh.readline().strip()
        if schema != f"# {REPORT_FORMAT}":
            raise ValueError(f"unexpected schema line {schema!r}")
        reader = csv.reader(fh)
        header = next(reader)
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = []
        for rec in reader:
            rows.append(
                ReportRow(
                    family=rec[0],
                    sample_size=int(rec[1]),
                    eta=float(rec[2]),
                    nbar=float(rec[3]),
                    p=None if rec[4] == "" else float(rec[4]),
                    network_output=float(rec[5]),
                    x_mom=float(rec[6]),
                    delta_mom=float(rec[7]),
                    r_mom=float(rec[8]),
                    network_flag=bool(int(rec[9])),
                    moments_flag=bool(int(rec[10])),
                )
            )
    return tuple(rows)


def write_baseline(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {BASELINE_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(BASELINE_HEADER)
        for row in rows:
            writer.writerow([row.family, _fmt(row.nbar), _fmt(row.score)])


def read_baseline(path):
    with open(path, encoding="utf-8", newline="") as fh:
        schema = fh.readline().strip()
        if schema != f"# {BASELINE_FORMAT}":
            raise ValueError(f"unexpected schema line {schema!r}")
        reader = csv.reader(fh)
        header = next(reader)
        if header != BASELINE_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        return tuple(
            BaselineRow(family=rec[0], nbar=float(rec[1]), score=float(rec[2]))
            for rec in reader
        )


def write_history(history, path):
    """Per-epoch loss CSV for one training run."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for epoch, (tr, va) in enumerate(zip(history.train_mse, history.val_mse)):
            writer.writerow([epoch, _fmt(tr), _fmt(va)])


_FAMILY_COLORS = {
    "coherent": "tab:blue",
    "thermal": "tab:orange",
    "fock": "tab:green",
    "squeezed": "tab:purple",
    "npats1": "tab:red",
    "npats2": "black",
    "even_coherent": "tab:brown",
    "mixture_n3": "tab:blue",
    "mixture_n8": "tab:olive",
    "mixture_n15": "tab:green",
}


def build_figure(report, kind):
    """Scatter panels (one per sample size) of classifier output vs sweep.

    kind "network": raw outputs with the decision threshold line.
    kind "moments": significances, negatives clamped to zero for display
    only, with the r = 3 line.
    """
    if kind not in ("network", "moments"):
        raise ValueError(f"unknown plot kind {kind!r}")
    sample_sizes = report.scenario.sample_sizes
    mixture = bool(report.scenario.mixture_photon_numbers)
    fig = Figure(figsize=(5.0 * len(sample_sizes), 3.6))
    axes = fig.subplots(1, len(sample_sizes), squeeze=False)[0]
    for ax, m in zip(axes, sample_sizes):
        for summary in report.summary:
            if summary.sample_size != m:
                continue
            rows = [r for r in report.rows
                    if r.family == summary.family and r.sample_size == m]
            x = [r.p if mixture else r.nbar for r in rows]
            if kind == "network":
                y = [r.network_output for r in rows]
            else:
                y = [max(r.r_mom, 0.0) for r in rows]
            ax.scatter(x, y, s=2.0, label=summary.family,
                       color=_FAMILY_COLORS.get(summary.family))
        threshold = (
            report.scenario.threshold if kind == "network"
            else report.scenario.significance
        )
        ax.axhline(threshold, color="gray", linewidth=1.0)
        ax.set_xlabel("mixing weight p" if mixture else "mean photon number")
        ax.set_ylabel("network output" if kind == "network" else "significance")
        ax.set_title(f"m = {m}")
        ax.legend(loc="best", fontsize=6, markerscale=3)
    fig.set_layout_engine("tight")
    return fig


def build_baseline_figure(rows):
    """Scatter of linear-regression scores vs mean photon number."""
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.subplots()
    for family in ("coherent", "thermal", "fock", "squeezed"):
        pts = [r for r in rows if r.family == family]
        if not pts:
            continue
        ax.scatter([r.nbar for r in pts], [r.score for r in pts], s=4.0,
                   label=family, color=_FAMILY_COLORS.get(family))
    for level in (0.0, 1.0):
        ax.axhline(level, color="gray", linewidth=1.0)
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("linear regression score")
    ax.legend(loc="best", fontsize=6, markerscale=3)
    fig.set_layout_engine("tight")
    return fig


def emit_plot(report, kind, path):
    """Write the figure as a deterministic SVG; empty reports warn and skip."""
    if not report.rows:
        warnings.warn("empty report, no plot emitted", stacklevel=2)
        return None
    fig = build_figure(report, kind)
    _save_svg(fig, path)
    return path


def emit_baseline_plot(rows, path):
    if not rows:
        warnings.warn("empty report, no plot emitted", stacklevel=2)
        return None
    _save_svg(build_baseline_figure(rows), path)
    return path


def _save_svg(fig, path):
    import matplotlib

    with matplotlib.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        # Date metadata would break byte-determinism across runs
        fig.savefig(path, format="svg", metadata={"Date": None})

"""Command-line interface.

Verbs: simulate (exact distributions / sampled histograms), train,
evaluate, moments (single-histogram significance), reproduce
(figure-scale studies), plot (re-render SVGs from a rows CSV). A
key=value config file can preset any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .datagen import (
    DatasetFormatError,
    family_name,
    generate_training_data,
)
from .experiments import (
    SCENARIO_PRESETS,
    Scenario,
    ScenarioConfigError,
    build_figure,
    emit_baseline_plot,
    emit_plot,
    read_report_rows,
    run_fig3_baseline,
    run_scenario,
    write_baseline,
    write_history,
    write_report,
    _save_svg,
    _summarize,
)
from .mlp import ModelFormatError, TrainingConfig, TrainingError, load_model, save_model
from .moments import moments_test
from .sampling import SampleSpec, derive_stream, histogram_header, histogram_row, sample_histogram
from .states import ConvergenceError, DetectorConfig, click_distribution, params_for_mean


def _build_state(family, nbar):
    from .datagen import _resolve_family

    tag, n = _resolve_family(family)
    if tag == "npats":
        return params_for_mean(tag, nbar, n=n)
    return params_for_mean(tag, nbar)


def read_config_file(path):
    """key=value lines; blank lines and # comments ignored."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_PARSERS = {
    "seed": int,
    "detectors": int,
    "eta": float,
    "samples": int,
    "realizations": int,
    "points_per_family": int,
    "max_epochs": int,
    "threads": int,
    "bootstrap": int,
    "threshold": float,
    "nbar": float,
    "family": str,
    "families": str,
    "model": str,
    "out": str,
}


def apply_config(args):
    """Fill argparse gaps (None values) from the config file, if any."""
    if not getattr(args, "config", None):
        return args
    values = read_config_file(args.config)
    for key, raw in values.items():
        if key not in _CONFIG_PARSERS:
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, _CONFIG_PARSERS[key](raw))
    return args


def _add_common(parser, *flags):
    if "seed" in flags:
        parser.add_argument("--seed", type=int, default=None, help="master seed")
    if "detectors" in flags:
        parser.add_argument("--detectors", type=int, default=None,
                            help="number of on-off detectors (default 16)")
    if "eta" in flags:
        parser.add_argument("--eta", type=float, default=None,
                            help="quantum efficiency (default 1.0)")
    if "samples" in flags:
        parser.add_argument("--samples", type=int, default=None,
                            help="shots per histogram (default 1000)")
    if "out" in flags:
        parser.add_argument("--out", default=None, help="output directory or file")
    if "threads" in flags:
        parser.add_argument("--threads", type=int, default=None,
                            help="worker threads for the moments test")
    if "bootstrap" in flags:
        parser.add_argument("--bootstrap", type=int, default=None,
                            help="bootstrap replicates (default 1000)")
    if "threshold" in flags:
        parser.add_argument("--threshold", type=float, default=None,
                            help="network decision threshold (default 0.9)")
    parser.add_argument("--config", default=None, help="key=value preset file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clickstats",
        description="Click-counting statistics, nonclassicality tests and "
                    "classifier experiments for multiplexed photodetection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="exact distribution or one sampled histogram")
    p.add_argument("--family", default=None,
                   help="coherent|thermal|fock|squeezed|npats1|npats2|even_coherent")
    p.add_argument("--nbar", type=float, default=None, help="mean photon number")
    _add_common(p, "seed", "detectors", "eta", "samples", "out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the network on the standard protocol")
    p.add_argument("--points-per-family", type=int, default=None,
                   dest="points_per_family", help="training rows per family (default 1000)")
    p.add_argument("--max-epochs", type=int, default=None, dest="max_epochs")
    p.add_argument("--model", default=None, help="output model path")
    _add_common(p, "seed", "detectors", "eta", "samples", "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="family sweep through a trained model")
    p.add_argument("--model", default=None, help="trained model file", required=False)
    p.add_argument("--families", default=None, help="comma-separated family list")
    p.add_argument("--realizations", type=int, default=None)
    _add_common(p, "seed", "detectors", "eta", "samples", "out", "threads",
                "bootstrap", "threshold")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("moments", help="moments significance of one histogram")
    p.add_argument("--family", default=None)
    p.add_argument("--nbar", type=float, default=None)
    _add_common(p, "seed", "detectors", "eta", "samples", "bootstrap")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("reproduce", help="run a figure-scale study end to end")
    p.add_argument("figure", choices=("fig3", "fig4", "fig5", "fig6"))
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--points-per-family", type=int, default=None,
                   dest="points_per_family")
    p.add_argument("--max-epochs", type=int, default=None, dest="max_epochs")
    p.add_argument("--model", default=None,
                   help="comma-separated model paths, one per sample size")
    _add_common(p, "seed", "samples", "out", "threads", "bootstrap", "threshold")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("plot", help="re-render SVG figures from a rows CSV")
    p.add_argument("--rows", required=True, help="rows CSV from evaluate/reproduce")
    p.add_argument("--kind", choices=("network", "moments"), default="network")
    _add_common(p, "out", "threshold")
    p.set_defaults(func=cmd_plot)

    return parser


def _detector(args):
    n = args.detectors if getattr(args, "detectors", None) is not None else 16
    eta = args.eta if getattr(args, "eta", None) is not None else 1.0
    return DetectorConfig(n, eta)


def _value(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def cmd_simulate(args):
    family = _value(args, "family", "coherent")
    nbar = _value(args, "nbar", 1.0)
    detector = _detector(args)
    samples = _value(args, "samples", 0)
    seed = _value(args, "seed", 0)
    dist = click_distribution(_build_state(family, nbar), detector)
    writer = csv.writer(sys.stdout)
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else None
    try:
        if out:
            writer = csv.writer(out)
        if samples:
            hist = sample_histogram(dist, SampleSpec(samples, seed, 0))
            writer.writerow(histogram_header(detector.n_detectors))
            writer.writerow(histogram_row(hist, 0, family_name(family), nbar))
        else:
            writer.writerow([f"p_{k}" for k in range(detector.n_detectors + 1)])
            writer.writerow([repr(float(p)) for p in dist.probs])
    finally:
        if out:
            out.close()
    return 0


def cmd_train(args):
    detector = _detector(args)
    samples = _value(args, "samples", 1000)
    seed = _value(args, "seed", 0)
    points = _value(args, "points_per_family", 1000)
    max_epochs = _value(args, "max_epochs", 2000)
    out_dir = _value(args, "out", ".")
    os.makedirs(out_dir, exist_ok=True)

    train_set, val_set = generate_training_data(
        points_per_family=points, sample_size=samples, detector=detector, seed=seed
    )
    config = TrainingConfig(max_epochs=max_epochs, seed=seed)
    from .mlp import train as train_network

    model, history = train_network(train_set, val_set, config, detector=detector)
    model_path = args.model or os.path.join(
        out_dir, f"model_m{samples}_eta{detector.efficiency:g}.json"
    )
    save_model(model, model_path)
    write_history(history, os.path.splitext(model_path)[0] + "_history.csv")
    print(f"model written to {model_path} "
          f"(best val MSE {min(history.val_mse):.6f} at epoch {history.best_epoch})")
    return 0


def cmd_evaluate(args):
    detector = _detector(args)
    families = tuple(
        f.strip() for f in _value(args, "families",
                                  "coherent,thermal,fock,squeezed").split(",")
    )
    scenario = Scenario(
        name="evaluate",
        detector=detector,
        sample_sizes=(_value(args, "samples", 1000),),
        families=families,
        realizations=_value(args, "realizations", 1000),
        model_paths=(args.model,) if args.model else (),
        train_models=False,
        threshold=_value(args, "threshold", 0.9),
        bootstrap=_value(args, "bootstrap", 1000),
        seed=_value(args, "seed", 0),
    )
    report = run_scenario(scenario, threads=_value(args, "threads", 1))
    out_dir = _value(args, "out", ".")
    os.makedirs(out_dir, exist_ok=True)
    rows_path = os.path.join(out_dir, "evaluate_rows.csv")
    write_report(report, rows_path, os.path.join(out_dir, "evaluate_summary.csv"))
    for row in report.summary:
        print(f"{row.family:15s} m={row.sample_size:5d} "
              f"network {row.network_flag_rate:.3f} moments {row.moments_flag_rate:.3f}")
    return 0


def cmd_moments(args):
    family = _value(args, "family", "coherent")
    nbar = _value(args, "nbar", 1.0)
    detector = _detector(args)
    samples = _value(args, "samples", 1000)
    seed = _value(args, "seed", 0)
    dist = click_distribution(_build_state(family, nbar), detector)
    hist = sample_histogram(dist, SampleSpec(samples, seed, 0))
    result = moments_test(
        hist,
        order=2,
        replicates=_value(args, "bootstrap", 1000),
        rng=derive_stream(seed, 1),
    )
    flag = "nonclassical" if result.flagged() else "not flagged"
    print(f"x_mom = {result.min_eigenvalue:.6e}")
    print(f"delta = {result.error:.6e}")
    print(f"r_mom = {result.significance:.4f} ({flag})")
    return 0


def cmd_reproduce(args):
    seed = _value(args, "seed", 0)
    out_dir = _value(args, "out", f"out-{args.figure}")
    os.makedirs(out_dir, exist_ok=True)

    if args.figure == "fig3":
        _, rows = run_fig3_baseline(
            realizations=_value(args, "realizations", 100),
            points_per_family=_value(args, "points_per_family", 1000),
            sample_size=_value(args, "samples", 1000),
            seed=seed,
        )
        path = os.path.join(out_dir, "fig3_baseline.csv")
        write_baseline(rows, path)
        emit_baseline_plot(rows, os.path.join(out_dir, "fig3_baseline.svg"))
        print(f"baseline report written to {path}")
        return 0

    overrides = {}
    if _value(args, "realizations", None) is not None:
        overrides["realizations"] = args.realizations
    if _value(args, "points_per_family", None) is not None:
        overrides["points_per_family"] = args.points_per_family
    if _value(args, "samples", None) is not None and args.figure != "fig6":
        overrides["sample_sizes"] = (args.samples,)
    if _value(args, "bootstrap", None) is not None:
        overrides["bootstrap"] = args.bootstrap
    if _value(args, "threshold", None) is not None:
        overrides["threshold"] = args.threshold
    if _value(args, "max_epochs", None) is not None:
        overrides["training"] = TrainingConfig(max_epochs=args.max_epochs)
    if args.model:
        overrides["model_paths"] = tuple(p.strip() for p in args.model.split(","))
        overrides["train_models"] = False

    scenario = SCENARIO_PRESETS[args.figure](seed=seed, **overrides)
    report = run_scenario(scenario, threads=_value(args, "threads", 1))

    rows_path = os.path.join(out_dir, f"{scenario.name}_rows.csv")
    write_report(report, rows_path,
                 os.path.join(out_dir, f"{scenario.name}_summary.csv"))
    for m, model in report.models.items():
        save_model(model, os.path.join(out_dir, f"{scenario.name}_m{m}_model.json"))
    for m, history in report.histories.items():
        write_history(history,
                      os.path.join(out_dir, f"{scenario.name}_m{m}_history.csv"))
    emit_plot(report, "network", os.path.join(out_dir, f"{scenario.name}_network.svg"))
    emit_plot(report, "moments", os.path.join(out_dir, f"{scenario.name}_moments.svg"))
    print(f"report written to {rows_path}")
    return 0


def cmd_plot(args):
    rows = read_report_rows(args.rows)
    if not rows:
        print("empty rows file, nothing to plot", file=sys.stderr)
        return 1
    sample_sizes = tuple(dict.fromkeys(r.sample_size for r in rows))
    families = tuple(dict.fromkeys(r.family for r in rows))
    mixture_ns = tuple(
        int(f[len("mixture_n"):]) for f in families if f.startswith("mixture_n")
    )
    scenario = Scenario(
        name="plot",
        detector=DetectorConfig(16, rows[0].eta),
        sample_sizes=sample_sizes,
        families=() if mixture_ns else families,
        mixture_photon_numbers=mixture_ns,
        realizations=len(rows) // max(1, len(sample_sizes) * len(families)),
        train_models=True,
        threshold=_value(args, "threshold", 0.9),
    )
    from .experiments import ScenarioReport

    report = ScenarioReport(
        scenario=scenario, rows=rows, summary=tuple(_summarize(scenario, rows))
    )
    out = _value(args, "out", f"plot_{args.kind}.svg")
    _save_svg(build_figure(report, args.kind), out)
    print(f"figure written to {out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = apply_config(args)
        return args.func(args)
    except (
        ValueError,
        ConvergenceError,
        ScenarioConfigError,
        ModelFormatError,
        DatasetFormatError,
        TrainingError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

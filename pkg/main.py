#!/usr/bin/env python3
"""
StGoF - Estimating the Number of Communities in a Network
=========================================================

Stepwise goodness-of-fit estimation of K under the degree-corrected block
model, with the simulation harness used to study it.

Commands:
- estimate:   estimate K for an edge-list file (optionally with the bootstrap null)
- experiment: accuracy of K_hat over a sweep of simulated networks
- calibrate:  samples of psi_n^(m) on simulated networks, with a summary
- generate:   write simulated graphs, ground-truth labels and lower-bound pairs

Exit codes: 0 accepted, 2 usage, 3 k_max exhausted, 4 statistic undefined
(no quadrilaterals), 5 input or model error, 6 bootstrap failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import ValidationError

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from models import ExperimentSpec, StgofConfig
from core.dcbm import experiment_preset, preset_names
from core.errors import BootstrapError, StatisticUndefinedError, StgofError
from core.graph import load_edge_list
from core.harness import (
    ACCURACY_SCHEMA, SAMPLES_SCHEMA, SUMMARY_SCHEMA, generate_datasets, load_comparison_csv,
    run_calibration, run_experiment, write_table,
)
from core.report import ReportGenerator
from core.stgof import estimate_k, estimate_k_star

EXIT_ACCEPTED = 0
EXIT_USAGE = 2
EXIT_KMAX = 3
EXIT_UNDEFINED = 4
EXIT_INPUT = 5
EXIT_BOOTSTRAP = 6


class StgofPipeline:
    """Runs the estimator and the simulation harness for the command line"""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet
        self.report_generator = ReportGenerator()

    def _say(self, message: str):
        if not self.quiet:
            print(message)

    def estimate(self, input_path: str, config: StgofConfig, bootstrap: int = 0,
                 format_type: str = "json", output: Optional[str] = None,
                 one_based: bool = False, timings: bool = False) -> Tuple[Dict[str, Any], int]:
        """
        Estimate K for one edge-list file and write the report.

        Returns:
            The report dict and the exit code (0 accepted, 3 k_max exhausted)
        """
        self._say(f"📁 Loading graph: {input_path}")
        graph = load_edge_list(input_path, one_based=one_based)
        self._say(f"   n={graph.n}, edges={graph.edge_count}")

        if bootstrap > 0:
            self._say(f"🔁 Running StGoF* with {bootstrap} bootstrap replicates per step")
            result = estimate_k_star(graph, config, N=bootstrap)
        else:
            result = estimate_k(graph, config)

        report = result.to_dict(input_path=input_path, include_timings=timings)
        content = self.report_generator.generate(report, format_type)
        if output:
            Path(output).parent.mkdir(parents=True, exist_ok=True)
            Path(output).write_text(content, encoding="utf-8")
            self._say(f"📝 Report written to: {output}")
        else:
            sys.stdout.write(content)

        self._print_estimate_summary(report)
        code = EXIT_ACCEPTED if result.terminated_by == "acceptance" else EXIT_KMAX
        return report, code

    def experiment(self, spec: ExperimentSpec, output: Optional[str] = None,
                   workers: Optional[int] = None, compare: Optional[str] = None) -> Path:
        comparison = load_comparison_csv(compare) if compare else None
        self._say(f"🧪 Experiment {spec.name}: {len(spec.sweep.beta_values)} sweep points x "
                  f"{spec.simulation.run.replicates} replicates")
        table = run_experiment(spec, workers=workers, progress=not self.quiet,
                               comparison=comparison)
        path = write_table(table, output or spec.outputs.csv or f"{spec.name}_accuracy.csv",
                           ACCURACY_SCHEMA)
        self._say(f"📊 Accuracy table written to: {path}")
        if not self.quiet:
            print("=" * 50)
            for row in table.itertuples():
                print(f"beta_n={row.beta_n:<8g} b_n={row.b_n:<10.4f} accuracy={row.accuracy:.2f}")
            print("=" * 50)
        return path

    def calibrate(self, spec: ExperimentSpec, output: Optional[str] = None,
                  summary_output: Optional[str] = None,
                  workers: Optional[int] = None) -> Tuple[Path, Path]:
        self._say(f"📐 Calibrating psi on {spec.name}")
        samples, summary = run_calibration(spec, workers=workers, progress=not self.quiet)
        samples_path = write_table(
            samples, output or spec.outputs.csv or f"{spec.name}_psi_samples.csv", SAMPLES_SCHEMA
        )
        summary_path = write_table(
            summary,
            summary_output or spec.outputs.summary_csv or f"{spec.name}_psi_summary.csv",
            SUMMARY_SCHEMA,
        )
        self._say(f"📊 Samples written to: {samples_path}")
        self._say(f"📊 Summary written to: {summary_path}")
        return samples_path, summary_path

    def generate(self, spec: ExperimentSpec, out_dir: Optional[str] = None) -> int:
        directory = out_dir or spec.outputs.directory or spec.name
        self._say(f"🏗️  Generating datasets into: {directory}")
        written = generate_datasets(spec, directory)
        self._say(f"✅ Wrote {len(written)} files")
        return len(written)

    def _print_estimate_summary(self, report: Dict[str, Any]):
        if self.quiet:
            return
        print(f"\n📊 Estimate Summary ({report['mode']})")
        print("=" * 50)
        print(f"Nodes: {report['n']}   Edges: {report['edges']}")
        if report["restricted_to_giant_component"]:
            print(f"⚠️  Restricted to the largest component "
                  f"({report['dropped_nodes']} nodes dropped)")
        for step in report["steps"]:
            psi = "-" if step["psi"] is None else f"{step['psi']:.4f}"
            print(f"m={step['m']:<3d} psi={psi:<12} {step['decision']}")
        if report["terminated_by"] == "acceptance":
            print(f"✅ K_hat = {report['k_hat']}")
        else:
            print(f"⚠️  No m up to k_max={report['k_max']} accepted "
                  f"(argmin psi at m={report['argmin_suggestion']})")
        print("=" * 50)


def _load_spec(args) -> ExperimentSpec:
    if args.preset:
        spec = experiment_preset(args.preset)
    elif args.spec:
        spec = ExperimentSpec.load(args.spec)
    else:
        raise argparse.ArgumentTypeError("give a spec file or --preset")

    run = {}
    if args.replicates is not None:
        run["replicates"] = args.replicates
    if args.seed is not None:
        run["seed"] = args.seed
    if run:
        # validate the overrides like a spec file
        data = spec.model_dump()
        data["simulation"]["run"].update(run)
        spec = ExperimentSpec.model_validate(data)
    return spec


def _estimator_config(args) -> StgofConfig:
    config = StgofConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8")) \
        if args.config else StgofConfig()
    overrides = {
        "alpha": args.alpha,
        "k_max": args.kmax,
        "seed": args.seed,
        "fallback": args.fallback,
        "workers": args.workers,
    }
    data = config.model_dump()
    data.update({key: value for key, value in overrides.items() if value is not None})
    return StgofConfig.model_validate(data)


def create_argument_parser():
    """Create command line argument parser"""
    parser = argparse.ArgumentParser(
        description="Estimate the number of communities with stepwise goodness-of-fit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Estimate K for an edge list
  python main.py estimate --input karate.txt

  # Bootstrap variant, Markdown report
  python main.py estimate --input polbooks.txt --bootstrap 25 --format markdown -o report.md

  # Accuracy sweep of a canonical setting
  python main.py experiment --preset 1a --replicates 20 -o exp1a.csv

  # Same sweep with accuracy columns for other methods
  python main.py experiment --preset 1a --compare others.csv -o exp1a.csv

  # Null calibration and synthetic data
  python main.py calibrate null_k2.json
  python main.py generate lower_bound.json --out ./synthetic
        """
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", "-q", action="store_true",
                        help="No status lines or progress bars")

    subparsers = parser.add_subparsers(dest="command", help="Command")

    estimate = subparsers.add_parser("estimate", help="Estimate K for an edge-list file")
    estimate.add_argument("--input", "-i", required=True, help="Edge-list file")
    estimate.add_argument("--one-based", action="store_true", help="Node ids start at 1")
    estimate.add_argument("--config", help="Estimator settings (JSON)")
    estimate.add_argument("--alpha", type=float, help="Level of each step (default 0.05)")
    estimate.add_argument("--kmax", type=int, help="Largest m to try (default 15)")
    estimate.add_argument("--bootstrap", type=int, default=0,
                          help="Bootstrap replicates per step (0 = plain StGoF)")
    estimate.add_argument("--seed", type=int, help="Seed (default 0)")
    estimate.add_argument("--fallback", choices=["error", "argmin"],
                          help="What K_hat is when no step is accepted")
    estimate.add_argument("--workers", type=int, help="Processes for bootstrap replicates")
    estimate.add_argument("--format", choices=["json", "markdown"], default="json")
    estimate.add_argument("--output", "-o", help="Report file (stdout if omitted)")
    estimate.add_argument("--timings", action="store_true", help="Add wall-clock timings")

    for name, help_text in (
        ("experiment", "Accuracy sweep over simulated networks"),
        ("calibrate", "Samples of psi_n^(m) on simulated networks"),
        ("generate", "Write simulated graphs and ground truth"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("spec", nargs="?", help="Experiment spec (JSON)")
        sub.add_argument("--preset", choices=preset_names(), help="Canonical simulation setting")
        sub.add_argument("--replicates", type=int, help="Override run.replicates")
        sub.add_argument("--seed", type=int, help="Override run.seed")
        if name == "generate":
            sub.add_argument("--out", help="Output directory")
        else:
            sub.add_argument("--output", "-o", help="CSV file")
            sub.add_argument("--workers", type=int, help="Worker processes")
        if name == "calibrate":
            sub.add_argument("--summary", help="Summary CSV file")
        if name == "experiment":
            sub.add_argument("--compare",
                             help="CSV of other methods' K estimates to compare against")

    return parser


def main(argv=None) -> int:
    """Main entry point"""
    parser = create_argument_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    pipeline = StgofPipeline(quiet=args.quiet or (args.command == "estimate" and not args.output))

    try:
        if args.command == "estimate":
            _, code = pipeline.estimate(
                input_path=args.input,
                config=_estimator_config(args),
                bootstrap=args.bootstrap,
                format_type=args.format,
                output=args.output,
                one_based=args.one_based,
                timings=args.timings,
            )
            return code

        spec = _load_spec(args)
        if args.command == "experiment":
            pipeline.experiment(spec, output=args.output, workers=args.workers,
                                compare=args.compare)
        elif args.command == "calibrate":
            pipeline.calibrate(spec, output=args.output, summary_output=args.summary,
                               workers=args.workers)
        elif args.command == "generate":
            pipeline.generate(spec, out_dir=args.out)
        return EXIT_ACCEPTED

    except argparse.ArgumentTypeError as e:
        parser.print_usage(sys.stderr)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except StatisticUndefinedError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_UNDEFINED
    except BootstrapError as e:
        print(f"❌ Bootstrap failed: {e}", file=sys.stderr)
        return EXIT_BOOTSTRAP
    except (StgofError, ValidationError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("\n⏹️  Interrupted by user", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())

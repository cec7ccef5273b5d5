"""
Command line interface to the metarec pipeline.

MIT License
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .ensemble import FilterMode, fit_ensemble, load_bundle, save_bundle, write_recommendation
from .errors import ConfigError, DataError, DomainError, MetaRecException
from .evaluation import CvConfig, family_correlation, run_cross_validation, write_correlation, write_report
from .learners import TreeParams
from .metadata import (
    align_problems, assemble_meta_dataset, feature_combinations, write_meta_dataset,
)
from .metafeatures import FamilyId, extract_all, read_feature_table, write_feature_table
from .metatarget import (
    DEFAULT_CANDIDATES, derive_meta_target, estimate_accuracy_matrix,
    load_accuracy_matrix, parse_candidate, read_meta_targets, write_accuracy_matrix,
    write_meta_targets,
)
from .synthetic import generate_corpus
from .tabular import generate_datasetoids, load_dataset, save_csv

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2

DATASET_SUFFIXES = (".csv", ".arff")
# xval pseudo-mode running the four filter modes side by side
EVERY_MODE = "every"


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.05
    mode: str = FilterMode.ACCURATE_AND_DIVERSE.value
    threshold: float = 0.5
    seed: int = 0
    min_leaf: int = 2
    max_depth: Optional[int] = None
    candidates: Tuple[str, ...] = DEFAULT_CANDIDATES
    repetitions: int = 5
    folds: int = 10
    jobs: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mode != EVERY_MODE and self.mode not in {m.value for m in FilterMode}:
            choices = ", ".join([m.value for m in FilterMode] + [EVERY_MODE])
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {choices}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ConfigError("at least one candidate is required")
        for text in self.candidates:
            parse_candidate(text)
        TreeParams(self.min_leaf, self.max_depth)

    @property
    def tree_params(self) -> TreeParams:
        return TreeParams(self.min_leaf, self.max_depth)

    @property
    def filter_modes(self) -> Tuple[FilterMode, ...]:
        if self.mode == EVERY_MODE:
            return tuple(FilterMode)
        return (FilterMode(self.mode),)

    def echo(self) -> Dict[str, Any]:
        out = asdict(self)
        out["candidates"] = list(self.candidates)
        out.pop("jobs")
        return out

    @classmethod
    def load(cls, path: Optional[str], overrides: Dict[str, Any]) -> "RunConfig":
        """JSON file values, then command line values on top."""
        values: Dict[str, Any] = {}
        if path:
            try:
                with open(path, encoding="utf-8") as fp:
                    values = json.load(fp)
            except (OSError, ValueError) as e:
                raise ConfigError(f"{path}: {e}") from e
            if not isinstance(values, dict):
                raise ConfigError(f"{path}: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from e


def setup_logging(args: argparse.Namespace) -> None:
    if args.logfile:
        handler: logging.Handler = logging.FileHandler(args.logfile)
    else:
        handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if args.verbose else logging.WARNING)


def dataset_files(source: str) -> List[Path]:
    path = Path(source)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise ConfigError(f"{source}: not a readable file or directory")
    try:
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in DATASET_SUFFIXES)
    except OSError as e:
        raise ConfigError(f"{source}: {e}") from e
    if not files:
        raise ConfigError(f"{source}: no .csv or .arff files")
    return files


def batch(items: Sequence[Path], action: Callable[[Path], Any]) -> Tuple[List[Any], List[Path]]:
    """Run action on every item, collecting results and failed items."""
    done, failed = [], []
    for item in items:
        try:
            done.append(action(item))
        except DataError as e:
            log.error("%s: %s", item, e)
            failed.append(item)
    if failed:
        log.error("%d of %d inputs failed: %s", len(failed), len(items),
                  ", ".join(p.name for p in failed))
    return done, failed


#
# commands
#
def cmd_extract(args: argparse.Namespace, config: RunConfig) -> int:
    files = dataset_files(args.datasets)

    def extract(path: Path) -> Any:
        d = load_dataset(path, target=args.target)
        log.info("extracting %s", d.name)
        return extract_all(d, config.seed, config.tree_params)

    groups, failed = batch(files, extract)
    write_feature_table(groups, args.out)
    return EXIT_DATA if failed else EXIT_OK


def cmd_accuracy(args: argparse.Namespace, config: RunConfig) -> int:
    files = dataset_files(args.datasets)
    out = Path(args.out)

    def estimate(path: Path) -> None:
        d = load_dataset(path, target=args.target)
        acc = estimate_accuracy_matrix(
            d, config.candidates, config.seed, config.repetitions, config.folds, config.jobs
        )
        write_accuracy_matrix(acc, out / f"{d.name}.csv")

    _, failed = batch(files, estimate)
    return EXIT_DATA if failed else EXIT_OK


def cmd_targets(args: argparse.Namespace, config: RunConfig) -> int:
    source = Path(args.accuracies)
    if not source.is_dir():
        raise ConfigError(f"{source}: not a directory")
    files = sorted(source.glob("*.csv"))
    if not files:
        raise ConfigError(f"{source}: no accuracy matrices")
    names: List[Tuple[str, ...]] = []

    def derive(path: Path) -> Any:
        acc = load_accuracy_matrix(path)
        if names and acc.names != names[0]:
            raise DataError(f"algorithms {acc.names} differ from {names[0]}")
        names.append(acc.names)
        return derive_meta_target(acc, config.alpha, path.stem)

    targets, failed = batch(files, derive)
    if names:
        write_meta_targets(names[0], targets, args.out)
    return EXIT_DATA if failed else EXIT_OK


def _meta_data(args: argparse.Namespace) -> Tuple[Any, Any, Tuple[str, ...]]:
    features = read_feature_table(args.features)
    algorithms, targets = read_meta_targets(args.targets)
    features, targets = align_problems(features, targets)
    return features, targets, algorithms


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    if config.mode == EVERY_MODE:
        raise ConfigError(f"mode {EVERY_MODE!r} is only valid for xval")
    features, targets, algorithms = _meta_data(args)
    combos = feature_combinations(len(FamilyId))
    if args.export:
        for combo in combos:
            m = assemble_meta_dataset(features, targets, combo, algorithms)
            write_meta_dataset(m, Path(args.export) / f"meta_{combo.combo_id:02d}.csv")
    ensemble = fit_ensemble(
        features, targets, combos, algorithms, config.tree_params,
        config.alpha, config.mode, config.seed, config.jobs,
    )
    save_bundle(ensemble, args.out, config.echo())
    return EXIT_OK


def cmd_recommend(args: argparse.Namespace, config: RunConfig) -> int:
    ensemble = load_bundle(args.bundle)
    d = load_dataset(args.dataset, target=args.target)
    group = extract_all(d, config.seed, config.tree_params)
    rec = ensemble.recommend(group, config.threshold)
    if args.out:
        write_recommendation(rec, args.out)
    else:
        rec.to_frame().to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def cmd_xval(args: argparse.Namespace, config: RunConfig) -> int:
    features, targets, algorithms = _meta_data(args)
    try:
        cv = CvConfig(
            alpha=config.alpha,
            modes=config.filter_modes,
            seed=config.seed,
            repetitions=config.repetitions,
            folds=config.folds,
            params=config.tree_params,
            precision_at=tuple(args.precision_at),
            jobs=config.jobs,
        )
    except DomainError as e:
        raise ConfigError(str(e)) from e
    report = run_cross_validation(features, targets, cv, algorithms)
    write_report(report, args.out)
    for mode, kept in report.kept.items():
        log.info("%s: %.2f models kept per algorithm", mode, kept)
    return EXIT_OK


def cmd_datasetoids(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)

    def derive(path: Path) -> int:
        d = load_dataset(path, target=args.target)
        written = 0
        for oid in generate_datasetoids(d):
            if oid.observed_classes.size < 2:
                log.warning("%s: fewer than two classes, skipped", oid.name)
                continue
            save_csv(oid, out / f"{oid.name}.csv")
            written += 1
        log.info("%s: %d datasetoids", d.name, written)
        return written

    _, failed = batch(dataset_files(args.datasets), derive)
    return EXIT_DATA if failed else EXIT_OK


def cmd_correlate(args: argparse.Namespace, config: RunConfig) -> int:
    write_correlation(family_correlation(read_feature_table(args.features)), args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    if args.count < 1:
        raise ConfigError(f"count must be >= 1, got {args.count}")
    out = Path(args.out)
    for d in generate_corpus(args.count, config.seed):
        save_csv(d, out / f"{d.name}.csv")
    return EXIT_OK


#
# argument parsing
#
def add_standard_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='log debug diagnostics')
    parser.add_argument('--logfile', metavar='FILE',
                        help='write diagnostics to FILE instead of stderr')
    parser.add_argument('--config', metavar='FILE',
                        help='JSON run configuration; flags override its values')
    parser.add_argument('--seed', type=int,
                        help='seed for every random choice (default 0)')
    parser.add_argument('--jobs', type=int,
                        help='worker processes (default: run in-process)')


def add_tree_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--min-leaf', dest='min_leaf', type=int,
                        help='smallest branch a tree split may create (default 2)')
    parser.add_argument('--max-depth', dest='max_depth', type=int,
                        help='tree depth limit (default unlimited)')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add_standard_options(common)
    tree = argparse.ArgumentParser(add_help=False)
    add_tree_options(tree)
    alpha = argparse.ArgumentParser(add_help=False)
    alpha.add_argument('--alpha', type=float, help='significance level (default 0.05)')
    target = argparse.ArgumentParser(add_help=False)
    target.add_argument('--target', help='target column (default: the last one)')
    meta = argparse.ArgumentParser(add_help=False)
    meta.add_argument('--features', required=True, help='meta-feature table')
    meta.add_argument('--targets', required=True, help='meta-target table')

    parser = argparse.ArgumentParser(
        prog='metarec', description='Recommend classification algorithms for tabular datasets')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('extract', parents=[common, tree, target],
                       help='compute meta-features of datasets')
    p.add_argument('datasets', help='dataset file or directory of .csv/.arff files')
    p.add_argument('--out', required=True, help='meta-feature CSV to write')
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser('accuracy', parents=[common, target],
                       help='estimate candidate accuracies by repeated cross-validation')
    p.add_argument('datasets', help='dataset file or directory')
    p.add_argument('--out', required=True, help='directory for the accuracy matrices')
    p.add_argument('--candidates', nargs='+', help='candidate specs, e.g. tree:min_leaf=5')
    p.add_argument('--repetitions', type=int, help='cross-validation repetitions (default 5)')
    p.add_argument('--folds', type=int, help='folds per repetition (default 10)')
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser('targets', parents=[common, alpha],
                       help='derive meta-targets from accuracy matrices')
    p.add_argument('accuracies', help='directory of accuracy-matrix CSV files')
    p.add_argument('--out', required=True, help='meta-target CSV to write')
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser('train', parents=[common, tree, alpha, meta],
                       help='train and filter the recommendation ensemble')
    p.add_argument('--mode', help='model filter: all, accurate, diverse, accurate-and-diverse')
    p.add_argument('--out', required=True, help='bundle directory to write')
    p.add_argument('--export', metavar='DIR', help='also write every meta-dataset as CSV')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('recommend', parents=[common, tree, target],
                       help='recommend algorithms for a dataset')
    p.add_argument('dataset', help='dataset file')
    p.add_argument('--bundle', required=True, help='trained bundle directory')
    p.add_argument('--threshold', type=float, help='pick algorithms above this probability')
    p.add_argument('--out', help='recommendation CSV (default: stdout)')
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser('xval', parents=[common, tree, alpha, meta],
                       help='cross-validate the ensemble against the base models')
    p.add_argument('--mode', help=f'model filter, or {EVERY_MODE!r} to compare all four')
    p.add_argument('--repetitions', type=int, help='repetitions (default 5)')
    p.add_argument('--folds', type=int, help='folds (default 10)')
    p.add_argument('--precision-at', dest='precision_at', type=int, nargs='+', default=[1],
                   help='report Precision(m) for these m (default 1)')
    p.add_argument('--out', required=True, help='report directory')
    p.set_defaults(func=cmd_xval)

    p = sub.add_parser('datasetoids', parents=[common, target],
                       help='derive datasetoids by swapping nominal attributes and target')
    p.add_argument('datasets', help='dataset file or directory')
    p.add_argument('--out', required=True, help='directory for the datasetoid CSV files')
    p.set_defaults(func=cmd_datasetoids)

    p = sub.add_parser('correlate', parents=[common],
                       help='mean absolute correlation between meta-feature families')
    p.add_argument('features', help='meta-feature table')
    p.add_argument('--out', required=True, help='correlation CSV to write')
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser('synth', parents=[common],
                       help='generate a synthetic corpus of datasets')
    p.add_argument('--count', type=int, default=200, help='number of datasets (default 200)')
    p.add_argument('--out', required=True, help='directory for the dataset CSV files')
    p.set_defaults(func=cmd_synth)
    return parser


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = {f.name for f in fields(RunConfig)}
    return {k: v for k, v in vars(args).items() if k in names and v is not None}


def metarec(argv: Optional[Sequence[str]] = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args)
    try:
        config = RunConfig.load(args.config, overrides(args))
        status = args.func(args, config)
    except (ConfigError, DomainError) as e:
        log.error("%s", e)
        status = EXIT_USAGE
    except (MetaRecException, OSError) as e:
        log.error("%s", e)
        status = EXIT_DATA
    except Exception as e:
        log.exception("%s: unexpected failure: %s", args.command, e)
        status = EXIT_DATA
    sys.exit(status)


if __name__ == '__main__':
    metarec()

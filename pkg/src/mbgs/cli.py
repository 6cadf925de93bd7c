"""Command-line interface.

Every subcommand loads its inputs, calls one library entry point and writes
the result with :func:`mbgs.dataio.write_report` (or the matching dataio
writer), so outputs are byte-identical to the equivalent library calls. Each
output ``<out>`` gets a sibling ``<out>.manifest.json`` that records the
subcommand, resolved configuration, SHA-256 of every input file, tool
version and master seed.

Config files
------------
``cv``, ``fit`` and ``baseline`` accept ``--config FILE``: one ``key = value``
per line, ``#`` starts a comment. Relative paths are resolved against the
directory holding the config file. Command-line flags override file values.

==========================  ==================================================
key                         meaning
==========================  ==================================================
genotypes                   genotype file
genotype_format             ``csv`` (default) or ``raw``
map                         map file (needed for ``kinship_kind = k3``)
phenotypes                  phenotype file
model                       ``ridge``, ``lasso``, ``enet``, ``pls``, ``gblup``
use_markov_blanket          boolean
alpha                       IAMB significance level
kinship_kind                ``k0`` .. ``k3`` (GBLUP only)
kinship_from_full_snps      boolean; GBLUP kinship from all SNPs
folds, runs, seed           outer cross-validation
inner_folds                 folds of the tuning CV
lambda1, lambda2            fixed penalties (omit to tune)
n_components                fixed PLS components (omit to tune)
lambda_cm                   LD decay scale in cM (``k3``)
window_r2_floor             LD window cut-off (``k3``)
max_region_snps             LD region size cap (``k3``)
==========================  ==================================================

Booleans accept ``true/false``, ``yes/no``, ``on/off`` and ``1/0``.

Exit status is 0 on success, 1 on a usage error and 2 on a data or
validation error (including unreadable or missing input files).
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DataError
from .dataio import (
    Table,
    load_genotypes,
    load_map,
    load_phenotypes,
    write_genotypes,
    write_kinship,
    write_map,
    write_phenotypes,
    write_report,
)
from .evaluation import PipelineConfig, cross_validate, fit_fold, random_subset_baseline, single_snp_baseline
from .kinship import KINDS, Kinship, LdWeightConfig
from .mblanket import MbConfig, iamb
from .models.tuning import FAMILIES
from .preprocess import preprocess
from .simgen import SimConfig, simulate

_PATH_KEYS = ("genotypes", "map", "phenotypes")
_BOOL_KEYS = ("use_markov_blanket", "kinship_from_full_snps")
_INT_KEYS = ("folds", "runs", "seed", "inner_folds", "n_components", "max_region_snps")
_FLOAT_KEYS = ("alpha", "lambda1", "lambda2", "lambda_cm", "window_r2_floor")
_STR_KEYS = ("model", "kinship_kind", "genotype_format")
CONFIG_KEYS = _PATH_KEYS + _BOOL_KEYS + _INT_KEYS + _FLOAT_KEYS + _STR_KEYS
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------- config


def parse_config(path):
    """Read a ``key = value`` config file into typed values."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
        value = _coerce(key, raw, f"{path}:{lineno}")
        if key in _PATH_KEYS:
            value = str(path.parent / value) if not Path(value).is_absolute() else value
        values[key] = value
    return values


def _coerce(key, raw, where):
    try:
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise DataError(f"{where}: invalid value {raw!r} for {key}") from None
    return raw


def _settings(args):
    values = parse_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _fixed_params(values):
    params = {k: values[k] for k in ("lambda1", "lambda2", "n_components") if k in values}
    if not params:
        return None
    model = values.get("model", "ridge")
    if model in ("ridge", "lasso", "enet"):
        params.setdefault("lambda1", 0.0)
        params.setdefault("lambda2", 0.0)
        params.pop("n_components", None)
    elif model == "pls":
        params = {"n_components": int(params.get("n_components", 2))}
    return params


def pipeline_config(values, tune=None):
    """Resolve config values into a :class:`PipelineConfig`."""
    ld_keys = {k: values[k] for k in ("lambda_cm", "window_r2_floor", "max_region_snps") if k in values}
    params = None if tune else _fixed_params(values)
    fields = {
        k: values[k]
        for k in ("model", "use_markov_blanket", "alpha", "kinship_kind", "kinship_from_full_snps",
                  "folds", "runs", "seed", "inner_folds")
        if k in values
    }
    return PipelineConfig(params=params, ld_config=LdWeightConfig(**ld_keys) if ld_keys else None, **fields)


# ---------------------------------------------------------------- inputs


def sha256_file(path):
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    return h.hexdigest()


def _load(values, need_phenotype=False, need_map=False):
    inputs = {}
    geno = values.get("genotypes")
    if geno is None:
        raise DataError("no genotype file given (--genotypes or 'genotypes' in the config)")
    inputs["genotypes"] = geno
    ds = load_genotypes(geno, values.get("genotype_format", "csv"))
    if values.get("map"):
        inputs["map"] = values["map"]
        ds.map = load_map(values["map"]).subset(ds.snp_ids)
    elif need_map:
        raise DataError("a map file is required (--map)")
    if values.get("phenotypes"):
        inputs["phenotypes"] = values["phenotypes"]
        ds.phenotype = load_phenotypes(values["phenotypes"], ds.individuals)
    elif need_phenotype:
        raise DataError("a phenotype file is required (--phenotypes)")
    return ds, inputs


def _report_format(args):
    if args.format:
        return args.format
    return "json" if str(args.out).endswith(".json") else "csv"


def write_manifest(out, subcommand, config, inputs, seed):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {role: {"path": str(p), "sha256": sha256_file(p)} for role, p in sorted(inputs.items())},
        "version": __version__,
        "seed": seed,
    }
    path = f"{out}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")
    return path


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args):
    lo, hi = args.maf_range
    cfg = SimConfig(args.n, args.m, args.chromosomes, args.adjacent_ld, (lo, hi), args.n_causal, args.h2,
                    args.spacing, args.seed)
    dataset, truth = simulate(cfg)
    prefix = args.out
    write_genotypes(dataset, f"{prefix}.genotypes.csv")
    write_map(dataset.map, f"{prefix}.map.csv")
    write_phenotypes(dataset.individuals, dataset.phenotype, f"{prefix}.phenotypes.csv")
    write_report(truth, f"{prefix}.truth.json", "json")
    write_manifest(prefix, "simulate", cfg.to_dict(), {}, cfg.seed)


def cmd_preprocess(args):
    values = _settings(args)
    ds, inputs = _load(values)
    out, log = preprocess(ds, args.maf_min, args.miss_max, args.k, args.r_max)
    write_genotypes(out, args.out, values.get("genotype_format", "csv"))
    if args.out_map:
        if out.map is None:
            raise DataError("--out-map needs --map")
        write_map(out.map, args.out_map)
    if args.log:
        rows = [{"step": step, "snp_id": s}
                for step, ids in (("missing", log.removed_missing), ("maf", log.removed_maf),
                                  ("pruned", log.removed_pruned))
                for s in ids]
        table = Table(("step", "snp_id"), rows, {"imputed_cells": log.imputed_cells})
        write_report(table, args.log, "json" if args.log.endswith(".json") else "csv")
    config = {"maf_min": args.maf_min, "miss_max": args.miss_max, "k": args.k, "r_max": args.r_max}
    write_manifest(args.out, "preprocess", config, inputs, None)


def cmd_select(args):
    values = _settings(args)
    ds, inputs = _load(values, need_phenotype=True)
    cfg = MbConfig(args.alpha, args.max_blanket)
    blanket = iamb(ds.X, ds.phenotype, cfg)
    rows = []
    for order, j in enumerate(blanket.selected, start=1):
        row = {"order": order, "snp_index": j, "snp_id": ds.snp_ids[j]}
        if ds.map is not None:
            row["chromosome"] = ds.map.chromosomes[j]
            pos = ds.map.positions[j]
            row["position"] = None if np.isnan(pos) else float(pos)
        rows.append(row)
    table = Table(("order", "snp_index", "snp_id", "chromosome", "position"), rows,
                  {"alpha": cfg.alpha, "size": len(blanket), "capped": blanket.capped})
    write_report(table, args.out, _report_format(args))
    if args.trail:
        trail = [{"phase": r.phase, "snp_index": r.snp, "snp_id": ds.snp_ids[r.snp] if r.snp >= 0 else None,
                  "p_value": r.p_value, "blanket_size": r.blanket_size} for r in blanket.trail]
        write_report(Table(("phase", "snp_index", "snp_id", "p_value", "blanket_size"), trail), args.trail,
                     "json" if args.trail.endswith(".json") else "csv")
    write_manifest(args.out, "select", {"alpha": cfg.alpha, "max_blanket": cfg.max_blanket}, inputs, None)


def cmd_kinship(args):
    values = _settings(args)
    ds, inputs = _load(values, need_map=args.kind == "k3")
    ld = LdWeightConfig(lambda_cm=args.lambda_cm)
    kin = Kinship(args.kind, ds.map, ld).fit(ds.X)
    write_kinship(kin.K_, ds.individuals, args.out)
    config = {"kind": args.kind, "lambda_cm": args.lambda_cm}
    write_manifest(args.out, "kinship", config, inputs, None)


_REQUIRED = {"ridge": ("lambda2",), "lasso": ("lambda1",), "enet": ("lambda1", "lambda2"),
             "pls": ("n_components",), "gblup": ()}


def cmd_fit(args):
    values = _settings(args)
    model = values.get("model", "ridge")
    if not args.tune:
        missing = [k for k in _REQUIRED.get(model, ()) if k not in values]
        if missing:
            flags = ", ".join("--" + k.replace("_", "-") for k in missing)
            raise DataError(f"model {model!r} needs {flags} or --tune")
    cfg = pipeline_config(values, tune=args.tune)
    ds, inputs = _load(values, need_phenotype=True)
    X, y, ids = ds.X, ds.phenotype, ds.individuals
    train = np.arange(ds.n)
    test = train
    if args.predict:
        new = load_genotypes(args.predict, values.get("genotype_format", "csv"))
        inputs["predict"] = args.predict
        idx = {s: j for j, s in enumerate(new.snp_ids)}
        missing = [s for s in ds.snp_ids if s not in idx]
        if missing:
            raise DataError(f"{args.predict}: SNP {missing[0]!r} is missing")
        Xnew = new.X[:, [idx[s] for s in ds.snp_ids]]
        X = np.vstack([X, Xnew])
        y = np.concatenate([y, np.full(new.n, np.nan)])
        test = np.arange(ds.n, ds.n + new.n)
        ids = new.individuals
    if np.isnan(X).any():
        raise DataError("genotypes contain missing values; run preprocess first")
    res = fit_fold(X, y, train, test, cfg, ds.map, cfg.seed, selector=None)
    rows = [{"id": i, "prediction": float(p)} for i, p in zip(ids, res.predictions)]
    table = Table(("id", "prediction"), rows, {"fit": res.to_dict(), "model": cfg.model})
    write_report(table, args.out, _report_format(args))
    write_manifest(args.out, "fit", cfg.to_dict(), inputs, cfg.seed)


def cmd_cv(args):
    values = _settings(args)
    cfg = pipeline_config(values)
    ds, inputs = _load(values, need_phenotype=True, need_map=cfg.kinship_kind == "k3" and cfg.model == "gblup")
    report = cross_validate(ds, cfg, n_jobs=args.threads, label=args.label or "")
    write_report(report, args.out, _report_format(args))
    if args.stability:
        if not report.blankets():
            raise DataError("--stability needs use_markov_blanket")
        table = report.stability(ds.snp_ids, ds.map)
        write_report(table, args.stability, "json" if args.stability.endswith(".json") else "csv")
    write_manifest(args.out, "cv", cfg.to_dict(), inputs, cfg.seed)


def cmd_baseline(args):
    values = _settings(args)
    cfg = pipeline_config(values)
    ds, inputs = _load(values, need_phenotype=True)
    size = args.size
    if size is None:
        size = len(iamb(ds.X, ds.phenotype, MbConfig(cfg.alpha)))
        if size == 0:
            raise DataError("the full-data blanket is empty; pass --size")
    if args.random:
        result = random_subset_baseline(ds, size, args.n_subsets, cfg, n_jobs=args.threads)
    else:
        _, result = single_snp_baseline(ds, size, cfg, n_jobs=args.threads)
    write_report(result, args.out, _report_format(args))
    config = {**cfg.to_dict(), "kind": "random" if args.random else "single-snp", "subset_size": size,
              "n_subsets": args.n_subsets if args.random else None}
    write_manifest(args.out, "baseline", config, inputs, cfg.seed)


# ---------------------------------------------------------------- parser


def _data_flags(p, phenotypes=True, config=False):
    if config:
        p.add_argument("--config", help="key = value pipeline config file")
    p.add_argument("--genotypes", help="genotype file")
    p.add_argument("--genotype-format", dest="genotype_format", choices=("csv", "raw"))
    p.add_argument("--map", help="map file (snp_id,chromosome,position_cM)")
    if phenotypes:
        p.add_argument("--phenotypes", help="phenotype file (id,value)")


def _out_flags(p):
    p.add_argument("--out", help="output file (required)")
    p.add_argument("--format", choices=("csv", "json"), help="report format (default from --out suffix)")


def _pipeline_flags(p):
    p.add_argument("--model", choices=FAMILIES)
    p.add_argument("--use-markov-blanket", dest="use_markov_blanket", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kinship", dest="kinship_kind", choices=KINDS)
    p.add_argument("--kinship-from-full-snps", dest="kinship_from_full_snps",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--folds", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--inner-folds", dest="inner_folds", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--n-components", dest="n_components", type=int)
    p.add_argument("--lambda", dest="lambda_cm", type=float, help="LD decay scale in cM (k3)")


def build_parser():
    parser = _Parser(prog="mbgs", description="Markov blanket selection and genomic prediction.")
    parser.add_argument("--version", action="version", version=f"mbgs {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="maximum parallel jobs (default 1)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate genotypes, map, phenotype and truth")
    p.add_argument("--out", help="output prefix (required)")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--chromosomes", type=int, default=5)
    p.add_argument("--adjacent-ld", dest="adjacent_ld", type=float, default=0.5)
    p.add_argument("--maf-range", dest="maf_range", type=float, nargs=2, default=(0.05, 0.5))
    p.add_argument("--n-causal", dest="n_causal", type=int, default=20)
    p.add_argument("--h2", type=float, default=0.5)
    p.add_argument("--spacing", type=float, default=1.0, help="map spacing in cM")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("preprocess", help="MAF/missingness filter, kNN imputation, LD pruning")
    _data_flags(p, phenotypes=False)
    p.add_argument("--out", help="output genotype file (required)")
    p.add_argument("--out-map", dest="out_map", help="write the map of the kept SNPs")
    p.add_argument("--log", help="removal log (CSV or JSON by suffix)")
    p.add_argument("--maf-min", dest="maf_min", type=float, default=0.01)
    p.add_argument("--miss-max", dest="miss_max", type=float, default=0.20)
    p.add_argument("--k", type=int, default=10, help="imputation neighbours")
    p.add_argument("--r-max", dest="r_max", type=float, default=0.90, help="pruning threshold on |r|")
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("select", help="IAMB Markov blanket of the trait")
    _data_flags(p)
    _out_flags(p)
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--max-blanket", dest="max_blanket", type=int)
    p.add_argument("--trail", help="write the admission/removal trail")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("kinship", help="kinship matrix")
    _data_flags(p, phenotypes=False)
    p.add_argument("--out", help="output kinship CSV (required)")
    p.add_argument("--kind", choices=KINDS, default="k2")
    p.add_argument("--lambda", dest="lambda_cm", type=float, default=1.0, help="LD decay scale in cM (k3)")
    p.set_defaults(handler=cmd_kinship)

    p = sub.add_parser("fit", help="fit one model and predict")
    _data_flags(p, config=True)
    _out_flags(p)
    _pipeline_flags(p)
    p.add_argument("--tune", action="store_true", help="tune hyperparameters by inner CV")
    p.add_argument("--predict", help="genotypes of individuals to predict (default: training rows)")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("cv", help="repeated k-fold cross-validation")
    _data_flags(p, config=True)
    _out_flags(p)
    _pipeline_flags(p)
    p.add_argument("--stability", help="write blanket inclusion fractions")
    p.add_argument("--label")
    p.set_defaults(handler=cmd_cv)

    p = sub.add_parser("baseline", help="random-subset or single-SNP baseline")
    _data_flags(p, config=True)
    _out_flags(p)
    _pipeline_flags(p)
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--random", action="store_true")
    kind.add_argument("--single-snp", dest="single_snp", action="store_true")
    p.add_argument("--size", type=int, help="subset size (default: full-data blanket size)")
    p.add_argument("--n-subsets", dest="n_subsets", type=int, default=100)
    p.set_defaults(handler=cmd_baseline)
    return parser


def _data_failure(exc):
    while exc is not None:
        if isinstance(exc, (DataError, ValueError, OSError)):
            return True
        exc = exc.__cause__
    return False


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(name)
    return None


def _flags(parser):
    return " ".join(sorted(o for a in parser._actions for o in a.option_strings if o.startswith("--")))


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra:
            target = _subparser(parser, getattr(args, "command", None)) or parser
            target.error(f"unrecognized arguments: {' '.join(extra)}; valid flags: {_flags(target)}")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        print(parser.format_usage() + "mbgs: error: a subcommand is required", file=sys.stderr)
        return 1
    if getattr(args, "out", "") is None:
        print(_subparser(parser, args.command).format_usage() + f"mbgs {args.command}: error: --out is required", file=sys.stderr)
        return 1
    if args.threads < 1:
        print("mbgs: error: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        args.handler(args)
    except Exception as exc:
        if not _data_failure(exc):
            raise
        print(f"mbgs: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

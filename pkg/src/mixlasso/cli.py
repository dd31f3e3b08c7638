"""Command-line surface: simulate, fit, diagnose, features.

Every command resolves its configuration (defaults < config file <
flags), writes a manifest named ``manifest.txt`` into the output
directory before doing any work, and then emits its artifacts.  The
manifest is itself a valid config file, so re-running a command with
``--config <out>/manifest.txt`` reproduces the outputs bit for bit.

Exit codes: 0 success, 1 usage problems, 2 data problems, 3 numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import as_float, as_float_list, as_int, load_config, resolve
from .diagnostics import (adjusted_rand_index, align_labels, cocluster,
                          gamma_accuracy, hierarchical_cluster,
                          order_by_mean_response, pool_selectors, relabel,
                          selection_frequency)
from .errors import DataError, DegeneracyError, MixLassoError, UsageError
from .finance import FEATURE_NAMES, StrategyParams, compute_features, \
    pnl_and_sharpe, positions
from .model import Hyperparameters
from .pgibbs import ChainConfig, run_chain
from .simulate import SimSettings, generate
from . import report, tableio

_COMMON_DEFAULTS = {"seed": "0", "out": "out"}

_SIM_KEYS = {"seed", "out", "n", "p", "K", "delta", "dof", "a", "b",
             "lambda", "phi", "dispersion"}
_SIM_DEFAULTS = {"n": "50", "p": "20", "K": "3", "delta": "2.0",
                 "dof": "4.0", "a": "2.0", "b": "4.0", "lambda": "1.0",
                 "phi": "0.5", "dispersion": ""}

_FIT_KEYS = {"seed", "out", "data", "K", "delta", "dof", "a", "b", "lambda",
             "phi", "particles", "nu_tau", "nu_s", "ess_fraction",
             "iterations", "burn_in", "thinning"}
_FIT_DEFAULTS = {"data": "", "K": "3", "delta": "2.0", "dof": "4.0",
                 "a": "2.0", "b": "4.0", "lambda": "1.0", "phi": "0.5",
                 "particles": "100", "nu_tau": "2.0", "nu_s": "3.0",
                 "ess_fraction": "0.5", "iterations": "3000",
                 "burn_in": "1000", "thinning": "1"}

_DIAG_KEYS = {"seed", "out", "chain", "truth_labels", "truth_gamma", "data",
              "K", "linkage", "alignment"}
_DIAG_DEFAULTS = {"chain": "", "truth_labels": "", "truth_gamma": "",
                  "data": "", "K": "0", "linkage": "average",
                  "alignment": "agreement"}

_FEAT_KEYS = {"seed", "out", "prices", "alpha_fast", "alpha_slow",
              "vol_decay", "trading_days", "warmup", "bp_lags", "vr_horizon",
              "ghe_max_lag", "min_returns"}
_FEAT_DEFAULTS = {"prices": "", "alpha_fast": "0.03", "alpha_slow": "0.01",
                  "vol_decay": "0.06", "trading_days": "250", "warmup": "20",
                  "bp_lags": "10", "vr_horizon": "2", "ghe_max_lag": "19",
                  "min_returns": "64"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mixlasso", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", help="64-bit RNG seed")
        p.add_argument("--out", help="output directory")

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p_sim)
    p_sim.add_argument("--K", help="number of mixture components")

    p_fit = sub.add_parser("fit", help="run the particle Gibbs sampler")
    common(p_fit)
    p_fit.add_argument("--data", help="input data.csv")
    p_fit.add_argument("--K", help="number of mixture components")
    p_fit.add_argument("--iterations", help="total sweeps")
    p_fit.add_argument("--burn-in", dest="burn_in", help="discarded sweeps")
    p_fit.add_argument("--thin", dest="thinning", help="keep every k-th sweep")
    p_fit.add_argument("--particles", help="particle count N")

    p_diag = sub.add_parser("diagnose", help="summarize chain artifacts")
    common(p_diag)
    p_diag.add_argument("--chain", help="directory with fit outputs")
    p_diag.add_argument("--K", help="clusters for the hard assignment")
    p_diag.add_argument("--truth-labels", dest="truth_labels")
    p_diag.add_argument("--truth-gamma", dest="truth_gamma")

    p_feat = sub.add_parser("features", help="price features and responses")
    common(p_feat)
    p_feat.add_argument("--prices", help="directory of date,price CSV files")
    return parser


def _resolve(args, keys: set[str], defaults: dict[str, str]) -> dict[str, str]:
    file_cfg = load_config(args.config) if args.config else {}
    flag_cfg = {k: v for k, v in vars(args).items()
                if k in keys and v is not None}
    merged = resolve({**_COMMON_DEFAULTS, **defaults}, file_cfg, flag_cfg, keys)
    unknown = merged.pop("_unknown_keys")
    if unknown:
        print(f"warning: ignoring unknown config keys: {unknown}",
              file=sys.stderr)
    return merged


def _prepare_out(cfg: dict[str, str]) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict[str, str],
                    digests: dict[str, str]) -> None:
    entries = {"command": command, "version": __version__, **cfg}
    for name, digest in digests.items():
        entries[f"digest_{name}"] = digest
    tableio.write_manifest(out / "manifest.txt", entries)


def _hyper_from(cfg: dict[str, str]) -> Hyperparameters:
    try:
        return Hyperparameters(
            K=as_int(cfg, "K"), delta=as_float(cfg, "delta"),
            dof=as_float(cfg, "dof"), a=as_float(cfg, "a"),
            b=as_float(cfg, "b"), lam=as_float(cfg, "lambda"),
            phi=as_float(cfg, "phi"),
            N=as_int(cfg, "particles") if "particles" in cfg else 100,
            nu_tau=as_float(cfg, "nu_tau") if "nu_tau" in cfg else 2.0,
            nu_s=as_float(cfg, "nu_s") if "nu_s" in cfg else 3.0,
            ess_fraction=(as_float(cfg, "ess_fraction")
                          if "ess_fraction" in cfg else 0.5))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ------------------------------------------------------------------- commands

def cmd_simulate(args) -> None:
    cfg = _resolve(args, _SIM_KEYS, _SIM_DEFAULTS)
    out = _prepare_out(cfg)
    _write_manifest(out, "simulate", cfg, {})
    hyper = _hyper_from({**cfg, "particles": "100"})
    dispersion = as_float_list(cfg, "dispersion")
    try:
        settings = SimSettings(
            n=as_int(cfg, "n"), p=as_int(cfg, "p"), K=as_int(cfg, "K"),
            hyper=hyper, seed=as_int(cfg, "seed"),
            covariate_dispersion=tuple(dispersion) if dispersion else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    draw = generate(settings)
    tableio.write_dataset(out, draw.dataset)


def cmd_fit(args) -> None:
    cfg = _resolve(args, _FIT_KEYS, _FIT_DEFAULTS)
    if not cfg["data"]:
        raise UsageError("fit requires a data file (--data or data = ...)")
    data_path = Path(cfg["data"])
    if not data_path.is_file():
        raise DataError(f"data file not found: {data_path}")
    out = _prepare_out(cfg)
    _write_manifest(out, "fit", cfg,
                    {"data": tableio.sha256_file(data_path)})
    data = tableio.read_data_csv(data_path)
    hyper = _hyper_from(cfg)
    try:
        config = ChainConfig(iterations=as_int(cfg, "iterations"),
                             burn_in=as_int(cfg, "burn_in"),
                             thinning=as_int(cfg, "thinning"),
                             seed=as_int(cfg, "seed"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    chain = run_chain(data, hyper, config)
    tableio.write_chain(out, chain)


def cmd_diagnose(args) -> None:
    cfg = _resolve(args, _DIAG_KEYS, _DIAG_DEFAULTS)
    out = _prepare_out(cfg)
    chain_dir = Path(cfg["chain"]) if cfg["chain"] else out
    z_path = chain_dir / "samples_z.csv"
    g_path = chain_dir / "samples_gamma.csv"
    if not z_path.is_file() or not g_path.is_file():
        raise DataError(f"chain artifacts not found under {chain_dir}")

    digests = {"samples_z": tableio.sha256_file(z_path),
               "samples_gamma": tableio.sha256_file(g_path)}
    truth_z = truth_gamma = None
    if cfg["truth_labels"]:
        digests["truth_labels"] = tableio.sha256_file(Path(cfg["truth_labels"]))
    if cfg["truth_gamma"]:
        digests["truth_gamma"] = tableio.sha256_file(Path(cfg["truth_gamma"]))
    _write_manifest(out, "diagnose", cfg, digests)

    zs = tableio.read_samples_z(z_path)
    gammas = tableio.read_samples_gamma(g_path)
    if zs.shape[0] != gammas.shape[0]:
        raise DataError("samples_z and samples_gamma disagree on sample count")
    if cfg["truth_labels"]:
        truth_z = tableio.read_labels_csv(Path(cfg["truth_labels"]))
        if truth_z.shape[0] != zs.shape[1]:
            raise DataError("truth labels length does not match the chain")
    if cfg["truth_gamma"]:
        truth_gamma = tableio.read_gamma_csv(Path(cfg["truth_gamma"]))

    K = as_int(cfg, "K") or gammas.shape[1]
    n = zs.shape[1]

    cc = cocluster(zs)
    tableio.write_matrix_csv(out / "cocluster.csv", cc.frequency)
    tree = hierarchical_cluster(cc.dissimilarity, linkage=cfg["linkage"])
    tableio.write_mergetree(out / "mergetree.txt", tree.merges)
    hard = tree.cut(K)
    tableio.write_csv(out / "hard_assignment_K.csv", ["item", "cluster"],
                      ([i + 1, int(hard[i]) + 1] for i in range(n)))

    reference = truth_z if truth_z is not None else hard
    ari = np.array([adjusted_rand_index(z, reference) for z in zs])
    tableio.write_csv(out / "ari.csv", ["sample", "ari"],
                      ([i + 1, v] for i, v in enumerate(ari)))

    if cfg["alignment"] == "response":
        if not cfg["data"]:
            raise UsageError("alignment = response needs the data file for y")
        y = tableio.read_data_csv(Path(cfg["data"])).y
        perms = [order_by_mean_response(z, y, K) for z in zs]
        table = pool_selectors(gammas, perms)
    elif cfg["alignment"] == "agreement":
        table = selection_frequency(gammas, zs, reference, K)
    else:
        raise UsageError("alignment must be 'agreement' or 'response'")
    sel_rows = []
    for k in range(table.shape[0]):
        order = np.argsort(-table[k, 1:], kind="stable") + 1
        sel_rows.extend([k + 1, rank + 1, f"x{j + 1}", table[k, j]]
                        for rank, j in enumerate(order))
    tableio.write_csv(out / "selection_frequency.csv",
                      ["cluster", "rank", "variable", "frequency"], sel_rows)

    sens = spec = None
    if truth_z is not None and truth_gamma is not None:
        sens = np.full(zs.shape[0], np.nan)
        spec = np.full(zs.shape[0], np.nan)
        rows = []
        for idx, (z, g) in enumerate(zip(zs, gammas)):
            perm = align_labels(z, truth_z, K)
            aligned = np.empty_like(g)
            aligned[perm] = g
            se, sp = gamma_accuracy(aligned, truth_gamma)
            sens[idx] = np.nan if se is None else se
            spec[idx] = np.nan if sp is None else sp
            rows.append([idx + 1,
                         "" if se is None else tableio.fmt(se),
                         "" if sp is None else tableio.fmt(sp)])
        tableio.write_csv(out / "gamma_accuracy.csv",
                          ["sample", "sensitivity", "specificity"], rows)

    # figures alongside the delimited output
    report.ari_histogram(ari, out / "ari_hist.png")
    report.cocluster_heatmap(cc.frequency, out / "cocluster.png")
    report.dendrogram_figure(tree, out / "dendrogram.png")
    report.selection_frequency_figure(table, out / "selection_frequency.png")
    if sens is not None:
        report.accuracy_histograms(sens, spec, out / "gamma_accuracy.png")
    trace_path = chain_dir / "trace.csv"
    if trace_path.is_file():
        header, rows = tableio.read_csv(trace_path)
        cols = {name: idx for idx, name in enumerate(header)}
        its = np.array([float(r[cols["iteration"]]) for r in rows])
        ess_min = np.array([float(r[cols["ess_min"]]) for r in rows])
        uniq = np.array([float(r[cols["unique_paths"]]) for r in rows])
        report.degeneracy_figure(its, ess_min, uniq, out / "degeneracy.png")


def cmd_features(args) -> None:
    cfg = _resolve(args, _FEAT_KEYS, _FEAT_DEFAULTS)
    if not cfg["prices"]:
        raise UsageError("features requires a price directory (--prices)")
    price_dir = Path(cfg["prices"])
    if not price_dir.is_dir():
        raise DataError(f"price directory not found: {price_dir}")
    files = sorted(price_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no .csv price files under {price_dir}")

    out = _prepare_out(cfg)
    _write_manifest(out, "features", cfg,
                    {f.stem: tableio.sha256_file(f) for f in files})

    try:
        params = StrategyParams(alpha_fast=as_float(cfg, "alpha_fast"),
                                alpha_slow=as_float(cfg, "alpha_slow"),
                                vol_decay=as_float(cfg, "vol_decay"),
                                trading_days=as_int(cfg, "trading_days"),
                                warmup=as_int(cfg, "warmup"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    feature_rows = []
    response_rows = []
    failures = []
    for path in files:
        try:
            prices, _ = tableio.read_price_csv(path)
            feats = compute_features(prices,
                                     bp_lags=as_int(cfg, "bp_lags"),
                                     vr_horizon=as_int(cfg, "vr_horizon"),
                                     ghe_max_lag=as_int(cfg, "ghe_max_lag"),
                                     min_returns=as_int(cfg, "min_returns"))
            if any(np.isnan(feats[name]) for name in FEATURE_NAMES):
                print(f"warning: {path.name}: degenerate series, excluded",
                      file=sys.stderr)
                continue
            pos = positions(prices, params)
            _, sharpe = pnl_and_sharpe(prices, pos, params.trading_days)
        except DataError as exc:
            failures.append(str(exc))
            continue
        except DegeneracyError as exc:
            print(f"warning: {path.name}: {exc}, excluded", file=sys.stderr)
            continue
        feature_rows.append([path.stem] + [feats[name] for name in FEATURE_NAMES])
        response_rows.append([path.stem, sharpe])

    if failures:
        raise DataError("malformed price files:\n  " + "\n  ".join(failures))
    if not feature_rows:
        raise DataError("no usable price series")
    tableio.write_csv(out / "features.csv",
                      ["market"] + list(FEATURE_NAMES), feature_rows)
    tableio.write_csv(out / "response.csv", ["market", "sharpe"],
                      response_rows)


_COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit,
             "diagnose": cmd_diagnose, "features": cmd_features}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except MixLassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

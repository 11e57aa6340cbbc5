"""Command-line interface.

``sigtrial simulate`` runs a Monte Carlo campaign for a scenario config and
writes operating-characteristic reports; ``sigtrial analyze`` runs the
chosen method on a real dataset CSV and writes assignments, cluster rates,
fold-averaged coefficients and permutation p-values.

Exit codes: 0 ok, 2 config/schema error, 3 I/O error, 4 internal invariant
violation.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import __version__
from ._backend import backend_name
from .errors import SigtrialError
from .inference import AlphaSplit, run_permutation_test
from .runner import run_campaign
from .scores import TrialDataset, combine_marginal, cvrs2, cvrs_marginal, make_folds
from .simengine import ScenarioConfig
from .statnum import RngStream

log = logging.getLogger("sigtrial")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

SCENARIO_FIELDS = {
    "n_subjects", "n_covariates", "k_sens1", "k_sens2", "n_overlap",
    "cluster_fractions", "control_rate", "rr1", "rr2", "sens_params",
    "nonsens_params", "noise_params", "overlap_rule", "table2_literal",
    "name",
}


class ConfigError(Exception):
    pass


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def parse_run_config(raw: dict, path: str = "<config>") -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    cfg = {
        "r_folds": int(raw.get("r_folds", 10)),
        "k_clusters": int(raw.get("k_clusters", 2)),
        "n_replications": int(raw.get("n_replications", 1000)),
        "n_permutations": int(raw.get("n_permutations", 199)),
        "seed": int(raw.get("seed", 0)),
        "threads": raw.get("threads", 1),
        "method": raw.get("method", "cvrs2"),
    }
    alphas = raw.get("alphas", {})
    cfg["alphas"] = AlphaSplit(
        alpha1=float(alphas.get("alpha1", 0.04)),
        alpha2=float(alphas.get("alpha2", 0.01)),
    )
    if cfg["method"] not in ("cvrs2", "cvrs_marginal", "both"):
        raise ConfigError(f"{path}: key 'method': unknown method {cfg['method']!r}")
    if cfg["k_clusters"] not in (2, 4):
        raise ConfigError(f"{path}: key 'k_clusters': must be 2 or 4")
    for key in ("r_folds", "n_replications", "n_permutations"):
        if cfg[key] < 1:
            raise ConfigError(f"{path}: key {key!r}: must be at least 1")
    if cfg["threads"] == "auto":
        cfg["threads"] = 0
    cfg["threads"] = int(cfg["threads"])

    if "scenario" in raw:
        scen = raw["scenario"]
        unknown = set(scen) - SCENARIO_FIELDS
        if unknown:
            raise ConfigError(
                f"{path}: key 'scenario': unknown fields {sorted(unknown)}"
            )
        for tup in ("cluster_fractions", "sens_params", "nonsens_params", "noise_params"):
            if tup in scen:
                scen[tup] = tuple(scen[tup])
        try:
            scenario = ScenarioConfig(**scen)
            scenario.validate()
        except (TypeError, SigtrialError) as exc:
            raise ConfigError(f"{path}: key 'scenario': {exc}") from exc
        cfg["scenario"] = scenario
    return cfg


def _scenario_to_dict(s: ScenarioConfig) -> dict:
    return {
        "n_subjects": s.n_subjects,
        "n_covariates": s.n_covariates,
        "k_sens1": s.k_sens1,
        "k_sens2": s.k_sens2,
        "n_overlap": s.n_overlap,
        "cluster_fractions": list(s.cluster_fractions),
        "control_rate": s.control_rate,
        "rr1": s.rr1,
        "rr2": s.rr2,
        "sens_params": list(s.sens_params),
        "nonsens_params": list(s.nonsens_params),
        "noise_params": list(s.noise_params),
        "overlap_rule": s.overlap_rule,
        "table2_literal": s.table2_literal,
        "name": s.name,
    }


def bundled_config(name: str) -> dict:
    """Load one of the packaged scenario run configs by name."""
    ref = resources.files("sigtrial.configs").joinpath(f"{name}.json")
    return json.loads(ref.read_text())


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@click.group()
@click.version_option(__version__)
def main():
    """Cross-validated risk-score trial design toolkit."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command("simulate")
@click.option("-c", "--config", "config_file", required=True, type=click.Path())
@click.option("-o", "--outdir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override config seed")
@click.option("--threads", type=int, default=None, help="override worker count")
@click.option("--replications", type=int, default=None)
@click.option("--permutations", type=int, default=None)
@click.option("--dump-scores", type=int, default=0,
              help="write per-subject scores for the first N replications")
def cmd_simulate(config_file, outdir, seed, threads, replications, permutations,
                 dump_scores):
    """Run a simulation campaign and write opchar.json / opchar.csv."""
    try:
        cfg = parse_run_config(_load_json(Path(config_file)), config_file)
        if "scenario" not in cfg:
            raise ConfigError(f"{config_file}: key 'scenario' is required for simulate")
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    if replications is not None:
        cfg["n_replications"] = replications
    if permutations is not None:
        cfg["n_permutations"] = permutations

    methods = ["cvrs2", "cvrs_marginal"] if cfg["method"] == "both" else [cfg["method"]]
    try:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        results = {}
        dumps = {}
        for method in methods:
            oc, dumped = run_campaign(
                cfg["scenario"], method, cfg["k_clusters"], cfg["r_folds"],
                cfg["seed"], cfg["n_replications"], cfg["alphas"],
                threads=cfg["threads"], dump_scores=dump_scores,
            )
            results[method] = oc
            dumps[method] = dumped

        payload = {
            "config": {
                "scenario": _scenario_to_dict(cfg["scenario"]),
                "r_folds": cfg["r_folds"],
                "k_clusters": cfg["k_clusters"],
                "alphas": {"alpha1": cfg["alphas"].alpha1, "alpha2": cfg["alphas"].alpha2},
                "n_replications": cfg["n_replications"],
                "method": cfg["method"],
            },
            "seed": cfg["seed"],
            "results": {m: oc.to_dict() for m, oc in results.items()},
        }
        _write_json(out / "opchar.json", payload)
        _write_opchar_csv(out / "opchar.csv", results)
        for method, dumped in dumps.items():
            for i, d in enumerate(dumped):
                _write_scores_csv(out / f"scores_{method}_rep{i}.csv", d)
    except SigtrialError as exc:
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(f"wrote {out / 'opchar.json'} (backend: {backend_name()})")


def _write_opchar_csv(path: Path, results: dict):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "metric", "outcome", "cluster", "value", "mc_se"])

        def fmt(v):
            return "" if v is None or (isinstance(v, float) and not np.isfinite(v)) else f"{v:.6f}"

        for method, oc in sorted(results.items()):
            d = oc.to_dict()
            for i in (0, 1):
                w.writerow([method, "power_tp", i + 1, "",
                            fmt(d["power_tp"][i]), fmt(d["mc_se"]["power_tp"][i])])
            for i in (0, 1):
                for c in range(oc.k):
                    w.writerow([method, "power_sens", i + 1, c + 1,
                                fmt(d["power_sens"][i][c]),
                                fmt(d["mc_se"]["power_sens"][i][c])])
                    w.writerow([method, "power_overall", i + 1, c + 1,
                                fmt(d["power_overall"][i][c]),
                                fmt(d["mc_se"]["power_overall"][i][c])])
            for c in range(oc.k):
                w.writerow([method, "sensitivity", "", c + 1, fmt(d["sensitivity"][c]), ""])
                w.writerow([method, "specificity", "", c + 1, fmt(d["specificity"][c]), ""])
                for i in (0, 1):
                    w.writerow([method, "est_rate", i + 1, c + 1,
                                fmt(d["est_rate"][c][i]), ""])


def _write_scores_csv(path: Path, dump):
    scores = np.atleast_2d(dump.scores.T).T
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        header = ["subject"] + [f"rs{i+1}" for i in range(scores.shape[1])]
        w.writerow(header + ["cluster", "true_cluster"])
        for i in range(scores.shape[0]):
            w.writerow(
                [i]
                + [f"{v:.10g}" for v in scores[i]]
                + [int(dump.cluster_of[i]), int(dump.true_cluster[i])]
            )


def load_data_csv(path: Path):
    """Read the analysis CSV: header id,arm,y1,y2,<covariates...>.

    Rows with missing outcomes or covariates are dropped (complete-case
    analysis) with a logged count.  Raises ConfigError on schema violations.
    """
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        if len(header) < 5 or [h.strip() for h in header[:4]] != ["id", "arm", "y1", "y2"]:
            raise ConfigError(
                f"{path}: header must start with id,arm,y1,y2 followed by covariates"
            )
        names = [h.strip() for h in header[4:]]
        ids, arms, y1s, y2s, covs = [], [], [], [], []
        dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            cells = [c.strip() for c in row]
            if any(c in ("", "NA", "NaN", "nan") for c in cells[1:]):
                dropped += 1
                continue
            try:
                arm, v1, v2 = int(cells[1]), int(cells[2]), int(cells[3])
                xs = [float(c) for c in cells[4:]]
            except ValueError as exc:
                raise ConfigError(f"{path}: row {lineno}: {exc}") from None
            if arm not in (0, 1) or v1 not in (0, 1) or v2 not in (0, 1):
                raise ConfigError(
                    f"{path}: row {lineno}: arm and outcomes must be 0/1"
                )
            ids.append(cells[0])
            arms.append(arm)
            y1s.append(v1)
            y2s.append(v2)
            covs.append(xs)
        if dropped:
            log.info("dropped %d rows with missing values", dropped)
        if not ids:
            raise ConfigError(f"{path}: no complete-case rows")
        dataset = TrialDataset(
            arm=np.array(arms), y1=np.array(y1s), y2=np.array(y2s),
            covariates=np.array(covs), covariate_names=names,
        )
        return ids, dataset, dropped


@main.command("analyze")
@click.option("-c", "--config", "config_file", required=True, type=click.Path())
@click.option("-d", "--data", "data_csv", required=True, type=click.Path())
@click.option("-o", "--outdir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--permutations", type=int, default=None)
def cmd_analyze(config_file, data_csv, outdir, seed, threads, permutations):
    """Analyze a real dataset CSV; write assignments, rates, coefficients
    and permutation p-values."""
    try:
        cfg = parse_run_config(_load_json(Path(config_file)), config_file)
        ids, dataset, dropped = load_data_csv(Path(data_csv))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (OSError, SigtrialError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    if seed is not None:
        cfg["seed"] = seed
    if permutations is not None:
        cfg["n_permutations"] = permutations

    method = cfg["method"] if cfg["method"] != "both" else "cvrs2"
    k = cfg["k_clusters"]
    rng = RngStream(cfg["seed"], 0)
    try:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        folds = make_folds(dataset.n, cfg["r_folds"], rng)
        if method == "cvrs2":
            cv = cvrs2(dataset, folds, k, rng)
            scores = cv.scores
            assignment = cv.assignment
            coef_means = cv.fold_coefs.mean(axis=0)  # (J, 2)
        else:
            c1 = cvrs_marginal(dataset, 1, folds, rng.child("m1"))
            c2 = cvrs_marginal(dataset, 2, folds, rng.child("m2"))
            scores = np.column_stack([c1.scores, c2.scores])
            assignment = (
                combine_marginal(c1.assignment, c2.assignment)
                if k == 4 else c1.assignment
            )
            coef_means = np.column_stack(
                [c1.fold_coefs.mean(axis=0), c2.fold_coefs.mean(axis=0)]
            )

        with (out / "assignments.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "rs1", "rs2", "cluster"])
            for i, sid in enumerate(ids):
                w.writerow([sid, f"{scores[i, 0]:.10g}", f"{scores[i, 1]:.10g}",
                            int(assignment.cluster_of[i])])

        with (out / "cluster_rates.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cluster", "arm", "n", "rate_y1", "rate_y2"])
            for c in range(1, k + 1):
                for arm in (0, 1):
                    cell = (assignment.cluster_of == c) & (dataset.arm == arm)
                    m = int(cell.sum())
                    r1 = f"{dataset.y1[cell].mean():.6f}" if m else ""
                    r2 = f"{dataset.y2[cell].mean():.6f}" if m else ""
                    w.writerow([c, arm, m, r1, r2])

        with (out / "coefficients.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["covariate", "coef_outcome1", "coef_outcome2"])
            for j, name in enumerate(dataset.covariate_names):
                w.writerow([name, f"{coef_means[j, 0]:.6f}", f"{coef_means[j, 1]:.6f}"])

        clusters = range(1, k + 1) if k == 4 else [2]
        perm = {}
        for c in clusters:
            pvals = run_permutation_test(
                dataset, method, k, c, cfg["n_permutations"],
                rng.child("permtest", c), r_folds=cfg["r_folds"],
            )
            perm[str(c)] = {"outcome1": float(pvals[0]), "outcome2": float(pvals[1])}
        _write_json(out / "permutation.json", {
            "method": method,
            "k": k,
            "n_permutations": cfg["n_permutations"],
            "seed": cfg["seed"],
            "dropped_rows": dropped,
            "p_values": perm,
        })
    except SigtrialError as exc:
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(f"wrote {out / 'assignments.csv'} (backend: {backend_name()})")


if __name__ == "__main__":
    main()

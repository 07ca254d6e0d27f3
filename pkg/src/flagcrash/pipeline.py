"""Configuration loading and end-to-end pipeline orchestration.

Every stage reads and writes files through the same functions the
standalone CLI commands use, so a pipeline run is exactly reproducible by
chaining the individual commands on the intermediate files.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import platform
from configparser import ConfigParser
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

import numpy as np

from . import __version__, archive, corrnet, gnn, tables
from .charts import monthly_counts_svg
from .corrnet import CcmParams
from .detectors import lof_scores, mahalanobis_scores
from .errors import ConfigError, StageError
from .evaluation import (
    DEFAULT_LOOKBACK,
    DEFAULT_PERCENTILE,
    BUILTIN_EVENT_FILES,
    EventList,
    load_events,
    metrics,
    threshold_anomalies,
)
from .features import fit_pca, project_matrix
from .ingest import (
    align_and_filter,
    log_returns,
    parse_price_csv,
    read_returns_csv,
    write_returns_csv,
)
from .ph import tda_features


@dataclass
class PipelineConfig:
    prices_path: str
    events_path: str
    start: date
    end: date
    min_coverage: float = 1.0
    window: int = 25
    correlation: str = "ccm"
    ccm_params: CcmParams = field(default_factory=CcmParams)
    tda_norms: tuple[str, ...] = ("l1", "l2")
    essential: str = "drop"
    pca_dims: tuple[str, ...] = ("raw", "10", "100")
    detectors: tuple[str, ...] = ("mahalanobis", "lof")
    lof_k: tuple[int, ...] = (5, 10, 15, 20, 25, 30)
    gnn_models: tuple[str, ...] = ()
    ocgin_lr: tuple[float, ...] = (0.01, 0.001, 0.0001, 0.00001)
    ocgin_weight_decay: tuple[float, ...] = (0.001, 0.0001, 0.00001, 0.000001)
    ocgin_batch: tuple[int, ...] = (25, 50, 100)
    ocgin_layers: tuple[int, ...] = (2, 3)
    glocal_lr: tuple[float, ...] = (0.01, 0.001, 0.0001, 0.00001)
    glocal_batch: tuple[int, ...] = (25, 50, 100)
    glocal_layers: tuple[int, ...] = (2, 3)
    glocal_lambda: tuple[float, ...] = (0.1, 0.5, 0.9)
    hidden: int = 10
    epochs: int = 150
    percentile: float = DEFAULT_PERCENTILE
    lookback: int = DEFAULT_LOOKBACK
    output_dir: str = "runs"
    seed: int = 7
    raw_text: str = ""

    def validate(self) -> None:
        if self.correlation not in ("ccm", "pearson"):
            raise ConfigError(f"correlation must be ccm or pearson, got {self.correlation!r}")
        if self.essential not in ("drop", "cap"):
            raise ConfigError(f"essential must be drop or cap, got {self.essential!r}")
        feature_branch = bool(self.tda_norms or self.pca_dims) and bool(self.detectors)
        if not feature_branch and not self.gnn_models:
            raise ConfigError("config selects no feature/detector or gnn branch")
        for m in self.gnn_models:
            if m not in ("ocgin", "glocalkd"):
                raise ConfigError(f"unknown gnn model {m!r}")
        for m in self.detectors:
            if m not in ("mahalanobis", "lof"):
                raise ConfigError(f"unknown detector {m!r}")
        for norm in self.tda_norms:
            if norm not in ("l1", "l2"):
                raise ConfigError(f"unknown tda norm {norm!r}")
        for dim in self.pca_dims:
            if dim != "raw" and not dim.isdigit():
                raise ConfigError(f"pca dim must be 'raw' or an integer, got {dim!r}")
        if not Path(self.prices_path).exists():
            raise ConfigError(f"prices file {self.prices_path} does not exist")
        if (
            self.events_path.lower() not in BUILTIN_EVENT_FILES
            and not Path(self.events_path).exists()
        ):
            raise ConfigError(f"events file {self.events_path} does not exist")

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode("utf-8")).hexdigest()[:12]


def _split(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw_text = path.read_text(encoding="utf-8")
    parser = ConfigParser()
    parser.read_string(raw_text)

    def get(section, key, fallback):
        return parser.get(section, key, fallback=fallback)

    try:
        cfg = PipelineConfig(
            prices_path=parser.get("data", "prices"),
            events_path=parser.get("data", "events"),
            start=date.fromisoformat(parser.get("data", "start")),
            end=date.fromisoformat(parser.get("data", "end")),
            min_coverage=float(get("data", "min_coverage", "1.0")),
            window=int(get("network", "window", "25")),
            correlation=get("network", "correlation", "ccm"),
            ccm_params=CcmParams(
                embedding_dim=int(get("network", "ccm_embedding", "2")),
                lag=int(get("network", "ccm_lag", "1")),
            ),
            tda_norms=_split(get("features", "tda_norms", "l1,l2")),
            essential=get("features", "essential", "drop"),
            pca_dims=_split(get("features", "pca_dims", "raw,10,100")),
            detectors=_split(get("detectors", "methods", "mahalanobis,lof")),
            lof_k=tuple(int(k) for k in _split(get("detectors", "lof_k", "5,10,15,20,25,30"))),
            gnn_models=_split(get("gnn", "models", "")),
            ocgin_lr=tuple(float(v) for v in _split(get("gnn", "ocgin_lr", "0.01,0.001,0.0001,0.00001"))),
            ocgin_weight_decay=tuple(
                float(v) for v in _split(get("gnn", "ocgin_weight_decay", "0.001,0.0001,0.00001,0.000001"))
            ),
            ocgin_batch=tuple(int(v) for v in _split(get("gnn", "ocgin_batch", "25,50,100"))),
            ocgin_layers=tuple(int(v) for v in _split(get("gnn", "ocgin_layers", "2,3"))),
            glocal_lr=tuple(float(v) for v in _split(get("gnn", "glocal_lr", "0.01,0.001,0.0001,0.00001"))),
            glocal_batch=tuple(int(v) for v in _split(get("gnn", "glocal_batch", "25,50,100"))),
            glocal_layers=tuple(int(v) for v in _split(get("gnn", "glocal_layers", "2,3"))),
            glocal_lambda=tuple(float(v) for v in _split(get("gnn", "glocal_lambda", "0.1,0.5,0.9"))),
            hidden=int(get("gnn", "hidden", "10")),
            epochs=int(get("gnn", "epochs", "150")),
            percentile=float(get("eval", "percentile", str(DEFAULT_PERCENTILE))),
            lookback=int(get("eval", "lookback", str(DEFAULT_LOOKBACK))),
            output_dir=get("run", "output_dir", "runs"),
            seed=int(get("run", "seed", "7")),
            raw_text=raw_text,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc
    except ConfigError:
        raise
    except Exception as exc:  # configparser errors
        raise ConfigError(f"bad config {path}: {exc}") from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# standalone stages (file in, file out)


def stage_ingest(prices_path, start, end, min_coverage, out_path) -> None:
    with open(prices_path, "r", encoding="utf-8") as f:
        table = parse_price_csv(f)
    table = align_and_filter(table, start, end, min_coverage)
    write_returns_csv(log_returns(table), out_path)


def stage_graphs(
    returns_path, window, kind, ccm_params: CcmParams, out_path, jobs: int = 1
) -> None:
    returns = read_returns_csv(returns_path)
    matrices = corrnet.correlation_series(
        returns, width=window, kind=kind, ccm_params=ccm_params, jobs=jobs
    )
    graphs = corrnet.graph_series(matrices)
    archive.write_graphs(
        out_path,
        graphs,
        params={
            "window": window,
            "correlation": kind,
            "ccm_embedding": ccm_params.embedding_dim,
            "ccm_lag": ccm_params.lag,
            "tickers": returns.tickers,
        },
    )


def stage_tda(graphs_path, essential, out_path, jobs: int = 1) -> None:
    graphs, _ = archive.read_graphs(graphs_path)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        fn = partial(_tda_one, essential)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            feats = list(pool.map(fn, graphs, chunksize=16))
    else:
        feats = tda_features(graphs, essential=essential)
    tables.write_feature_csv(
        out_path,
        [f.as_of_date for f in feats],
        ["l1_h0", "l2_h0", "l1_h1", "l2_h1"],
        [f.values() for f in feats],
    )


def _tda_one(essential, g):
    return tda_features([g], essential=essential)[0]


def stage_pca(graphs_path, dim: str, out_path) -> None:
    graphs, params = archive.read_graphs(graphs_path)
    kind = params.get("correlation", "ccm")
    dates = [g.as_of_date for g in graphs]
    data = np.stack(
        [corrnet.matrix_from_digraph(g, kind).reshape(-1) for g in graphs]
    )
    if dim == "raw":
        values = data
    else:
        model = fit_pca(data, int(dim))
        values = project_matrix(model, data)
    columns = [f"c{i + 1}" for i in range(values.shape[1])]
    tables.write_feature_csv(out_path, dates, columns, values)


def stage_score(features_path, method: str, lof_k: int, out_path) -> None:
    dates, _, values = tables.read_feature_csv(features_path)
    if method == "mahalanobis":
        series = mahalanobis_scores(dates, values)
    elif method == "lof":
        series = lof_scores(dates, values, k=lof_k)
    else:
        raise ConfigError(f"unknown scoring method {method!r}")
    tables.write_scores_csv(out_path, series.dates, series.scores)


def stage_gnn(
    graphs_path,
    model: str,
    out_path,
    lr: float = 0.001,
    weight_decay: float = 1e-4,
    lam: float = 0.1,
    layers: int = 3,
    hidden: int = 10,
    batch: int = 50,
    epochs: int = 150,
    seed: int = 7,
    checkpoint_path=None,
) -> None:
    graphs, _ = archive.read_graphs(graphs_path)
    attributed = gnn.attribute_graphs(graphs)
    dates = [g.as_of_date for g in graphs]
    if model == "ocgin":
        state = gnn.ocgin_train(
            attributed,
            gnn.OcginConfig(
                lr=lr,
                weight_decay=weight_decay,
                batch_size=batch,
                layers=layers,
                hidden=hidden,
                epochs=epochs,
                seed=seed,
            ),
        )
        scores = gnn.ocgin_scores(state, attributed)
    elif model == "glocalkd":
        state = gnn.glocalkd_train(
            attributed,
            gnn.GlocalConfig(
                lr=lr,
                batch_size=batch,
                layers=layers,
                hidden=hidden,
                lam=lam,
                epochs=epochs,
                seed=seed,
            ),
        )
        scores = gnn.glocalkd_scores(state, attributed)
    else:
        raise ConfigError(f"unknown gnn model {model!r}")
    if checkpoint_path is not None:
        from .checkpoint import save_checkpoint

        save_checkpoint(state, checkpoint_path)
    tables.write_scores_csv(out_path, dates, scores)


def stage_evaluate(
    scores_path,
    events: EventList,
    percentile: float,
    lookback: int,
    method: str,
    report_path,
    chart_path=None,
) -> dict:
    from .detectors import AnomalySeries

    dates, scores = tables.read_scores_csv(scores_path)
    series = AnomalySeries(dates=dates, scores=scores, method_tag=method)
    flags = threshold_anomalies(series, percentile)
    report = metrics(flags, dates, events, lookback, method=method)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    if chart_path is not None:
        monthly_counts_svg(
            report.monthly_counts,
            [(e.label, e.resolved_date()) for e in events.events],
            title=method,
            path=chart_path,
            span=(dates[0], dates[-1]),
        )
    return report.to_dict()


# ---------------------------------------------------------------------------
# full pipeline


def _run_gnn_task(task) -> None:
    graphs_bin, out, hidden, epochs, seed, params = task
    stage_gnn(
        graphs_bin, params["model"], out,
        lr=params["lr"], weight_decay=params.get("weight_decay", 0.0),
        lam=params.get("lam", 0.1), layers=params["layers"], hidden=hidden,
        batch=params["batch"], epochs=epochs, seed=seed,
    )


def _slug(method: str) -> str:
    out = []
    for ch in method:
        out.append(ch if ch.isalnum() or ch in ".+-" else "_")
    return "".join(out).strip("_")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _make_run_dir(config: PipelineConfig) -> Path:
    base = Path(config.output_dir)
    base.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    name = f"{stamp}-{config.config_hash()}"
    run_dir = base / name
    suffix = 0
    while run_dir.exists():
        suffix += 1
        run_dir = base / f"{name}-{suffix}"
    run_dir.mkdir()
    return run_dir


def run_pipeline(config: PipelineConfig, jobs: int = 1) -> Path:
    """Execute every configured branch; returns the run directory."""
    config.validate()
    run_dir = _make_run_dir(config)
    stage = "setup"
    try:
        events = load_events(config.events_path)

        stage = "ingest"
        returns_csv = run_dir / "returns.csv"
        stage_ingest(
            config.prices_path, config.start, config.end, config.min_coverage, returns_csv
        )

        stage = "graphs"
        graphs_bin = run_dir / "graphs.bin"
        stage_graphs(
            returns_csv, config.window, config.correlation, config.ccm_params,
            graphs_bin, jobs=jobs,
        )

        feature_files: dict[str, Path] = {}
        if config.tda_norms:
            stage = "tda"
            tda_csv = run_dir / "tda.csv"
            stage_tda(graphs_bin, config.essential, tda_csv, jobs=jobs)
            dates, columns, values = tables.read_feature_csv(tda_csv)
            for norm in config.tda_norms:
                sel = [f"{norm}_h0", f"{norm}_h1"]
                idx = [columns.index(c) for c in sel]
                branch_csv = run_dir / f"tda_{norm}.csv"
                tables.write_feature_csv(branch_csv, dates, sel, values[:, idx])
                feature_files[f"tda-{norm}"] = branch_csv
        if config.pca_dims:
            stage = "pca"
            for dim in config.pca_dims:
                branch_csv = run_dir / f"pca_{dim}.csv"
                stage_pca(graphs_bin, dim, branch_csv)
                feature_files[f"pca-{dim}"] = branch_csv

        stage = "score"
        score_files: dict[str, Path] = {}
        for branch, feature_csv in feature_files.items():
            for det in config.detectors:
                if det == "mahalanobis":
                    method = f"{branch}+mahalanobis"
                    out = run_dir / f"scores_{_slug(method)}.csv"
                    stage_score(feature_csv, "mahalanobis", 0, out)
                    score_files[method] = out
                else:
                    for k in config.lof_k:
                        method = f"{branch}+lof-k{k}"
                        out = run_dir / f"scores_{_slug(method)}.csv"
                        stage_score(feature_csv, "lof", k, out)
                        score_files[method] = out

        stage = "gnn"
        gnn_jobs: list[tuple[str, dict]] = []
        if "ocgin" in config.gnn_models:
            grid = itertools.product(
                config.ocgin_lr, config.ocgin_weight_decay,
                config.ocgin_batch, config.ocgin_layers,
            )
            for lr, wd, batch, layers in grid:
                method = f"ocgin lr={lr:g} wd={wd:g} batch={batch} layers={layers}"
                gnn_jobs.append(
                    (method, dict(model="ocgin", lr=lr, weight_decay=wd,
                                  batch=batch, layers=layers))
                )
        if "glocalkd" in config.gnn_models:
            grid = itertools.product(
                config.glocal_lr, config.glocal_lambda,
                config.glocal_batch, config.glocal_layers,
            )
            for lr, lam, batch, layers in grid:
                method = f"glocalkd lr={lr:g} lambda={lam:g} batch={batch} layers={layers}"
                gnn_jobs.append(
                    (method, dict(model="glocalkd", lr=lr, lam=lam,
                                  batch=batch, layers=layers))
                )
        tasks = []
        for method, params in gnn_jobs:
            out = run_dir / f"scores_{_slug(method)}.csv"
            score_files[method] = out
            tasks.append((graphs_bin, out, config.hidden, config.epochs, config.seed, params))
        if tasks:
            if jobs > 1:
                from concurrent.futures import ProcessPoolExecutor

                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    list(pool.map(_run_gnn_task, tasks))
            else:
                for task in tasks:
                    _run_gnn_task(task)

        stage = "evaluate"
        rows = []
        for method, scores_csv in sorted(score_files.items()):
            slug = _slug(method)
            report = stage_evaluate(
                scores_csv, events, config.percentile, config.lookback, method,
                run_dir / f"report_{slug}.json", run_dir / f"chart_{slug}.svg",
            )
            rows.append(
                {
                    "method": method,
                    "family": method.split("+")[0].split(" ")[0],
                    "precision": report["precision"],
                    "recall": report["recall"],
                    "f_score": report["f_score"],
                }
            )

        stage = "report"
        results_csv = run_dir / "results.csv"
        with open(results_csv, "w", encoding="utf-8") as f:
            f.write("method,family,precision,recall,f_score\n")
            for r in rows:
                f.write(
                    f"{r['method']},{r['family']},{r['precision']:.6f},"
                    f"{r['recall']:.6f},{r['f_score']:.6f}\n"
                )
        best: dict[str, dict] = {}
        for r in rows:
            cur = best.get(r["family"])
            if cur is None or r["f_score"] > cur["f_score"]:
                best[r["family"]] = r
        with open(run_dir / "summary.csv", "w", encoding="utf-8") as f:
            f.write("family,best_method,precision,recall,f_score\n")
            for family in sorted(best):
                r = best[family]
                f.write(
                    f"{family},{r['method']},{r['precision']:.6f},"
                    f"{r['recall']:.6f},{r['f_score']:.6f}\n"
                )

        manifest = {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "versions": {
                "flagcrash": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "outputs": {
                p.name: _sha256(p)
                for p in sorted(run_dir.iterdir())
                if p.suffix in (".csv", ".json", ".bin", ".svg")
                and p.name != "manifest.json"
            },
        }
        with open(run_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
    except Exception as exc:
        with open(run_dir / "FAILED", "w", encoding="utf-8") as f:
            f.write(f"stage: {stage}\ncause: {exc}\n")
        raise StageError(stage, exc) from exc
    return run_dir

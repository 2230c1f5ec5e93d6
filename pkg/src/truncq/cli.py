"""Command line client for the estimation service.

Every subcommand builds a request from a YAML config file (flags win over
file values), sends it to the service, and writes CSV outputs plus an echo
of the fully resolved config.  By default the service runs in-process
through its ASGI interface; ``--server URL`` targets a remote instance
started with ``truncq serve``.

Exit codes: 0 success, 1 usage or config error, 2 assertion failure
(``rate --assert``), 3 runtime or numeric error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx
import yaml
from pydantic import ValidationError

from .errors import TruncqError
from .service import schemas

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSERT = 2
EXIT_RUNTIME = 3

DEFAULT_SLOPE_WINDOWS = {
    "mu": (-0.65, -0.35),
    "cdf": (-0.55, -0.25),
    "quantile": (-0.55, -0.25),
}


class ConfigFailure(click.ClickException):
    exit_code = EXIT_CONFIG


class AssertionFailure(click.ClickException):
    exit_code = EXIT_ASSERT


class RuntimeFailure(click.ClickException):
    exit_code = EXIT_RUNTIME


# -- config models (file contract = wire contract + output settings) --------

class GenerateConfig(schemas.GenerateRequest):
    output_dir: str = "generate-out"


class QueriesSpec(schemas.StrictModel):
    """Quantile queries: the cross product of x and p, plus explicit pairs."""

    x: list[float] = []
    p: list[float] = [0.5]
    pairs: list[tuple[float, float]] = []

    def points(self) -> list[tuple[float, float]]:
        pts = [(xv, pv) for xv in self.x for pv in self.p]
        pts.extend((float(a), float(b)) for a, b in self.pairs)
        return pts


class FitQueryConfig(schemas.StrictModel):
    dataset: Optional[str] = None
    estimator: Optional[str] = None  # serialized estimator instead of a dataset
    latent_size: Optional[int] = None
    kernel: str = "epanechnikov"
    smoother: str = "integrated_biweight"
    bandwidth: schemas.BandwidthSpec = schemas.BandwidthSpec()
    queries: QueriesSpec = QueriesSpec()
    search_interval: Optional[tuple[float, float]] = None
    tolerance: Optional[float] = None
    output_dir: str = "fit-out"
    save_estimator: Optional[str] = None
    export_curves: bool = False


class SlopeWindows(schemas.StrictModel):
    mu: tuple[float, float] = DEFAULT_SLOPE_WINDOWS["mu"]
    cdf: tuple[float, float] = DEFAULT_SLOPE_WINDOWS["cdf"]
    quantile: tuple[float, float] = DEFAULT_SLOPE_WINDOWS["quantile"]

    def window_for(self, metric: str) -> tuple[float, float]:
        if metric == "mu_error":
            return self.mu
        if metric == "cdf_sup_error":
            return self.cdf
        return self.quantile


class RateConfig(schemas.RateRequest):
    output_dir: str = "rate-out"
    slope_windows: SlopeWindows = SlopeWindows()


# -- service client ----------------------------------------------------------

class ServiceClient:
    """Thin HTTP client; embedded in-process app unless a server is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        try:
            resp = self._client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            raise RuntimeFailure(f"cannot reach service: {exc}")
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise RuntimeFailure(f"service error {resp.status_code}: {detail}")
        return resp.json()


# -- shared helpers ----------------------------------------------------------

def _load_yaml(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigFailure(f"cannot read config file: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigFailure(f"malformed YAML in {path}: {exc}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigFailure(f"{path}: top level must be a mapping")
    return data


def _build_config(model_cls, raw: dict, overrides: dict):
    merged = dict(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = merged
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigFailure(f"config key {part!r} must be a mapping to accept overrides")
            target = node
        target[leaf] = value
    try:
        return model_cls(**merged)
    except ValidationError as exc:
        issues = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigFailure(f"invalid config: {issues}")
    except TypeError as exc:
        raise ConfigFailure(f"invalid config: {exc}")


def _prepare_output_dir(path_str: str) -> Path:
    path = Path(path_str)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigFailure(f"output directory {path_str!r} is not writable: {exc}")
    return path


def _echo_config(out_dir: Path, config) -> None:
    resolved = config.model_dump(mode="json")
    with open(out_dir / "config.resolved.yaml", "w") as fh:
        yaml.safe_dump(resolved, fh, sort_keys=True, default_flow_style=False)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in header])


def _read_dataset_csv(path: str) -> tuple[list[float], list[float], list[float]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigFailure(f"cannot read dataset: {exc}")
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["x", "y", "t"]:
            raise ConfigFailure(f"{path}: expected CSV header 'x,y,t'")
        xs, ys, ts = [], [], []
        try:
            for row in reader:
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
                ts.append(float(row["t"]))
        except (TypeError, ValueError) as exc:
            raise ConfigFailure(f"{path}: malformed row: {exc}")
    return xs, ys, ts


def _write_curve_csv(path: Path, curve: dict) -> None:
    rows = [{"jump_point": p, "value": v} for p, v in zip(curve["points"], curve["values"])]
    _write_csv(path, ["jump_point", "value"], rows)


# -- commands ----------------------------------------------------------------

@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def cli(ctx, server):
    """Conditional quantile estimation for left-truncated data."""
    ctx.obj = {"server": server}


@cli.command()
@click.option("--config", "-c", "config_path", type=str, default=None, help="YAML config file.")
@click.option("--latent-n", type=int, default=None, help="Override latent sample size.")
@click.option("--seed", type=int, default=None, help="Override model seed.")
@click.option("--output-dir", "-o", type=str, default=None, help="Override output directory.")
@click.pass_context
def generate(ctx, config_path, latent_n, seed, output_dir):
    """Simulate a truncated dataset; writes dataset.csv plus metadata."""
    raw = _load_yaml(config_path)
    config = _build_config(GenerateConfig, raw, {
        "latent_n": latent_n, "model.seed": seed, "output_dir": output_dir,
    })
    _validate_domain(lambda: config.model.to_model())
    out_dir = _prepare_output_dir(config.output_dir)

    client = ServiceClient(ctx.obj["server"])
    payload = config.model_dump(mode="json", exclude={"output_dir"})
    result = client.request("POST", "/datasets/generate", payload)

    rows = [{"x": xv, "y": yv, "t": tv}
            for xv, yv, tv in zip(result["x"], result["y"], result["t"])]
    _write_csv(out_dir / "dataset.csv", ["x", "y", "t"], rows)
    meta = {k: result[k] for k in
            ("latent_size", "observed_n", "observed_ratio", "true_mu", "assumption_compliant")}
    meta["model"] = result["model"]
    with open(out_dir / "dataset.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _echo_config(out_dir, config)

    click.echo(f"observed n = {result['observed_n']}")
    click.echo(f"latent N   = {result['latent_size']}")
    click.echo(f"n/N        = {result['observed_ratio']:.6f}")
    click.echo(f"true mu    = {result['true_mu']:.6f}")
    click.echo(f"wrote {out_dir / 'dataset.csv'}")


def _validate_domain(builder) -> None:
    """Surface core-level coherence errors as config failures, pre-flight."""
    try:
        builder()
    except TruncqError as exc:
        raise ConfigFailure(f"invalid config: {exc}")
    except ValueError as exc:
        raise ConfigFailure(f"invalid config: {exc}")


@cli.command("fit-query")
@click.option("--config", "-c", "config_path", type=str, default=None, help="YAML config file.")
@click.option("--dataset", type=str, default=None, help="Override dataset CSV path.")
@click.option("--output-dir", "-o", type=str, default=None, help="Override output directory.")
@click.pass_context
def fit_query(ctx, config_path, dataset, output_dir):
    """Fit the estimator on a dataset and evaluate quantile queries."""
    raw = _load_yaml(config_path)
    config = _build_config(FitQueryConfig, raw, {
        "dataset": dataset, "output_dir": output_dir,
    })
    if (config.dataset is None) == (config.estimator is None):
        raise ConfigFailure("config must set exactly one of 'dataset' or 'estimator'")
    points = config.queries.points()
    if not points:
        raise ConfigFailure("config defines no quantile queries")
    if config.estimator is not None and not Path(config.estimator).is_file():
        raise ConfigFailure(f"estimator file not found: {config.estimator}")
    out_dir = _prepare_output_dir(config.output_dir)

    client = ServiceClient(ctx.obj["server"])
    if config.dataset is not None:
        xs, ys, ts = _read_dataset_csv(config.dataset)
        fit_payload = {
            "x": xs, "y": ys, "t": ts, "latent_size": config.latent_size,
            "kernel": config.kernel, "smoother": config.smoother,
            "bandwidth": config.bandwidth.model_dump(mode="json"),
        }
        summary = client.request("POST", "/estimators", fit_payload)
    else:
        try:
            with open(config.estimator) as fh:
                document = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigFailure(f"cannot load estimator file: {exc}")
        summary = client.request("POST", "/estimators/import", {"document": document})
    est_id = summary["estimator_id"]

    quantile_payload = {
        "queries": [{"x": xv, "p": pv} for xv, pv in points],
        "search_interval": list(config.search_interval) if config.search_interval else None,
        "tolerance": config.tolerance,
    }
    result = client.request("POST", f"/estimators/{est_id}/quantile", quantile_payload)
    rows = [{"x": r["x"], "p": r["p"], "q_hat": r["q"], "cdf_at_qhat": r["cdf_at_q"],
             "status": r["status"]} for r in result["rows"]]
    _write_csv(out_dir / "results.csv", ["x", "p", "q_hat", "cdf_at_qhat", "status"], rows)

    if config.save_estimator:
        document = client.request("GET", f"/estimators/{est_id}/export")
        with open(config.save_estimator, "w") as fh:
            json.dump(document, fh, sort_keys=True)
            fh.write("\n")
    if config.export_curves:
        curves = client.request("GET", f"/estimators/{est_id}/curves")
        _write_curve_csv(out_dir / "risk_set.csv", curves["c_curve"])
        _write_curve_csv(out_dir / "lifetime_cdf.csv", curves["f_curve"])
        _write_curve_csv(out_dir / "truncation_cdf.csv", curves["g_curve"])
    client.request("DELETE", f"/estimators/{est_id}")
    _echo_config(out_dir, config)

    n_ok = sum(1 for r in rows if r["status"] == "ok")
    a, b = result["search_interval"]
    click.echo(f"fitted n = {summary['n']} (active {summary['n_active']}), "
               f"h = {summary['h']:.6g}, mu_hat = {summary['mu_hat']:.6f}")
    click.echo(f"search interval = [{a:.6g}, {b:.6g}]")
    click.echo(f"queries ok = {n_ok}/{len(rows)}")
    click.echo(f"wrote {out_dir / 'results.csv'}")


@cli.command()
@click.option("--config", "-c", "config_path", type=str, default=None, help="YAML config file.")
@click.option("--replications", type=int, default=None, help="Override replication count.")
@click.option("--base-seed", type=int, default=None, help="Override base seed.")
@click.option("--jobs", type=int, default=None, help="Cap on parallel workers.")
@click.option("--output-dir", "-o", type=str, default=None, help="Override output directory.")
@click.option("--assert", "assert_windows", is_flag=True, default=False,
              help="Exit 2 unless every fitted slope lies in its window.")
@click.pass_context
def rate(ctx, config_path, replications, base_seed, jobs, output_dir, assert_windows):
    """Run the Monte-Carlo convergence-rate ladder; writes tidy + summary CSVs."""
    raw = _load_yaml(config_path)
    config = _build_config(RateConfig, raw, {
        "replications": replications, "base_seed": base_seed,
        "jobs": jobs, "output_dir": output_dir,
    })
    request = schemas.RateRequest(
        **config.model_dump(mode="json", exclude={"output_dir", "slope_windows"}))
    _validate_domain(request.to_config)
    out_dir = _prepare_output_dir(config.output_dir)

    client = ServiceClient(ctx.obj["server"])
    result = client.request("POST", "/experiments/rate", request.model_dump(mode="json"))

    _write_csv(out_dir / "tidy.csv",
               ["latent_n", "rep_index", "n_observed", "metric", "value", "skipped", "skip_reason"],
               result["tidy"])
    _write_csv(out_dir / "summary.csv",
               ["metric", "latent_n", "n_observed_mean", "h_mean", "error_mean", "error_median",
                "error_se", "replications_used", "theoretical_rate", "slope", "slope_stderr"],
               result["summary"])
    _echo_config(out_dir, config)

    click.echo(f"replications: {config.replications} per size over sizes {list(config.sizes)}")
    click.echo(f"skipped replications: {result['skipped']}")
    if result["slope_message"]:
        click.echo(f"slope fit unavailable: {result['slope_message']}")
    violations = []
    for row in result["slopes"]:
        lo, hi = config.slope_windows.window_for(row["metric"])
        inside = lo <= row["slope"] <= hi
        click.echo(f"slope[{row['metric']}] = {row['slope']:+.4f} "
                   f"(stderr {row['stderr']:.4f}, window [{lo}, {hi}]) "
                   f"{'ok' if inside else 'OUTSIDE'}")
        if not inside:
            violations.append(row["metric"])
    click.echo(f"wrote {out_dir / 'tidy.csv'} and {out_dir / 'summary.csv'}")
    if assert_windows:
        if result["slope_message"]:
            raise AssertionFailure(f"cannot assert windows: {result['slope_message']}")
        if violations:
            raise AssertionFailure("slope window violated for: " + ", ".join(violations))


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except (ConfigFailure, AssertionFailure, RuntimeFailure) as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

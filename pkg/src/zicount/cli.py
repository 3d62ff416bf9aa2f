"""Command-line interface: ``zicount fit|compare|idr|simulate``.

Settings come from flags or from a config file (``--config``).  The config
format is flat ``key = value`` text, one setting per line; lists are
comma-separated; ``#`` starts a comment.  The first non-blank line must be
the schema line ``zicount-config = 1``.  Keys are the long flag names with
dashes or underscores, e.g.::

    zicount-config = 1
    command = simulate
    generator = MZINB
    k = 2.5
    sample_sizes = 100, 500
    replicates = 200
    models = MZIP, MZINB
    seed = 11

Flags given on the command line override the file.

Exit status is 0 when every requested fit converged without a conditioning
warning, 1 otherwise, and 2 on errors.  Errors are written to stderr as a
single JSON line ``{"error": <type>, "message": <text>}``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import report
from .estimation import FitConfig, compare, fit
from .inference import idr
from .io import load_csv, write_csv
from .model import INTERCEPT_NAMES, ModelKind
from .simulation import (
    MZINB_ALPHA,
    MZINB_BETA,
    MZIP_ALPHA,
    MZIP_BETA,
    SimulationDesign,
    run_study,
    simulate_dataset,
)

SCHEMA_KEY = "zicount-config"
SCHEMA_VERSION = "1"
COMMANDS = ("fit", "compare", "idr", "simulate")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    data_path: str | None = None
    response: str | None = None
    count_formula: list = field(default_factory=list)
    zero_formula: list | None = None
    intercept: bool = True
    models: list = field(default_factory=list)
    covariates: list = field(default_factory=list)
    fit: FitConfig = field(default_factory=FitConfig)
    design: SimulationDesign | None = None
    workers: int = 1
    output: str = "text"
    out_path: str | None = None
    csv_out: str | None = None
    data_out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.output not in ("text", "csv", "json"):
            raise ConfigError(f"unknown output format {self.output!r}")
        if self.command == "simulate":
            if self.design is None:
                raise ConfigError("simulate needs simulation settings")
            return
        if not self.data_path:
            raise ConfigError(f"{self.command} needs --data")
        if not self.response:
            raise ConfigError(f"{self.command} needs --response")
        if not self.models:
            raise ConfigError(f"{self.command} needs --models")
        if self.command == "compare" and len(self.models) < 2:
            raise ConfigError("compare needs at least two models")
        if any(m.zero_inflated for m in self.models) and self.zero_formula is None:
            raise ConfigError("zero-inflated models need --zero (may be empty for intercept only)")


def read_config_file(path) -> dict:
    """Parse the flat key/value config format into a dict of strings."""
    text = Path(path).read_text(encoding="utf-8")
    out = {}
    schema_seen = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not schema_seen:
            if key != SCHEMA_KEY:
                raise ConfigError(f"{path}:{lineno}: first setting must be '{SCHEMA_KEY} = {SCHEMA_VERSION}'")
            if value != SCHEMA_VERSION:
                raise ConfigError(f"{path}: unsupported config version {value!r}")
            schema_seen = True
            continue
        out[key.replace("-", "_")] = value
    if not schema_seen:
        raise ConfigError(f"{path}: missing schema line")
    return out


def _list(value) -> list:
    if value is None:
        return []
    if isinstance(value, list):
        return value
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _floats(value) -> list:
    return [float(v) for v in _list(value)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zicount", description=__doc__.split("\n\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value settings file")
    g = p.add_argument_group("data")
    g.add_argument("--data", dest="data_path", help="input CSV (header row, comma separated)")
    g.add_argument("--response", help="response column")
    g.add_argument("--count", dest="count_formula", help="count-part columns, comma separated")
    g.add_argument("--zero", dest="zero_formula", help="zero-part columns, comma separated ('' = intercept only)")
    g.add_argument("--no-intercept", dest="no_intercept", action="store_const", const="true")
    g.add_argument("--models", help="model kinds, comma separated (Poisson, NB, ZIP, ZINB, MZIP, MZINB)")
    g.add_argument("--covariate", dest="covariates", help="covariates for idr, comma separated (default: all)")
    f = p.add_argument_group("fitting")
    f.add_argument("--max-iterations", dest="max_iterations", type=int)
    f.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float)
    f.add_argument("--step-tolerance", dest="step_tolerance", type=float)
    f.add_argument("--restart-attempts", dest="restart_attempts", type=int)
    s = p.add_argument_group("simulation")
    s.add_argument("--generator", help="MZIP or MZINB")
    s.add_argument("--alpha", help="true zero-part coefficients")
    s.add_argument("--beta", help="true count-part coefficients")
    s.add_argument("--k", help="true overdispersion (MZINB only)")
    s.add_argument("--sample-sizes", dest="sample_sizes")
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--data-out", dest="data_out", help="write replicate 0 of the first sample size as CSV")
    o = p.add_argument_group("output")
    o.add_argument("--format", dest="output", choices=("text", "csv", "json"))
    o.add_argument("--out", dest="out_path", help="write the main output here instead of stdout")
    o.add_argument("--csv-out", dest="csv_out", help="simulate: also write the tidy CSV here")
    return p


def _flag_aliases() -> dict:
    """Config-file key (long flag name, underscored) to argparse destination."""
    out = {}
    for action in build_parser()._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                out[opt[2:].replace("-", "_")] = action.dest
        out[action.dest] = action.dest
    return out


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    settings = {}
    if ns.config:
        aliases = _flag_aliases()
        for key, value in read_config_file(ns.config).items():
            if key not in aliases:
                raise ConfigError(f"{ns.config}: unknown setting {key!r}")
            settings[aliases[key]] = value
    for key, value in vars(ns).items():
        if key != "config" and value is not None:
            settings[key] = value
    command = settings.get("command")
    if command is None:
        raise ConfigError("no command given")
    fit_kw = {}
    for key, conv in (("max_iterations", int), ("gradient_tolerance", float),
                      ("step_tolerance", float), ("restart_attempts", int)):
        if key in settings:
            fit_kw[key] = conv(settings[key])
    models = [ModelKind.parse(m) for m in _list(settings.get("models"))]
    design = None
    if command == "simulate":
        generator = ModelKind.parse(settings.get("generator", "MZIP"))
        marginal_nb = generator is ModelKind.MZINB
        design = SimulationDesign(
            generator=generator,
            true_alpha=_floats(settings.get("alpha")) or (MZINB_ALPHA if marginal_nb else MZIP_ALPHA),
            true_beta=_floats(settings.get("beta")) or (MZINB_BETA if marginal_nb else MZIP_BETA),
            true_k=float(settings.get("k", 1.5)) if marginal_nb else None,
            sample_sizes=[int(v) for v in _list(settings.get("sample_sizes", "100,500,1000"))],
            replicates=int(settings.get("replicates", 100)),
            seed=int(settings.get("seed", 0)),
            fit_kinds=models or (ModelKind.POISSON, ModelKind.NB, ModelKind.MZIP, ModelKind.MZINB),
        )
    zero = settings.get("zero_formula")
    no_intercept = str(settings.get("no_intercept", "false")).lower() in ("1", "true", "yes")
    return RunConfig(
        command=command,
        data_path=settings.get("data_path"),
        response=settings.get("response"),
        count_formula=_list(settings.get("count_formula")),
        zero_formula=None if zero is None else _list(zero),
        intercept=not no_intercept,
        models=models,
        covariates=_list(settings.get("covariates")),
        fit=FitConfig(**fit_kw),
        design=design,
        workers=int(settings.get("workers", 1)),
        output=settings.get("output", "text"),
        out_path=settings.get("out_path"),
        csv_out=settings.get("csv_out"),
        data_out=settings.get("data_out"),
    )


def _emit(text: str, path, stdout) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def run(config: RunConfig, stdout=None) -> int:
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    if config.command == "simulate":
        table = run_study(config.design, config.fit, workers=config.workers)
        if config.output == "csv":
            body = report.summary_csv(table)
        elif config.output == "json":
            body = report.to_json(table.tidy())
        else:
            body = report.summary_text(table)
        _emit(body, config.out_path, stdout)
        if config.csv_out:
            Path(config.csv_out).write_text(report.summary_csv(table), encoding="utf-8")
        if config.data_out:
            write_csv(simulate_dataset(config.design, config.design.sample_sizes[0], 0), config.data_out)
        return 0

    data = load_csv(config.data_path, config.response, config.count_formula, config.zero_formula, config.intercept)
    fits = [fit(kind, data, config.fit) for kind in config.models]
    status = 0 if all(f.ok for f in fits) else 1

    if config.command == "fit":
        if config.output == "json":
            body = report.to_json([report.fit_record(f) for f in fits])
        elif config.output == "csv":
            body = report.fit_csv(fits)
        else:
            body = report.fit_table(fits)
    elif config.command == "compare":
        ranked = compare(fits)
        if config.output == "json":
            body = report.to_json(report.compare_records(ranked))
        elif config.output == "csv":
            rows = report.compare_records(ranked)
            body = "rank,kind,n_params,minus2ll,aic\n" + "".join(
                f"{r['rank']},{r['kind']},{r['n_params']},{r['minus2ll']!r},{r['aic']!r}\n" for r in rows
            )
        else:
            body = report.compare_table(ranked)
    else:
        covs = config.covariates or [c for c in data.x_names if c.lower() not in INTERCEPT_NAMES]
        reports = [idr(f, c, dataset=data) for f in fits for c in covs]
        if config.output == "json":
            body = report.to_json([report.idr_record(r) for r in reports])
        elif config.output == "csv":
            lines = ["kind,covariate,constant,idr,ci_low,ci_high,min,median,max"]
            for r in reports:
                if r.constant:
                    lines.append(f"{r.kind.value},{r.covariate},1,{r.idr!r},{r.ci_95[0]!r},{r.ci_95[1]!r},,,")
                else:
                    s = r.summary
                    lines.append(f"{r.kind.value},{r.covariate},0,,,,{s['min']!r},{s['median']!r},{s['max']!r}")
            body = "\n".join(lines)
        else:
            body = report.idr_text(reports)
    _emit(body, config.out_path, stdout)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = config_from_args(ns)
        return run(config)
    except Exception as exc:  # noqa: BLE001 - reported as one machine-readable line
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line driver.

Subcommands cover instance generation, the exact and Monte Carlo
information estimators, thermodynamic integration, the scalar replica
potential, phase-diagram sweeps, the adaptive interpolation path, the
decomposition audit, concentration scans, and a self-check suite.

Every emitted artifact embeds the resolved run configuration and the
model parameters, floats are rendered with a fixed 17 significant digit
format, and identical (config, seed) pairs produce byte-identical
output.  Options can come from a flat JSON config file (--config);
flags given on the command line take precedence key by key.

Exit codes: 0 success, 2 parameter or domain error, 64 unknown command,
73 unwritable output, 1 estimator failure (partial outputs are kept
with a .partial suffix).
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .exact import (
    EnumerationSizeError,
    HamiltonianDomainError,
    exact_mi_tiny,
    gibbs_report,
    mi_via_free_energy,
)
from .interpolation import (
    EstimatorConfig,
    free_energy_variance,
    overlap_variance_scan,
    solve_R_star,
    sum_rule_audit,
)
from .mcmc import McmcConfig, ti_mutual_information, ti_t_grid
from .model import ParametrizationError, params_from_channel
from .replica import QUAD_ORDER_DEFAULT, minimize_psi, phase_diagram
from .sampling import sample_instance
from .serialize import SCHEMA_VERSION, canonical_json, render_csv, wrap_payload

EXIT_OK = 0
EXIT_ESTIMATOR = 1
EXIT_USAGE = 2
EXIT_UNKNOWN_COMMAND = 64
EXIT_CANT_WRITE = 73

MAX_SEED = 2 ** 64 - 1


class UsageError(ValueError):
    """Bad parameter or domain value; maps to exit code 2."""


class VerifyFailure(RuntimeError):
    """A self check failed; the report file is kept as written."""


@dataclass
class RunConfig:
    """Fully resolved invocation: command plus every option value."""

    command: str
    seed: int = 0
    output: Optional[str] = None
    format: str = "json"
    threads: int = 0
    options: Dict[str, Any] = field(default_factory=dict)

    def to_record(self):
        rec = {
            "command": self.command,
            "seed": int(self.seed),
            "output": self.output,
            "format": self.format,
            "threads": int(self.threads),
        }
        rec.update(self.options)
        return rec


@dataclass(frozen=True)
class Opt:
    name: str                 # config-file key, underscores
    type: type
    default: Any
    help: str
    choices: Optional[Tuple[str, ...]] = None

    @property
    def flag(self):
        return "--" + self.name.replace("_", "-")


_COMMON = [
    Opt("seed", int, 0, "base seed for every stream (64-bit unsigned)"),
    Opt("output", str, None, "output path; stdout when omitted"),
    Opt("format", str, None, "artifact format", ("json", "csv")),
    Opt("threads", int, 0,
        "accepted for interface compatibility; results never depend on it"),
]

_MODEL = [
    Opt("n", int, None, "number of nodes"),
    Opt("r", float, 0.5, "probability of the first label value, in (0, 1/2]"),
    Opt("p_bar", float, 0.5, "mean edge density d_n / n, in (0, 1)"),
    Opt("lambda", float, 1.0, "effective signal strength lambda_n"),
    Opt("delta", float, None,
        "edge bias amplitude; overrides --lambda via lambda = n delta^2 / (p_bar (1 - p_bar))"),
    Opt("sign", int, 1, "sign of the edge bias, +1 or -1"),
]

_MCMC = [
    Opt("sweeps", int, 2000, "heat-bath sweeps kept per chain"),
    Opt("burn_in", int, 400, "sweeps discarded before measuring"),
    Opt("chains", int, 2, "independent chains per instance"),
    Opt("thin", int, 1, "keep every thin-th sweep"),
    Opt("init", str, "planted", "chain initialization", ("planted", "random")),
]

COMMAND_OPTS: Dict[str, List[Opt]] = {
    "generate": _COMMON + _MODEL + [
        Opt("t", float, 0.0, "interpolation time in [0, 1]"),
        Opt("R", float, 0.0, "scalar channel signal-to-noise, >= 0"),
    ],
    "mi-exact": _COMMON + _MODEL + [
        Opt("t", float, 0.0, "interpolation time for the graph part"),
        Opt("dump_brackets", str, None,
            "also sample one instance at (t, R) and write its pair "
            "correlation matrix <x_i x_j> as CSV to this path"),
        Opt("R", float, 0.0, "channel strength for the dumped instance"),
    ],
    "mi-mc": _COMMON + _MODEL + [
        Opt("samples", int, 20000, "Monte Carlo samples for I/n"),
    ],
    "ti": _COMMON + _MODEL + _MCMC + [
        Opt("t_nodes", int, 13, "quadrature nodes on t in [0, 1]"),
        Opt("grid_kind", str, "uniform", "node spacing",
            ("uniform", "geometric")),
        Opt("instances", int, 8, "instances averaged per node"),
    ],
    "replica": _COMMON + [
        Opt("lambda", float, 1.0, "effective signal strength"),
        Opt("r", float, 0.5, "probability of the first label value"),
        Opt("tol", float, 1e-10, "minimizer tolerance in q"),
        Opt("quad_order", int, QUAD_ORDER_DEFAULT,
            "Gauss-Hermite order for the scalar potential"),
        Opt("n", int, 100, "size of the embedded finite-model record"),
        Opt("p_bar", float, 0.5, "density of the embedded finite-model record"),
    ],
    "phase-diagram": _COMMON + [
        Opt("lambda_min", float, 0.5, "sweep start"),
        Opt("lambda_max", float, 1.5, "sweep end"),
        Opt("lambda_steps", int, 21, "grid points in lambda"),
        Opt("r_min", float, 0.05, "sweep start"),
        Opt("r_max", float, 0.5, "sweep end"),
        Opt("r_steps", int, 10, "grid points in r"),
        Opt("tol", float, 1e-8, "minimizer tolerance"),
        Opt("quad_order", int, QUAD_ORDER_DEFAULT, "Gauss-Hermite order"),
        Opt("n", int, 100, "size of the embedded finite-model record"),
        Opt("p_bar", float, 0.5, "density of the embedded finite-model record"),
    ],
    "interpolate": _COMMON + _MODEL + _MCMC + [
        Opt("epsilon", float, 0.05, "initial channel strength R(0), > 0"),
        Opt("t_nodes", int, 40, "Euler steps on [0, 1]"),
        Opt("estimator", str, "exact", "bracket engine", ("exact", "mcmc")),
        Opt("instances", int, 64, "instances averaged per drift evaluation"),
    ],
    "sumrule": _COMMON + _MODEL + _MCMC + [
        Opt("epsilon", float, 0.05, "initial channel strength, > 0"),
        Opt("q_path", str, "solved",
            "drift path: solved, zero, or a numeric constant"),
        Opt("t_nodes", int, 60, "Euler steps on [0, 1]"),
        Opt("estimator", str, "exact", "bracket engine", ("exact", "mcmc")),
        Opt("instances", int, 64, "instances per node"),
        Opt("mi_samples", int, 20000, "Monte Carlo samples for the exact side"),
        Opt("eps_prime_nodes", int, 8,
            "Gauss-Legendre nodes for the small-epsilon correction"),
    ],
    "concentration": _COMMON + [
        Opt("kind", str, "overlap", "scanned quantity",
            ("overlap", "free-energy")),
        Opt("n_grid", str, "8,10,12,14", "comma separated sizes"),
        Opt("r", float, 0.5, "probability of the first label value"),
        Opt("p_bar", float, 0.5, "mean edge density"),
        Opt("lambda", float, 1.0, "effective signal strength"),
        Opt("theta", float, 0.2, "overlap scan: epsilon window n^-theta"),
        Opt("eps_nodes", int, 5, "overlap scan: nodes in the epsilon window"),
        Opt("instances", int, 200, "overlap scan: instances per point"),
        Opt("t", float, 0.0, "interpolation time"),
        Opt("R", float, 0.0, "free-energy scan: channel strength"),
        Opt("samples", int, 400, "free-energy scan: instances per size"),
        Opt("t_nodes", int, 40, "overlap scan: Euler steps when t > 0"),
    ],
    "verify": _COMMON,
}

_FORMAT_DEFAULT = {
    "generate": "json", "mi-exact": "json", "mi-mc": "json", "ti": "json",
    "replica": "json", "phase-diagram": "csv", "interpolate": "csv",
    "sumrule": "json", "concentration": "csv", "verify": "json",
}

_CSV_OK = {"phase-diagram", "interpolate", "concentration"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sbmi",
        description="Dense stochastic block model: exact, Monte Carlo, "
                    "replica, and interpolation tooling.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, opts in COMMAND_OPTS.items():
        p = sub.add_parser(command, help=_SUMMARIES[command],
                           description=_SUMMARIES[command])
        p.add_argument("--config", type=str, default=None,
                       help="flat JSON file of option values; explicit flags "
                            "override its keys")
        for opt in opts:
            kwargs = dict(type=opt.type, default=None, help=opt.help,
                          dest=opt.name)
            if opt.choices is not None:
                kwargs["choices"] = opt.choices
            p.add_argument(opt.flag, **kwargs)
    return parser


_SUMMARIES = {
    "generate": "sample one planted instance and write it as JSON",
    "mi-exact": "per-node mutual information by full enumeration (n <= 5)",
    "mi-mc": "per-node mutual information by Monte Carlo over instances",
    "ti": "thermodynamic-integration estimate; CSV of (t, q2_mean, "
          "q2_stderr) plus a JSON summary",
    "replica": "minimize the scalar replica potential at (lambda, r)",
    "phase-diagram": "sweep (r, lambda); CSV of (r, lambda, q_star, "
                     "psi_star, order)",
    "interpolate": "solve the drift path R(t); CSV of (t, R, q, stderr)",
    "sumrule": "decomposition audit of I/n against the potential plus "
               "remainders; JSON report",
    "concentration": "variance versus size scan; CSV of (n, variance, "
                     "bound_proxy)",
    "verify": "run the deterministic self-check suite and print a "
              "pass/fail table",
}


def _merge_options(command, args):
    """Resolve option values: explicit flag, then config file, then default."""
    file_values = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}")
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a flat JSON object")
    known = {opt.name: opt for opt in COMMAND_OPTS[command]}
    for key in file_values:
        if key not in known:
            raise UsageError(f"unknown config key for {command}: {key}")
    merged = {}
    for opt in COMMAND_OPTS[command]:
        value = getattr(args, opt.name)
        if value is None and opt.name in file_values:
            raw = file_values[opt.name]
            if raw is not None:
                try:
                    value = opt.type(raw)
                except (TypeError, ValueError):
                    raise UsageError(
                        f"config key {opt.name} expects {opt.type.__name__}, "
                        f"got {raw!r}")
        if value is None:
            value = opt.default
        if value is not None and opt.choices is not None \
                and value not in opt.choices:
            raise UsageError(
                f"{opt.name} must be one of {', '.join(opt.choices)}, "
                f"got {value}")
        merged[opt.name] = value
    return merged


def resolve_config(argv):
    """Parse argv into a RunConfig, validating domains along the way."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        raise UsageError("a command is required")
    command = args.command
    merged = _merge_options(command, args)
    seed = merged.pop("seed")
    if not 0 <= seed <= MAX_SEED:
        raise UsageError(f"seed must fit in 64 unsigned bits, got {seed}")
    output = merged.pop("output")
    fmt = merged.pop("format")
    if fmt is None:
        fmt = _FORMAT_DEFAULT[command]
    if fmt == "csv" and command not in _CSV_OK:
        raise UsageError(f"{command} emits JSON; csv format is not defined")
    threads = merged.pop("threads")
    if threads < 0:
        raise UsageError(f"threads must be >= 0, got {threads}")
    return RunConfig(command=command, seed=seed, output=output,
                     format=fmt, threads=threads, options=merged)


def _build_params(o, n_required=True):
    n = o.get("n")
    if n is None:
        if n_required:
            raise UsageError("--n is required")
        n = 100
    if o.get("delta") is not None:
        delta = o["delta"]
        pb = o["p_bar"]
        lam = n * delta * delta / (pb * (1.0 - pb))
        sign = 1 if delta >= 0.0 else -1
    else:
        lam = o["lambda"]
        sign = o.get("sign", 1)
    return params_from_channel(n, o["r"], o["p_bar"], lam, sign)


def _mcmc_config(o, seed):
    return McmcConfig(sweeps=o["sweeps"], burn_in=o["burn_in"],
                      chains=o["chains"], thin=o["thin"], init=o["init"],
                      seed=seed)


def _estimator_config(o, seed):
    mcmc = _mcmc_config(o, seed) if o["estimator"] == "mcmc" else None
    return EstimatorConfig(instances=o["instances"], seed=seed, mcmc=mcmc)


def _csv_text(cfg, params_record, header, rows):
    """CSV artifact with the run provenance embedded as comment lines."""
    head = (
        f"# schema_version: {SCHEMA_VERSION}\n"
        f"# run_config: {canonical_json(cfg.to_record()).strip()}\n"
        f"# params: {canonical_json(params_record).strip()}\n"
    )
    return head + render_csv(header, rows)


def _json_text(cfg, params_record, result):
    return canonical_json(
        wrap_payload(cfg.command, cfg.to_record(), params_record, result))


class Emitter:
    """Writes artifacts and remembers file paths for .partial recovery."""

    def __init__(self):
        self.written = []

    def emit(self, path, text):
        if path is None:
            sys.stdout.write(text)
            return
        with open(path, "w") as fh:
            fh.write(text)
        self.written.append(path)

    def mark_partial(self):
        kept = []
        for path in self.written:
            partial = path + ".partial"
            try:
                os.replace(path, partial)
                kept.append(partial)
            except OSError:
                kept.append(path)
        return kept


def _planned_paths(cfg):
    paths = []
    if cfg.output is not None:
        paths.append(cfg.output)
        if cfg.command == "ti":
            paths.append(_sibling_csv(cfg.output))
    dump = cfg.options.get("dump_brackets")
    if dump is not None:
        paths.append(dump)
    return paths


def _sibling_csv(path):
    stem, ext = os.path.splitext(path)
    if ext.lower() == ".csv":
        return stem + ".rows.csv"
    return stem + ".csv"


def _check_writable(paths):
    for path in paths:
        parent = os.path.dirname(path) or "."
        if not os.path.isdir(parent):
            raise OSError(f"directory does not exist: {parent}")
        if not os.access(parent, os.W_OK):
            raise OSError(f"directory is not writable: {parent}")
        if os.path.isdir(path):
            raise OSError(f"output path is a directory: {path}")


# ---------------------------------------------------------------- commands


def _cmd_generate(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    inst = sample_instance(params, o["t"], o["R"], cfg.seed)
    text = _json_text(cfg, params.to_record(), inst.to_record())
    emit.emit(cfg.output, text)


def _cmd_mi_exact(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    mi = exact_mi_tiny(params, t=o["t"])
    result = {"mi_per_node": mi, "t": o["t"]}
    if o["dump_brackets"] is not None:
        inst = sample_instance(params, o["t"], o["R"], cfg.seed)
        report = gibbs_report(inst, params, o["t"], o["R"], want_pairs=True)
        result["report"] = report.to_record()
        header = [f"x{j}" for j in range(params.n)]
        rows = [list(row) for row in report.pair_xx]
        emit.emit(o["dump_brackets"],
                  _csv_text(cfg, params.to_record(), header, rows))
    emit.emit(cfg.output, _json_text(cfg, params.to_record(), result))


def _cmd_mi_mc(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    est, se = mi_via_free_energy(params, o["samples"], cfg.seed)
    result = {"mi_per_node": est, "stderr": se, "samples": o["samples"]}
    emit.emit(cfg.output, _json_text(cfg, params.to_record(), result))


def _cmd_ti(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    grid = ti_t_grid(o["t_nodes"], kind=o["grid_kind"])
    est = ti_mutual_information(params, grid, _mcmc_config(o, cfg.seed),
                                instances_per_node=o["instances"])
    rows = [[float(t), m, s]
            for t, (m, s) in zip(est.t_grid, est.q2_at_t)]
    rec = est.to_record()
    summary = {
        "mi_per_node": rec["mi_per_node"],
        "stderr": rec["mi_stderr"],
        "lambda_n": params.lambda_n,
        "unreliable": rec["unreliable"],
        "branch_warning": rec["branch_warning"],
        "instances_per_node": rec["instances_per_node"],
    }
    if cfg.output is not None:
        emit.emit(_sibling_csv(cfg.output),
                  _csv_text(cfg, params.to_record(),
                            ["t", "q2_mean", "q2_stderr"], rows))
    else:
        summary["q2_at_t"] = rec["q2_at_t"]
    emit.emit(cfg.output, _json_text(cfg, params.to_record(), summary))


def _cmd_replica(cfg, emit):
    o = cfg.options
    sol = minimize_psi(o["lambda"], o["r"], tol=o["tol"],
                       quad_order=o["quad_order"])
    params = params_from_channel(o["n"], o["r"], o["p_bar"], o["lambda"])
    emit.emit(cfg.output,
              _json_text(cfg, params.to_record(), sol.to_record()))


def _cmd_phase_diagram(cfg, emit):
    import numpy as np
    o = cfg.options
    if o["lambda_steps"] < 2 or o["r_steps"] < 1:
        raise UsageError("lambda_steps must be >= 2 and r_steps >= 1")
    lam_grid = np.linspace(o["lambda_min"], o["lambda_max"], o["lambda_steps"])
    r_grid = np.linspace(o["r_min"], o["r_max"], o["r_steps"])
    pd = phase_diagram(lam_grid, r_grid, tol=o["tol"],
                       quad_order=o["quad_order"])
    order_by_r = {rep.r: rep.order for rep in pd.reports}
    rows = [[sol.r, sol.lam, sol.q_star, sol.psi_star, order_by_r[sol.r]]
            for sol in pd.solutions]
    params = params_from_channel(o["n"], float(r_grid[0]), o["p_bar"],
                                 float(lam_grid[0]))
    if cfg.format == "csv":
        text = _csv_text(cfg, params.to_record(),
                         ["r", "lambda", "q_star", "psi_star", "order"], rows)
    else:
        result = {
            "rows": rows,
            "r_star_estimate": pd.r_star_estimate,
            "reports": [{"r": rep.r, "lambda_c": rep.lambda_c,
                         "order": rep.order, "max_jump": rep.max_jump,
                         "coexistence_seen": rep.coexistence_seen}
                        for rep in pd.reports],
        }
        text = _json_text(cfg, params.to_record(), result)
    emit.emit(cfg.output, text)


def _cmd_interpolate(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    if o["epsilon"] <= 0.0:
        raise UsageError(f"epsilon must be > 0, got {o['epsilon']}")
    path = solve_R_star(params, o["epsilon"], o["t_nodes"],
                        estimator=o["estimator"],
                        config=_estimator_config(o, cfg.seed))
    rows = [[float(t), float(R), float(q), float(s)]
            for t, R, q, s in zip(path.t_grid, path.R_values,
                                  path.q_values, path.q_stderrs)]
    if cfg.format == "csv":
        text = _csv_text(cfg, params.to_record(),
                         ["t", "R", "q", "stderr"], rows)
    else:
        text = _json_text(cfg, params.to_record(), path.to_record())
    emit.emit(cfg.output, text)


def _cmd_sumrule(cfg, emit):
    o = cfg.options
    params = _build_params(o)
    q_path = o["q_path"]
    if q_path not in ("solved", "zero"):
        try:
            q_path = float(q_path)
        except ValueError:
            raise UsageError(
                f"q_path must be solved, zero, or a number, got {q_path!r}")
    report = sum_rule_audit(params, o["epsilon"], q_path=q_path,
                            K=o["t_nodes"], estimator=o["estimator"],
                            config=_estimator_config(o, cfg.seed),
                            mi_samples=o["mi_samples"],
                            eps_prime_nodes=o["eps_prime_nodes"])
    emit.emit(cfg.output,
              _json_text(cfg, params.to_record(), report.to_record()))


def _cmd_concentration(cfg, emit):
    o = cfg.options
    try:
        n_grid = [int(tok) for tok in o["n_grid"].split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"n_grid must be comma separated ints: {o['n_grid']!r}")
    if len(n_grid) < 2:
        raise UsageError("n_grid needs at least two sizes")
    base = {"r": o["r"], "p_bar": o["p_bar"], "lambda": o["lambda"],
            "delta": None, "sign": 1}
    if o["kind"] == "overlap":
        family = [_build_params({**base, "n": n}) for n in n_grid]
        est_cfg = EstimatorConfig(instances=o["instances"], seed=cfg.seed)
        scan = overlap_variance_scan(family, t=o["t"], theta=o["theta"],
                                     eps_nodes=o["eps_nodes"],
                                     estimator="exact", config=est_cfg,
                                     K=o["t_nodes"])
        rows = [[int(n), float(v), float(b)]
                for n, v, b in zip(scan.n_values, scan.variances,
                                   scan.bound_proxies)]
        extra = scan.to_record()
    else:
        params0 = _build_params({**base, "n": n_grid[0]})
        scan = free_energy_variance(params0, n_grid, o["samples"], cfg.seed,
                                    t=o["t"], R=o["R"])
        rows = [[int(n), float(v), 1.0 / float(n)]
                for n, v in zip(scan.n_values, scan.variances)]
        extra = scan.to_record()
    params = _build_params({**base, "n": n_grid[0]})
    if cfg.format == "csv":
        text = _csv_text(cfg, params.to_record(),
                         ["n", "variance", "bound_proxy"], rows)
    else:
        text = _json_text(cfg, params.to_record(),
                          {"rows": rows, "scan": extra})
    emit.emit(cfg.output, text)


def _cmd_verify(cfg, emit):
    from . import verify as verify_mod
    table, all_pass = verify_mod.run_suite(cfg.seed)
    emit.emit(cfg.output, table)
    if cfg.output is not None:
        sys.stdout.write(table)
    if not all_pass:
        raise VerifyFailure("one or more self checks failed")


_DISPATCH = {
    "generate": _cmd_generate,
    "mi-exact": _cmd_mi_exact,
    "mi-mc": _cmd_mi_mc,
    "ti": _cmd_ti,
    "replica": _cmd_replica,
    "phase-diagram": _cmd_phase_diagram,
    "interpolate": _cmd_interpolate,
    "sumrule": _cmd_sumrule,
    "concentration": _cmd_concentration,
    "verify": _cmd_verify,
}


def run(cfg: RunConfig) -> int:
    """Execute a resolved RunConfig; returns the process exit code."""
    emit = Emitter()
    try:
        _check_writable(_planned_paths(cfg))
    except OSError as exc:
        print(f"error: output: {exc}", file=sys.stderr)
        return EXIT_CANT_WRITE
    try:
        _DISPATCH[cfg.command](cfg, emit)
    except (UsageError, ParametrizationError, EnumerationSizeError,
            HamiltonianDomainError, ValueError) as exc:
        print(f"error: parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: output: {exc}", file=sys.stderr)
        return EXIT_CANT_WRITE
    except VerifyFailure as exc:
        print(f"error: estimator: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except Exception as exc:
        kept = emit.mark_partial()
        note = f" partial: {', '.join(kept)}" if kept else ""
        print(f"error: estimator: {type(exc).__name__}: {exc}{note}",
              file=sys.stderr)
        return EXIT_ESTIMATOR
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    for tok in argv:
        if tok in ("-h", "--help"):
            break
        if not tok.startswith("-"):
            if tok not in COMMAND_OPTS:
                print(f"error: unknown command: {tok}", file=sys.stderr)
                return EXIT_UNKNOWN_COMMAND
            break
    try:
        cfg = resolve_config(argv)
    except UsageError as exc:
        print(f"error: parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse handles --help (code 0) and flag errors (code 2) itself
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

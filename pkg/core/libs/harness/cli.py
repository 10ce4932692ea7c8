import argparse
import json
import os
import sys

from core.libs.errors import EfppError, InvalidArgumentError, UsageError
from core.libs.geodesic import EXACT_ENDPOINTS, PARTICLE_ENDPOINTS
from core.libs.harness.experiment_spec import WORKERS_ENV, ExperimentSpec, load_config
from core.libs.harness.mongo_logger import MongoLogger
from core.libs.harness.orchestrator import run_experiment
from core.libs.harness.record_codec import RecordWriter, open_sink, write_summary_csv

# --- Constants ---
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
SUBCOMMANDS = {
    "sample": "sample",
    "geodesic": "geodesic",
    "tree": "trees",
    "directional-tree": "directional-trees",
    "msf": "msf",
    "estimate-mu": "mu",
    "estimate-chi": "chi",
    "estimate-xi": "xi",
    "shape": "shape",
    "concentration": "concentration",
    "superadd": "superadditivity",
    "height": "height",
    "straightness": "straightness",
    "boxpath": "boxpath",
    "lens-check": "lens-properties",
    "oracle-suite": "oracle-suite",
}
# flag dest -> ExperimentSpec field
SPEC_FLAGS = {
    "d": "d", "alpha": "alpha", "density": "density", "seed": "seed", "replicates": "replicates",
    "lengths": "ells", "s_grid": "s_grid", "out": "out", "budget": "budget", "workers": "workers", "k": "k",
    "mongo_uri": "mongo_uri",
}
ENDPOINT_MODES = {"particle": PARTICLE_ENDPOINTS, "exact": EXACT_ENDPOINTS}
# flag dest -> params key
PARAM_FLAGS = ("mu_hat", "radius", "instances", "h_values", "mode", "eps", "trials", "density_high")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, field="argv")


def _grid(flag):
    def parse(text):
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"--{flag} expects comma-separated numbers, got {text!r}")
        if not values:
            raise argparse.ArgumentTypeError(f"--{flag} is empty")
        return values
    return parse


def _param(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser():
    parser = _Parser(prog="efpp", description="Euclidean first-passage percolation experiments.")
    parser.add_argument("command", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--d", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--lambda", dest="density", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--lengths", type=_grid("lengths"))
    parser.add_argument("--s-grid", dest="s_grid", type=_grid("s-grid"))
    parser.add_argument("--out")
    parser.add_argument("--budget", type=float)
    parser.add_argument("--config")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--timings", action="store_true")
    parser.add_argument("--mongo-uri", dest="mongo_uri")
    parser.add_argument("--mu-hat", dest="mu_hat", type=float)
    parser.add_argument("--radius", type=float)
    parser.add_argument("--instances", type=int)
    parser.add_argument("--h-values", dest="h_values", type=_grid("h-values"))
    parser.add_argument("--mode", choices=sorted(ENDPOINT_MODES))
    parser.add_argument("--eps", type=float)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--lambda-high", dest="density_high", type=float)
    parser.add_argument("--param", action="append", type=_param, default=[])
    return parser


def parse_cli(argv):
    """Defaults, then --config, then EFPP_WORKERS, then flags."""
    args = build_parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    config = load_config(args.config) if args.config else {}
    if config.get("kind", kind) != kind:
        raise UsageError(f"--config describes a {config['kind']!r} experiment, not {kind!r}", field="config")
    config["kind"] = kind
    params = dict(config.pop("params", {}))
    if os.environ.get(WORKERS_ENV) and args.workers is None:
        try:
            config["workers"] = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {os.environ[WORKERS_ENV]!r}", field="workers")
    for dest, name in SPEC_FLAGS.items():
        value = getattr(args, dest)
        if value is not None:
            config[name] = value
    if args.timings:
        config["timings"] = True
    for dest in PARAM_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            params[dest] = value
    if "mode" in params:
        params["mode"] = ENDPOINT_MODES.get(params["mode"], params["mode"])
    params.update(dict(args.param))
    config["params"] = params
    if "seed" not in config:
        print("[HARNESS] warning: no --seed given, using seed 0", file=sys.stderr)
    spec = ExperimentSpec.from_dict(config)
    return spec.validate()


def _write_outputs(spec, summary, writer):
    writer.write({k: v for k, v in summary.items() if k != "rows"})
    writer.flush()
    if spec.out and summary["rows"]:
        write_summary_csv(f"{spec.out}.summary.csv", summary["rows"])


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_cli(argv)
    except UsageError as e:
        print(f"[HARNESS] usage error ({e.field}): {e}", file=sys.stderr)
        return EXIT_USAGE
    logger = MongoLogger(spec.mongo_uri)
    stream, writer = open_sink(spec.out) if spec.out else (sys.stdout, RecordWriter(sys.stdout))
    try:
        _, summary = run_experiment(spec, writer, logger)
        _write_outputs(spec, summary, writer)
    except (UsageError, InvalidArgumentError) as e:
        print(f"[HARNESS] usage error ({getattr(e, 'field', None)}): {e}", file=sys.stderr)
        return EXIT_USAGE
    except EfppError as e:
        print(f"[HARNESS] experiment failed: {type(e).__name__}: {e}", file=sys.stderr)
        logger.log_event("experiment_failed", {"experiment": spec.experiment_id, "error": str(e)})
        return EXIT_FAIL
    finally:
        if stream is not sys.stdout:
            stream.close()
        logger.close()
    return EXIT_FAIL if summary["passed"] is False else EXIT_PASS

"""Experiment dispatch: one ExperimentSpec in, per-replicate records and a summary out."""
import math
import sys
from functools import partial

from core.libs.costmodel import CostModel
from core.libs.errors import UsageError
from core.libs.estimators import (
    Aggregate,
    boxpath_replicate,
    concentration_check,
    density_scaling_check,
    estimate_mu,
    shape_check,
    superadditivity_check,
    truncation_gap_trend,
    variance_scaling,
    wandering_scaling,
)
from core.libs.estimators.experiments import XI_UPPER
from core.libs.forest.straightness import DEFAULT_STRAIGHTNESS_OFFSET
from core.libs.geodesic import EXACT_ENDPOINTS, PARTICLE_ENDPOINTS
from core.libs.harness import tasks
from core.libs.harness.runner import ReplicateRunner

DEFAULT_ORACLE_INSTANCES = 500
# parent-map stability under target-radius doubling
STABILITY_THRESHOLD = 0.95
SUMMARY_FORMAT = "summary"
SUMMARY_VERSION = 1


def _radius(spec):
    """Tree radius: the `radius` param, else the largest distance of the grid, else 20 spacings."""
    if "radius" in spec.params:
        return float(spec.params["radius"])
    if spec.ells:
        return float(max(spec.ells))
    return 20.0 * spec.density ** (-1.0 / spec.d)


def _scalar_rows(records):
    return [{k: v for k, v in r.items() if not isinstance(v, (dict, list))} for r in records]


def _estimate_rows(est):
    return [{"ell": ell, "count": a.count, "mean": m, "variance": v, "stderr": se}
            for ell, a, m, v, se in zip(est.ells, est.aggregates, est.means, est.variances, est.stderrs)]


def _replicate_tasks(spec, stage=0, param=None):
    return [(stage, param, r) for r in range(spec.effective_replicates)]


def _grid_tasks(spec):
    return [(i, float(ell), r) for i, ell in enumerate(spec.ells) for r in range(spec.effective_replicates)]


def _estimator_args(spec, runner):
    return dict(d=spec.d, alpha=spec.alpha, density=spec.density, replicates=spec.effective_replicates,
                seed=spec.seed, policy=spec.policy, k=spec.k, mapper=runner)


def _min_replicates(spec, args):
    if "min_replicates" in spec.params:
        args["min_replicates"] = int(spec.params["min_replicates"])
    return args


def _audit_totals(ok):
    totals = {}
    for r in ok:
        for check, count in r["audits"].items():
            totals[check] = totals.get(check, 0) + count
    return totals


# --- experiment kinds ---

def _oracle_suite(spec, runner):
    task = partial(tasks.oracle_replicate, d=spec.d, alpha=spec.alpha, seed=spec.seed, k=spec.k)
    instances = int(spec.params.get("instances", DEFAULT_ORACLE_INSTANCES))
    records = runner(task, [(0, None, i) for i in range(instances)])
    ok = [r for r in records if "error" not in r]
    matches = sum(1 for r in ok if r["match"])
    audits = _audit_totals(ok)
    result = {"instances": instances, "matches": matches, "audits": audits}
    return records, result, _scalar_rows(records), matches == instances and sum(audits.values()) == 0


def _mu(spec, runner):
    args = _min_replicates(spec, _estimator_args(spec, runner))
    est, records = estimate_mu(ells=spec.ells, **args)
    result = est.to_dict()
    passed = est.extras["non_increasing"]
    if "density_high" in spec.params:
        high_args = dict(args, density=float(spec.params["density_high"]))
        high, high_records = estimate_mu(ells=spec.ells, **high_args)
        check = density_scaling_check(est, high, spec.alpha, spec.d, spec.density, high_args["density"])
        result["density_scaling"] = dict(check, high=high.to_dict())
        records = records + high_records
        passed = passed and check["passed"]
    return records, result, _estimate_rows(est), passed


def _chi(spec, runner):
    est, records = variance_scaling(ells=spec.ells, **_min_replicates(spec, _estimator_args(spec, runner)))
    result = est.to_dict()
    # acceptance also reports the upper interval end
    result["upper_ci_within"] = est.ci[1] <= float(spec.params.get("chi_upper", 1.15))
    return records, result, _estimate_rows(est), est.extras["passed"]


def _xi(spec, runner):
    args = _min_replicates(spec, _estimator_args(spec, runner))
    est, records = wandering_scaling(ells=spec.ells, xi_upper=float(spec.params.get("xi_upper", XI_UPPER)), **args)
    result = est.to_dict()
    result["upper_ci_within"] = est.extras["upper_ci_within"]
    return records, result, _estimate_rows(est), est.extras["passed"]



def _shape(spec, runner):
    args = _estimator_args(spec, runner)
    mu_hat = spec.params.get("mu_hat")
    records = []
    if mu_hat is None:
        if not spec.ells:
            raise UsageError("shape needs --mu-hat or a --lengths grid to estimate it", field="mu-hat")
        est, records = estimate_mu(ells=spec.ells, **_min_replicates(spec, dict(args)))
        mu_hat = est.extras["mu_hat"]
    args.pop("replicates")
    report, shape_records = shape_check(s_grid=spec.s_grid, replicates=spec.effective_replicates, mu_hat=mu_hat,
                                        isotropy_length=spec.params.get("isotropy_length"), **args)
    rows = [{"s": s, "eps_mean": m, "eps_stderr": se, "untrusted_fraction": u}
            for s, m, se, u in zip(report["s"], report["eps_mean"], report["eps_stderr"],
                                   report["untrusted_fraction"])]
    return records + shape_records, report, rows, report["passed"]


def _concentration(spec, runner):
    args = _min_replicates(spec, _estimator_args(spec, runner))
    ell = float(max(spec.ells))
    report, records = concentration_check(ell=ell, kappa=spec.params.get("kappa"), **args)
    passed = None
    if spec.params.get("h_values"):
        trend, trend_records = truncation_gap_trend(
            spec.d, spec.alpha, spec.density, ell, spec.params["h_values"], spec.effective_replicates, spec.seed,
            eps_sub=spec.params.get("eps_sub"), policy=spec.policy, k=spec.k, mapper=runner)
        report["truncation"] = trend
        records = records + trend_records
        passed = trend["non_increasing"]
    rows = [{"ell": ell, "probability": p, "quantile": q} for p, q in report["quantiles"].items()]
    return records, report, rows, passed


def _superadditivity(spec, runner):
    args = _min_replicates(spec, _estimator_args(spec, runner))
    report, records = superadditivity_check(ells=spec.ells, mu_hat=spec.params.get("mu_hat"), **args)
    return records, report, report["pairs"], report["passed"]


def _boxpath(spec, runner):
    cm = CostModel(spec.alpha)
    task = partial(boxpath_replicate, d=spec.d, cm=cm, density=spec.density, seed=spec.seed,
                   eps=spec.params.get("eps"), policy=spec.policy, k=spec.k)
    records = runner(task, _grid_tasks(spec))
    ok = [r for r in records if "error" not in r]
    result = {
        "replicates": len(records),
        "failures": len(records) - len(ok),
        "occupied_fraction": Aggregate.of(r["occupied_fraction"] for r in ok).to_dict(),
        "midpoints_covered": sum(1 for r in ok if r["midpoints_covered"]),
        "doubling_back_violations": sum(r["doubling_back_violations"] for r in ok),
        "connected": all(r["connected"] for r in ok),
    }
    passed = result["connected"] and result["doubling_back_violations"] == 0
    if spec.params.get("h_values"):
        trend, trend_records = truncation_gap_trend(
            spec.d, spec.alpha, spec.density, float(max(spec.ells)), spec.params["h_values"],
            spec.effective_replicates, spec.seed, eps_sub=spec.params.get("eps_sub"), policy=spec.policy,
            k=spec.k, mapper=runner)
        result["truncation"] = trend
        records = records + trend_records
    return records, result, _scalar_rows(ok), passed


def _replicate_kind(spec, runner, func, summarize, **fixed):
    records = runner(partial(func, **fixed), _replicate_tasks(spec))
    ok = [r for r in records if "error" not in r]
    result, passed = summarize(ok)
    result.update({"replicates": len(records), "failures": len(records) - len(ok)})
    return records, result, _scalar_rows(records), passed


def _no_predicate(keys):
    def summarize(ok):
        return {key: Aggregate.of(float(r[key]) for r in ok).to_dict() for key in keys}, None
    return summarize


def _msf_summary(ok):
    mismatches = sum(r["mismatches"] for r in ok)
    return {"pairs": sum(r["pairs"] for r in ok), "mismatches": mismatches}, mismatches == 0


def _height_summary(ok):
    violations = {}
    for r in ok:
        for check, count in r["violations"].items():
            violations[check] = violations.get(check, 0) + count
    return {"violations": violations}, all(r["passed"] for r in ok)


def _straightness_summary(ok):
    beyond = {}
    for r in ok:
        for radius, count in r["beyond"].items():
            beyond[radius] = beyond.get(radius, 0) + count
    return {"checked": sum(r["checked"] for r in ok), "violations": sum(r["violation_count"] for r in ok),
            "beyond": beyond}, None


def _directional_summary(ok):
    compared = sum(r["stability"]["compared"] for r in ok)
    unchanged = sum(r["stability"]["unchanged"] for r in ok)
    stable = unchanged / compared if compared else math.nan
    failures = sum(r["coalescence_failures"] for r in ok)
    result = {"compared": compared, "unchanged": unchanged, "stable_fraction": stable,
              "coalescence_pairs": sum(r["coalescence_pairs"] for r in ok), "coalescence_failures": failures}
    return result, failures == 0 and compared > 0 and stable >= STABILITY_THRESHOLD



def _lens_summary(ok):
    by_h = {}
    for r in ok:
        for entry in r["by_h"]:
            key = "inf" if entry["h"] is None else f"{entry['h']:g}"
            by_h[key] = by_h.get(key, 0) + entry["violations"]
    return {"violations": sum(by_h.values()), "violations_by_h": by_h}, all(r["passed"] for r in ok)


def _structural(spec, runner):
    cm = CostModel(spec.alpha)
    base = dict(d=spec.d, density=spec.density, seed=spec.seed)
    search = dict(base, cm=cm, policy=spec.policy, k=spec.k)
    radius = _radius(spec)
    kind = spec.kind
    if kind == "sample":
        side = float(spec.params.get("side", 2.0 * radius))
        return _replicate_kind(spec, runner, tasks.sample_replicate, _no_predicate(()), side=side, **base)
    if kind == "trees":
        return _replicate_kind(spec, runner, tasks.tree_replicate, _no_predicate(("covered", "max_depth")),
                               radius=radius, keep_tree=bool(spec.params.get("keep_tree", False)), **search)
    if kind == "directional-trees":
        return _replicate_kind(spec, runner, tasks.directional_replicate, _directional_summary, radius=radius,
                               **search)
    if kind == "msf":
        side = float(spec.params.get("side", tasks.MSF_SIDE))
        return _replicate_kind(spec, runner, tasks.msf_replicate, _msf_summary, side=side, **base)
    if kind == "height":
        return _replicate_kind(spec, runner, tasks.height_replicate, _height_summary, radius=radius, **search)
    if kind == "straightness":
        eps = float(spec.params.get("eps", DEFAULT_STRAIGHTNESS_OFFSET))
        return _replicate_kind(spec, runner, tasks.straightness_replicate, _straightness_summary, radius=radius,
                               eps=eps, **search)
    if kind == "lens-properties":
        trials = int(spec.params.get("trials", 1000))
        h_values = spec.params.get("h_values")
        # the pure power is always checked; --h-values replaces the default truncations
        h_values = tasks.LENS_H_VALUES if h_values is None else (None,) + tuple(float(h) for h in h_values)
        return _replicate_kind(spec, runner, tasks.lens_replicate, _lens_summary, d=spec.d, alpha=spec.alpha,
                               seed=spec.seed, trials=trials, h_values=h_values)
    raise UsageError(f"unknown experiment kind {kind!r}", field="kind")


def _geodesic(spec, runner):
    mode = spec.params.get("mode", PARTICLE_ENDPOINTS)
    if mode not in (PARTICLE_ENDPOINTS, EXACT_ENDPOINTS):
        raise UsageError(f"unknown endpoint mode {mode!r}", field="mode")
    task = partial(tasks.geodesic_replicate, d=spec.d, cm=CostModel(spec.alpha), density=spec.density,
                   seed=spec.seed, policy=spec.policy, k=spec.k, mode=mode,
                   gap_report=bool(spec.params.get("gap_report", False)))
    records = runner(task, _grid_tasks(spec))
    ok = [r for r in records if "error" not in r]
    result = {"costs": {f"{ell:g}": Aggregate.of(r["cost"] for r in ok if r["ell"] == ell).to_dict()
                        for ell in spec.ells},
              "failures": len(records) - len(ok)}
    result["audits"] = _audit_totals(ok)
    return records, result, _scalar_rows(records), sum(result["audits"].values()) == 0


DISPATCH = {
    "oracle-suite": _oracle_suite,
    "mu": _mu,
    "chi": _chi,
    "xi": _xi,
    "shape": _shape,
    "concentration": _concentration,
    "superadditivity": _superadditivity,
    "boxpath": _boxpath,
    "geodesic": _geodesic,
}


def run_experiment(spec, writer=None, logger=None):
    """Run every replicate of `spec`; returns (records, summary).

    summary["passed"] is the acceptance predicate (None where the kind has
    none) and summary["rows"] the table written as CSV.
    """
    spec.validate()
    experiment_id = spec.experiment_id
    runner = ReplicateRunner(experiment_id, spec.seed, spec.workers, writer, logger, spec.timings)
    if logger:
        logger.log_event("experiment_started", {"experiment": experiment_id, "spec": spec.to_dict()})
    print(f"[HARNESS] {experiment_id}: {spec.effective_replicates} replicates on {spec.workers} worker(s)",
          file=sys.stderr)
    handler = DISPATCH.get(spec.kind, _structural)
    records, result, rows, passed = handler(spec, runner)
    summary = {
        "format": SUMMARY_FORMAT,
        "version": SUMMARY_VERSION,
        "experiment": experiment_id,
        "kind": spec.kind,
        "seed": spec.seed,
        "replicates": len(records),
        "failures": runner.failures,
        "passed": passed,
        "result": result,
        "rows": rows,
    }
    if logger:
        logger.log_event("experiment_finished", {"experiment": experiment_id, "passed": passed,
                                                 "failures": runner.failures})
    print(f"[HARNESS] {experiment_id}: finished, passed={passed}, failures={runner.failures}", file=sys.stderr)
    return records, summary

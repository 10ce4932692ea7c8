"""Monte Carlo estimators built from single-replicate tasks.

Each driver takes a `mapper(func, tasks)` returning per-task dicts in task
order; the default runs serially. Dicts carrying an "error" key are failed
replicates: they are counted, never used as samples. Every driver returns
(result, records) so the caller can persist the per-replicate records.
"""
from functools import partial
import math

import numpy as np

from core.libs.costmodel.cost_model import CostModel
from core.libs.errors import InvalidArgumentError, WindowPolicyError
from core.libs.estimators.replicates import passage_replicate, shape_replicate, truncation_replicate
from core.libs.estimators.scaling import BOOTSTRAP_RESAMPLES, Aggregate, DeviationSample, ScalingEstimate, ols_slope
from core.libs.geodesic import DEFAULT_NEIGHBOR_BUDGET, DEFAULT_POLICY

# --- Constants ---
MIN_REPLICATES = 30
MIN_CONCENTRATION_REPLICATES = 1000
CHI_BOUND = 1.0
XI_BOUND = 0.75 + 0.05
XI_UPPER = 0.85
TREND_SIGMAS = 2.0
ISOTROPY_SIGMAS = 3.0
ISOTROPY_DIRECTIONS = 8
TAIL_PROBABILITIES = (0.5, 0.9, 0.99, 0.999)
TAIL_LEVELS = (0.5, 1.0, 2.0, 4.0, 8.0)
# stage words: grid points use their index, the other families sit above them
SHAPE_STAGE = 1 << 20
ISOTROPY_STAGE = 2 << 20
TRUNCATION_STAGE = 3 << 20


def _check_grid(values, name):
    values = [float(v) for v in values]
    if not values:
        raise InvalidArgumentError(f"{name} grid must not be empty")
    if any(v <= 0 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidArgumentError(f"{name} grid must be positive and strictly increasing, got {values}")
    return values


def _check_replicates(replicates, minimum):
    if replicates < max(1, minimum):
        raise InvalidArgumentError(f"need at least {max(1, minimum)} replicates, got {replicates}")


def _succeeded(records):
    return [r for r in records if "error" not in r]


def _grid_records(d, alpha, density, ells, replicates, seed, policy, k, mapper, direction=None, stage_offset=0):
    task = partial(passage_replicate, d=d, cm=CostModel(alpha), density=density, seed=seed, policy=policy, k=k,
                   direction=direction)
    tasks = [(stage_offset + i, ell, r) for i, ell in enumerate(ells) for r in range(replicates)]
    return list(mapper(task, tasks))


def _per_ell(records, ells, stage_offset=0):
    """Successful records grouped by grid index, and the untrusted fraction at each distance."""
    grouped = [[] for _ in ells]
    for r in _succeeded(records):
        grouped[r["stage"] - stage_offset].append(r)
    untrusted = [float(np.mean([not r["trusted"] for r in g])) if g else 1.0 for g in grouped]
    return grouped, untrusted


def _enforce_trust(untrusted, ells, policy):
    for ell, fraction in zip(ells, untrusted):
        if fraction > policy.max_untrusted_fraction:
            raise WindowPolicyError(
                f"untrusted fraction {fraction:.3f} at ell={ell} exceeds {policy.max_untrusted_fraction}")


def _non_increasing(means, stderrs, sigmas=TREND_SIGMAS):
    return all(b <= a + sigmas * math.hypot(sa, sb)
               for a, b, sa, sb in zip(means, means[1:], stderrs, stderrs[1:]))


def _fit(estimate, resamples, seed):
    if len(estimate.ells) >= 2:
        estimate.fit(resamples, rng=np.random.default_rng(seed))
    return estimate


def estimate_mu(d, alpha, density, ells, replicates, seed, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                mapper=map, resamples=BOOTSTRAP_RESAMPLES, min_replicates=MIN_REPLICATES):
    """Time constant: mean of T_ell / ell per distance, mu-hat at the largest distance."""
    ells = _check_grid(ells, "ell")
    _check_replicates(replicates, min_replicates)
    records = _grid_records(d, alpha, density, ells, replicates, seed, policy, k, mapper)
    grouped, untrusted = _per_ell(records, ells)
    _enforce_trust(untrusted, ells, policy)
    samples = [[r["cost"] / r["ell"] for r in g] for g in grouped]
    est = ScalingEstimate("mu", "mean", ells, samples, replicates, seed,
                          failures=len(records) - len(_succeeded(records)))
    _fit(est, resamples, seed)
    means, stderrs = est.means, est.stderrs
    est.extras.update({
        "mu_hat": means[-1],
        "mu_stderr": stderrs[-1],
        "non_increasing": _non_increasing(means, stderrs),
        "untrusted_fraction": untrusted,
    })
    return est, records


def variance_scaling(d, alpha, density, ells, replicates, seed, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                     mapper=map, resamples=BOOTSTRAP_RESAMPLES, min_replicates=MIN_REPLICATES):
    """Slope of log Var T_ell against log ell; passes when the lower interval end is at most 1."""
    ells = _check_grid(ells, "ell")
    _check_replicates(replicates, min_replicates)
    records = _grid_records(d, alpha, density, ells, replicates, seed, policy, k, mapper)
    grouped, untrusted = _per_ell(records, ells)
    if d > 1:
        _enforce_trust(untrusted, ells, policy)
    samples = [[r["cost"] for r in g] for g in grouped]
    est = ScalingEstimate("chi", "variance", ells, samples, replicates, seed,
                          failures=len(records) - len(_succeeded(records)))
    est.fit(resamples, rng=np.random.default_rng(seed))
    est.extras.update({
        "chi_hat": est.slope / 2.0,
        "passed": est.ci[0] <= CHI_BOUND,
        "untrusted_fraction": untrusted,
    })
    return est, records


def wandering_scaling(d, alpha, density, ells, replicates, seed, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                      mapper=map, resamples=BOOTSTRAP_RESAMPLES, min_replicates=MIN_REPLICATES,
                      xi_upper=XI_UPPER):
    """Slope of log E[d_max] against log ell, from trusted paths only."""
    ells = _check_grid(ells, "ell")
    _check_replicates(replicates, min_replicates)
    records = _grid_records(d, alpha, density, ells, replicates, seed, policy, k, mapper)
    grouped, untrusted = _per_ell(records, ells)
    _enforce_trust(untrusted, ells, policy)
    deviations = [[DeviationSample.from_record(r) for r in g] for g in grouped]
    samples = [[s.d_max for s in group if s.trusted] for group in deviations]
    est = ScalingEstimate("xi", "mean", ells, samples, replicates, seed,
                          failures=len(records) - len(_succeeded(records)))
    est.fit(resamples, rng=np.random.default_rng(seed))
    est.extras.update({
        "xi_hat": est.slope,
        "passed": est.ci[0] <= XI_BOUND,
        "upper_ci_within": est.ci[1] <= xi_upper,
        "untrusted_fraction": untrusted,
    })
    return est, records


def isotropy_check(d, alpha, density, ell, replicates, seed, directions=ISOTROPY_DIRECTIONS, policy=DEFAULT_POLICY,
                   k=DEFAULT_NEIGHBOR_BUDGET, mapper=map):
    """Mean T(0, ell u) over equally spaced directions in the first coordinate plane."""
    if d < 2:
        raise InvalidArgumentError("isotropy needs d >= 2")
    means, stderrs, records = [], [], []
    for j in range(directions):
        theta = 2.0 * math.pi * j / directions
        u = np.zeros(d)
        u[0], u[1] = math.cos(theta), math.sin(theta)
        rows = _grid_records(d, alpha, density, [ell], replicates, seed, policy, k, mapper, direction=tuple(u),
                             stage_offset=ISOTROPY_STAGE + j)
        agg = Aggregate.of(r["cost"] for r in _succeeded(rows))
        means.append(agg.mean)
        stderrs.append(agg.stderr)
        records.extend(rows)
    worst = max((abs(a - b) / math.hypot(sa, sb)
                 for (a, sa), (b, sb) in _pairs(list(zip(means, stderrs)))), default=0.0)
    report = {"ell": ell, "directions": directions, "means": means, "stderrs": stderrs,
              "max_pairwise_sigmas": worst, "passed": worst <= ISOTROPY_SIGMAS}
    return report, records


def _pairs(items):
    return [(items[i], items[j]) for i in range(len(items)) for j in range(i + 1, len(items))]


def shape_check(d, alpha, density, s_grid, replicates, seed, mu_hat, policy=DEFAULT_POLICY,
                k=DEFAULT_NEIGHBOR_BUDGET, mapper=map, isotropy_length=None):
    """eps-hat(s): the smallest eps with (1 - eps) s B0 and (1 + eps) s B0 sandwiching the ball, B0 of radius 1/mu."""
    s_grid = _check_grid(s_grid, "s")
    _check_replicates(replicates, 2)
    if not mu_hat > 0:
        raise InvalidArgumentError(f"shape check needs a positive mu estimate, got {mu_hat}")
    task = partial(shape_replicate, d=d, cm=CostModel(alpha), density=density, seed=seed, s_grid=s_grid,
                   mu_hat=mu_hat, policy=policy, k=k)
    records = list(mapper(task, [(SHAPE_STAGE, None, r) for r in range(replicates)]))
    ok = _succeeded(records)
    untrusted = [float(np.mean([r["untrusted_fraction"][i] for r in ok])) if ok else 1.0 for i in range(len(s_grid))]
    _enforce_trust(untrusted, s_grid, policy)
    aggregates = [Aggregate.of(r["epsilons"][i] for r in ok) for i in range(len(s_grid))]
    means = [a.mean for a in aggregates]
    stderrs = [a.stderr for a in aggregates]
    report = {
        "s": s_grid,
        "mu_hat": mu_hat,
        "eps_mean": means,
        "eps_stderr": stderrs,
        "non_increasing": _non_increasing(means, stderrs),
        "untrusted_fraction": untrusted,
        "failures": len(records) - len(ok),
    }
    if isotropy_length is not None:
        iso, iso_records = isotropy_check(d, alpha, density, isotropy_length, replicates, seed, policy=policy, k=k,
                                          mapper=mapper)
        report["isotropy"] = iso
        records = records + iso_records
    report["passed"] = report["non_increasing"] and report.get("isotropy", {}).get("passed", True)
    return report, records


def concentration_report(costs, ell, kappa=None, resamples=BOOTSTRAP_RESAMPLES, rng=None):
    """Standardized fluctuations (T - mean) / sqrt(ell): tails and a stretched-exponential exponent."""
    costs = np.asarray(costs, dtype=float)
    if len(costs) < 2:
        raise InvalidArgumentError("concentration needs at least two samples")
    z = (costs - costs.mean()) / math.sqrt(ell)
    magnitude = np.abs(z)
    exponent = _tail_exponent(magnitude)
    rng = rng if rng is not None else np.random.default_rng(0)
    boot = np.array([_tail_exponent(magnitude[rng.integers(0, len(magnitude), len(magnitude))])
                     for _ in range(resamples)])
    ci = (float(np.nanpercentile(boot, 2.5)), float(np.nanpercentile(boot, 97.5))) \
        if np.any(np.isfinite(boot)) else (math.nan, math.nan)
    return {
        "ell": ell,
        "samples": int(len(z)),
        "standardized_mean": float(z.mean()),
        "standardized_sd": float(z.std(ddof=1)),
        "quantiles": {str(p): float(np.quantile(magnitude, p)) for p in TAIL_PROBABILITIES},
        "tail_probabilities": {str(x): float(np.mean(magnitude > x)) for x in TAIL_LEVELS},
        "exponent": exponent,
        "exponent_ci": list(ci),
        "kappa": dict(kappa) if kappa else {},
    }


def _tail_exponent(magnitude):
    """Slope of log(-log S(x)) against log x over the empirical tail S(x) = P(|z| > x)."""
    ordered = np.sort(magnitude)
    n = len(ordered)
    survival = 1.0 - np.arange(1, n + 1) / (n + 1.0)
    keep = (survival <= 0.5) & (survival >= 5.0 / n) & (ordered > 0)
    if np.count_nonzero(keep) < 3 or len(np.unique(ordered[keep])) < 2:
        return math.nan
    return ols_slope(np.log(ordered[keep]), np.log(-np.log(survival[keep])))[0]


def concentration_check(d, alpha, density, ell, replicates, seed, kappa=None, policy=DEFAULT_POLICY,
                        k=DEFAULT_NEIGHBOR_BUDGET, mapper=map, resamples=BOOTSTRAP_RESAMPLES,
                        min_replicates=MIN_CONCENTRATION_REPLICATES):
    _check_replicates(replicates, min_replicates)
    records = _grid_records(d, alpha, density, [ell], replicates, seed, policy, k, mapper)
    costs = [r["cost"] for r in _succeeded(records)]
    report = concentration_report(costs, ell, kappa, resamples, np.random.default_rng(seed))
    report["failures"] = len(records) - len(costs)
    return report, records


def superadditivity_check(d, alpha, density, ells, replicates, seed, mu_hat=None, policy=DEFAULT_POLICY,
                          k=DEFAULT_NEIGHBOR_BUDGET, mapper=map, min_replicates=MIN_REPLICATES):
    """E T_2l - 2 E T_l for every (l, 2l) pair of the grid, and E T_l >= mu l - 2 SE."""
    ells = _check_grid(ells, "ell")
    _check_replicates(replicates, min_replicates)
    index = {ell: i for i, ell in enumerate(ells)}
    pairs = [(ell, 2.0 * ell) for ell in ells if 2.0 * ell in index]
    if not pairs:
        raise InvalidArgumentError(f"ell grid {ells} contains no (l, 2l) pair")
    records = _grid_records(d, alpha, density, ells, replicates, seed, policy, k, mapper)
    grouped, untrusted = _per_ell(records, ells)
    _enforce_trust(untrusted, ells, policy)
    aggregates = [Aggregate.of(r["cost"] for r in g) for g in grouped]
    means = [a.mean for a in aggregates]
    stderrs = [a.stderr for a in aggregates]
    if mu_hat is None:
        mu_hat = means[-1] / ells[-1]
    gaps = []
    for ell, double in pairs:
        i, j = index[ell], index[double]
        gap = means[j] - 2.0 * means[i]
        se = math.hypot(stderrs[j], 2.0 * stderrs[i])
        gaps.append({"ell": ell, "gap": gap, "stderr": se, "relative_gap": gap / means[i],
                     "subadditive": gap <= TREND_SIGMAS * se})
    lower = [{"ell": ell, "mean": m, "bound": mu_hat * ell, "holds": m >= mu_hat * ell - TREND_SIGMAS * se}
             for ell, m, se in zip(ells, means, stderrs)]
    report = {
        "ells": ells,
        "means": means,
        "stderrs": stderrs,
        "mu_hat": mu_hat,
        "pairs": gaps,
        "lower_bound": lower,
        "passed": all(g["subadditive"] for g in gaps) and all(b["holds"] for b in lower),
        "failures": len(records) - len(_succeeded(records)),
    }
    return report, records


def truncation_gap_trend(d, alpha, density, ell, h_values, replicates, seed, eps_sub=None, policy=DEFAULT_POLICY,
                         k=DEFAULT_NEIGHBOR_BUDGET, mapper=map):
    """Fraction of replicates with T' != T'' for each truncation level h."""
    h_values = _check_grid(h_values, "h")
    _check_replicates(replicates, 1)
    eps_sub = 1e-9 * density ** (-1.0 / d) if eps_sub is None else eps_sub
    task = partial(truncation_replicate, d=d, alpha=alpha, density=density, seed=seed, h_values=h_values,
                   eps_sub=eps_sub, policy=policy, k=k)
    records = list(mapper(task, [(TRUNCATION_STAGE, ell, r) for r in range(replicates)]))
    ok = _succeeded(records)
    fractions = []
    for i in range(len(h_values)):
        differ = [not math.isclose(r["t_exact"], r["t_truncated"][i], rel_tol=1e-12) for r in ok]
        fractions.append(float(np.mean(differ)) if differ else math.nan)
    report = {
        "ell": ell,
        "h_values": h_values,
        "eps_sub": eps_sub,
        "differ_fraction": fractions,
        "non_increasing": all(b <= a for a, b in zip(fractions, fractions[1:])),
        "failures": len(records) - len(ok),
    }
    return report, records


def density_scaling_check(low, high, alpha, d, density_low, density_high, sigmas=ISOTROPY_SIGMAS):
    """mu(l2) / mu(l1) against the exact process scaling (l2 / l1) ** (-alpha / d)."""
    mu_low, se_low = low.extras["mu_hat"], low.extras["mu_stderr"]
    mu_high, se_high = high.extras["mu_hat"], high.extras["mu_stderr"]
    expected = (density_high / density_low) ** (-alpha / d)
    ratio = mu_high / mu_low
    # delta-method standard error of the ratio
    se = ratio * math.hypot(se_low / mu_low, se_high / mu_high)
    return {
        "ratio": ratio,
        "expected": expected,
        "stderr": se,
        "passed": abs(ratio - expected) <= sigmas * se,
    }

"""Command-line experiment driver.

Every subcommand reads a JSON config (optional; flags override its fields),
runs seeded trials and writes a report holding each measured quantity next
to its theoretical bound. Reports are a pure function of the config.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import boosting, metrics
from .core import (FiniteDistribution, Hypothesis, HypothesisClass, dump_json, population_loss,
                   sample_dataset, tv_distance)
from .coupling import (CouplingInconsistencyError, coupled_sample, disagreement_bound,
                       uniform_reference)
from .dp import PreconditionError
from .fixtures import (FixtureSpec, build, fixture_distribution, make_list_global_fixture,
                       make_noisy_constant_rule, make_weak_stump_learner, noisy_distribution,
                       stump_class, threshold_target)
from .metrics import Estimate, binomial_estimate, map_trials, rows_to_csv
from .randomness import PoissonStripStream, Seed, Tape
from .replicable import HhParams, SqParams, replicable_agnostic_learner, replicable_heavy_hitters, replicable_sq
from .sampling import DistributionSampler
from .transforms import (AlgorithmFailure, ListGlobalParams, SeededRule, TvToDpPlan,
                         coupled_batch_outputs, derandomize, global_to_replicable, listglobal_to_tv,
                         tv_to_dp)

COMMANDS = ("couple", "sq", "heavy-hitters", "agnostic", "global-to-repl", "listglobal-to-tv",
            "tv-to-dp", "amplify", "boost", "audit", "verify")


class ConfigError(ValueError):
    pass


class Report:
    """Accumulates ``(quantity, estimate, ci, bound, pass)`` rows."""

    def __init__(self, command, seed, config):
        self.command, self.seed, self.config = command, seed, config
        self.rows = []
        self.extra = {}

    def add(self, quantity, estimate, ci=0.0, bound=None, passed=None):
        self.rows.append({"quantity": quantity, "estimate": estimate, "ci": ci,
                          "bound": bound, "pass": passed})

    def add_estimate(self, quantity, est: Estimate, bound=None, passed=None):
        self.add(quantity, est.estimate, est.ci, bound, passed)

    @property
    def passed(self) -> bool:
        return all(r["pass"] is not False for r in self.rows)

    def to_json(self) -> dict:
        return {"command": self.command, "seed": self.seed, "config": self.config,
                "measurements": self.rows, "pass": self.passed, **self.extra}

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return dump_json(self.to_json()) + "\n"
        rows = [(r["quantity"], r["estimate"], r["ci"], "" if r["bound"] is None else r["bound"],
                 "" if r["pass"] is None else r["pass"]) for r in self.rows]
        return f"# seed={self.seed}\n" + rows_to_csv(rows)


def _get(cfg, key, default):
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(f"missing config field {key!r}")
    return value


def _hyp(bits) -> Hypothesis:
    try:
        return Hypothesis.from_bits(str(bits))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _spec(cfg, default: dict) -> FixtureSpec:
    obj = dict(default)
    obj.update(cfg.get("fixture", {}))
    try:
        return FixtureSpec.from_json(obj)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad fixture spec: {e}") from e


def _paired(tape, trials, jobs, fn):
    """Run ``fn(shared_tape, rng_a, rng_b)`` for every trial index."""

    def trial(i):
        return fn(tape.derive(("shared", i)), tape.derive(("data-a", i)).rng(),
                  tape.derive(("data-b", i)).rng())

    return map_trials(trial, trials, jobs)


def _try(fn, *args):
    try:
        return fn(*args)
    except AlgorithmFailure:
        return None


# Subcommands ------------------------------------------------------------


def cmd_couple(cfg, tape, trials, jobs, rep):
    P_mass = _get(cfg, "P", [0.5, 0.3, 0.2])
    Q_mass = _get(cfg, "Q", [0.3, 0.3, 0.4])
    if len(P_mass) != len(Q_mass):
        raise ConfigError("P and Q need equal length")
    d = max(1, math.ceil(math.log2(len(P_mass) + 1)))
    members = [Hypothesis(tuple((i >> b) & 1 for b in range(d))) for i in range(len(P_mass))]
    ref = uniform_reference(HypothesisClass(d, members))
    P = FiniteDistribution(members, P_mass)
    Q = FiniteDistribution(members, Q_mass)

    def trial(i):
        stream = PoissonStripStream(tape.derive(("pair", i)), ref.dist)
        return coupled_sample(P, ref, stream), coupled_sample(Q, ref, stream)

    pairs = np.array(map_trials(trial, trials, jobs))
    tv = tv_distance(P, Q)
    bound = disagreement_bound(tv)
    dis = binomial_estimate(int(np.sum(pairs[:, 0] != pairs[:, 1])), trials)
    rep.add("tv_distance", tv)
    rep.add_estimate("disagreement", dis, bound, dis.estimate <= bound + dis.ci)
    for side, target, col in (("P", P, 0), ("Q", Q, 1)):
        counts = np.bincount(pairs[:, col], minlength=len(members)) / trials
        emp = FiniteDistribution(members, counts)
        fid = tv_distance(emp, target)
        rep.add(f"marginal_tv_{side}", fid, 0.0, 0.02, fid <= 0.02)


def cmd_sq(cfg, tape, trials, jobs, rep):
    p = float(_get(cfg, "mean", 0.5))
    params = SqParams(float(_get(cfg, "tolerance", 0.25)), float(_get(cfg, "replicability", 0.5)),
                      float(_get(cfg, "confidence", 0.05)))
    D = FiniteDistribution([0, 1], [1.0 - p, p])

    def fn(shared, ra, rb):
        a = replicable_sq(float, DistributionSampler(D, ra), params, shared)
        b = replicable_sq(float, DistributionSampler(D, rb), params, shared)
        return abs(a - p) > params.tolerance, a == b

    out = _paired(tape, trials, jobs, fn)
    fail = binomial_estimate(sum(o[0] for o in out), trials)
    agree = binomial_estimate(sum(o[1] for o in out), trials)
    rep.add("sample_size", params.sample_size)
    rep.add_estimate("tolerance_failure", fail, params.confidence, fail.estimate <= params.confidence + fail.ci)
    bound = 1.0 - params.replicability
    rep.add_estimate("agreement", agree, bound, agree.estimate >= bound - agree.ci)


def cmd_heavy_hitters(cfg, tape, trials, jobs, rep):
    masses = _get(cfg, "masses", [0.5, 0.3, 0.2])
    params = HhParams(float(_get(cfg, "threshold", 0.36)), float(_get(cfg, "error", 0.05)),
                      float(_get(cfg, "confidence", 0.2)), float(_get(cfg, "replicability", 0.2)))
    D = FiniteDistribution(list(range(len(masses))), masses)
    v, e = params.threshold, params.error

    def correct(out):
        s = set(out)
        return all(x in s for x, m in enumerate(masses) if m >= v + e) and \
            not any(x in s for x, m in enumerate(masses) if m < v - e)

    def fn(shared, ra, rb):
        a = replicable_heavy_hitters(DistributionSampler(D, ra), params, shared)
        b = replicable_heavy_hitters(DistributionSampler(D, rb), params, shared)
        return not correct(a), a == b

    out = _paired(tape, trials, jobs, fn)
    fail = binomial_estimate(sum(o[0] for o in out), trials)
    agree = binomial_estimate(sum(o[1] for o in out), trials)
    rep.add("n1", params.sample_sizes()[0])
    rep.add_estimate("correctness_failure", fail, params.confidence,
                     fail.estimate <= params.confidence + fail.ci)
    bound = 1.0 - params.replicability
    rep.add_estimate("agreement", agree, bound, agree.estimate >= bound - agree.ci)


def cmd_agnostic(cfg, tape, trials, jobs, rep):
    d = int(_get(cfg, "domain_size", 8))
    target = threshold_target(d, int(_get(cfg, "cut", d // 2)))
    noise = float(_get(cfg, "noise", 0.1))
    eps, delta, rho = (float(_get(cfg, k, v)) for k, v in
                       (("epsilon", 0.1), ("delta", 0.1), ("rho", 0.3)))
    H = stump_class(d)
    D = noisy_distribution(target, noise)
    best = min(population_loss(h, D) for h in H)

    def fn(shared, ra, rb):
        a, _ = replicable_agnostic_learner(H, DistributionSampler(D, ra), eps, delta, rho, shared)
        b, _ = replicable_agnostic_learner(H, DistributionSampler(D, rb), eps, delta, rho, shared)
        return population_loss(a, D) > best + eps, a == b

    out = _paired(tape, trials, jobs, fn)
    fail = binomial_estimate(sum(o[0] for o in out), trials)
    agree = binomial_estimate(sum(o[1] for o in out), trials)
    rep.add_estimate("accuracy_failure", fail, delta, fail.estimate <= delta + fail.ci)
    rep.add_estimate("agreement", agree, 1.0 - rho, agree.estimate >= 1.0 - rho - agree.ci)


def cmd_global_to_repl(cfg, tape, trials, jobs, rep):
    spec = _spec(cfg, {"kind": "globally-stable", "domain_size": 4, "sample_size": 1,
                       "target": "0011", "params": {"eta": 0.4, "decoys": 3}})
    A = build(spec)
    D = fixture_distribution(spec)
    rho_gs = float(_get(cfg, "rho_gs", spec.param("eta", 1.0)))
    alpha_p, beta_p, rho_p = (float(_get(cfg, k, v)) for k, v in
                              (("alpha_p", 0.1), ("beta_p", 0.1), ("rho_p", 0.3)))
    target = spec.target_hypothesis

    def fn(shared, ra, rb):
        a = _try(global_to_replicable, A, D, rho_gs, alpha_p, beta_p, rho_p, shared, ra)
        b = _try(global_to_replicable, A, D, rho_gs, alpha_p, beta_p, rho_p, shared, rb)
        return a == target, a == b, a is None

    out = _paired(tape, trials, jobs, fn)
    hit = binomial_estimate(sum(o[0] for o in out), trials)
    agree = binomial_estimate(sum(o[1] for o in out), trials)
    rep.add_estimate("target_selection", hit, 1.0 - beta_p, hit.estimate >= 1.0 - beta_p - hit.ci)
    rep.add_estimate("agreement", agree, 1.0 - rho_p, agree.estimate >= 1.0 - rho_p - agree.ci)
    rep.add("declared_failures", sum(o[2] for o in out))


def cmd_listglobal_to_tv(cfg, tape, trials, jobs, rep):
    spec = _spec(cfg, {"kind": "list-globally-stable", "domain_size": 8, "sample_size": 1,
                       "target": "00001111", "params": {"L": 4, "eta": 0.4, "alpha": 0.0}})
    learner = make_list_global_fixture(spec)
    D = fixture_distribution(spec)
    params = ListGlobalParams(float(spec.param("eta")), float(_get(cfg, "rho", 0.2)),
                              max(float(spec.param("alpha", 0.0)), 1e-9),
                              float(_get(cfg, "beta", 0.1)), int(spec.param("L")),
                              float(_get(cfg, "constant_scale", 2.0)))

    def fn(shared, ra, rb):
        P = _try(listglobal_to_tv, learner, params, D, ra)
        Q = _try(listglobal_to_tv, learner, params, D, rb)
        if P is None or Q is None:
            return 1.0, 1.0
        err = P.expect(lambda h: population_loss(h, D))
        return tv_distance(P, Q), err

    out = np.array(_paired(tape, trials, jobs, fn))
    tv = metrics.mean_estimate(out[:, 0])
    err = metrics.mean_estimate(out[:, 1])
    rep.extra["derived"] = {"tau": params.tau, "gamma": params.gamma, "k1": params.k1, "k2": params.k2}
    rep.add_estimate("two_run_tv", tv, 2 * params.rho, tv.estimate <= 2 * params.rho + tv.ci)
    alpha = float(spec.param("alpha", 0.0))
    rep.add_estimate("output_error", err, 2 * alpha + 0.01, err.estimate <= 2 * alpha + 0.01 + err.ci)


def _noisy_rule(cfg, default_params, domain=6, n=2, target="001101"):
    spec = _spec(cfg, {"kind": "noisy-constant", "domain_size": domain, "sample_size": n,
                       "target": target, "params": default_params})
    return spec, make_noisy_constant_rule(spec), fixture_distribution(spec)


def cmd_tv_to_dp(cfg, tape, trials, jobs, rep):
    spec, A, D = _noisy_rule(cfg, {"scale": 0.1})
    rho, beta = float(_get(cfg, "rho", 0.1)), float(_get(cfg, "beta", 0.05))
    alpha_p, beta_p = float(_get(cfg, "alpha_p", 0.1)), float(_get(cfg, "beta_p", 0.2))
    eps, delta = float(_get(cfg, "epsilon", 1.0)), float(_get(cfg, "delta", 1e-3))
    plan = TvToDpPlan(rho, beta, beta_p, eps, delta)
    ref = uniform_reference(A.reachable_set)
    size = plan.dataset_size(A.sample_size, alpha_p)
    alpha = float(spec.param("alpha", 0.0))

    def trial(i):
        S = sample_dataset(D, size, tape.derive(("data", i)).rng(), spec.domain_size)
        h = _try(tv_to_dp, A, S, alpha_p, beta_p, eps, delta, ref, tape.derive(("run", i)), rho, beta)
        return h is not None and population_loss(h, D) <= alpha + alpha_p

    good = binomial_estimate(sum(map_trials(trial, trials, jobs)), trials)
    rep.extra["derived"] = {"rho_coupled": plan.rho_coupled, "p": plan.p, "q": plan.q,
                            "k_batches": plan.k_batches, "eta": plan.eta,
                            "k_formula": plan.k_formula, "k_per_batch": plan.k_per_batch,
                            "dataset_size": size}
    rep.add_estimate("accurate_rate", good, 1.0 - beta_p, good.estimate >= 1.0 - beta_p - good.ci)
    rng = tape.derive("perturb").rng()
    S = sample_dataset(D, size, rng, spec.domain_size)
    worst = max_batch_changes(A, S, plan, ref, tape.derive("perturb-run"), D, rng, swaps=5)
    rep.add("perturbation_max_changes_per_batch", worst, 0.0, 1, worst <= 1)


def max_batch_changes(A, S, plan, ref, tape, D, rng, swaps=5) -> int:
    """Largest number of coupled outputs in one batch that change when a single
    example of ``S`` is replaced, over ``swaps`` random replacements."""
    base = coupled_batch_outputs(A, S, plan, ref, tape)
    worst = 0
    for _ in range(swaps):
        i = int(rng.integers(len(S)))
        x, y = D.sample(rng)
        S2 = S.replace(i, (int(x), 1 - int(S.labels[i])))
        other = coupled_batch_outputs(A, S2, plan, ref, tape)
        for row_a, row_b in zip(base, other):
            worst = max(worst, sum(a != b for a, b in zip(row_a, row_b)))
    return worst


def cmd_amplify(cfg, tape, trials, jobs, rep):
    spec, A, D = _noisy_rule(cfg, {"scale": 0.04, "alpha": 0.05}, domain=4, n=4, target="0011")
    rho, beta = float(_get(cfg, "rho", 0.02)), float(_get(cfg, "beta", 0.1))
    alpha = float(spec.param("alpha", 0.0))
    rho_p, eps, beta_p = (float(_get(cfg, k, v)) for k, v in
                          (("rho_p", 0.05), ("epsilon", 0.1), ("beta_p", 0.1)))
    ref = uniform_reference(A.reachable_set)

    def run(shared, rng):
        return boosting.amplify(A, D, alpha, rho, beta, rho_p, eps, beta_p, ref, shared, rng)

    def fn(shared, ra, rb):
        a, b = run(shared, ra), run(shared, rb)
        return a != b, population_loss(a, D) <= alpha + eps

    out = _paired(tape, trials, jobs, fn)
    dis = binomial_estimate(sum(o[0] for o in out), trials)
    good = binomial_estimate(sum(o[1] for o in out), trials)
    rep.extra["derived"] = {"rounds": boosting.AmplifyPlan(rho, beta, beta_p).rounds}
    rep.add_estimate("paired_disagreement", dis, rho_p, dis.estimate <= rho_p + dis.ci)
    rep.add_estimate("accurate_rate", good, 1.0 - beta_p, good.estimate >= 1.0 - beta_p - good.ci)


def cmd_boost(cfg, tape, trials, jobs, rep):
    d = int(_get(cfg, "domain_size", 64))
    gamma, eps = float(_get(cfg, "gamma", 0.25)), float(_get(cfg, "epsilon", 0.1))
    rho_p, beta_p = float(_get(cfg, "rho_p", 0.5)), float(_get(cfg, "beta_p", 0.1))
    c_T = float(_get(cfg, "c_T", 4.0))
    A = make_weak_stump_learner(gamma, d, int(_get(cfg, "weak_sample_size", 32)))
    ref = uniform_reference(A.reachable_set)
    first_log = []

    def trial(i):
        rng = tape.derive(("data", i)).rng()
        target = threshold_target(d, int(rng.integers(1, d)))
        D = noisy_distribution(target)
        log = first_log.append if i == 0 else None
        try:
            h, state = boosting.smooth_boost(A, D, eps, rho_p, beta_p, gamma, ref,
                                              tape.derive(("run", i)), rng, c_T, log)
        except AlgorithmFailure:
            return False, 0
        return population_loss(h, D) <= eps, state.round

    out = map_trials(trial, trials, jobs)
    good = binomial_estimate(sum(o[0] for o in out), trials)
    rep.extra["progress"] = first_log
    rep.add("mean_rounds", float(np.mean([o[1] for o in out])))
    rep.add_estimate("accurate_rate", good, 1.0 - beta_p, good.estimate >= 1.0 - beta_p - good.ci)


def cmd_audit(cfg, tape, trials, jobs, rep):
    spec = _spec(cfg, {"kind": "noisy-constant", "domain_size": 1, "sample_size": 1,
                       "params": {"scale": 0.0}})
    if spec.kind in ("list-globally-stable",):
        raise ConfigError("audit needs a single-hypothesis learner")
    rule = build(spec)
    D = fixture_distribution(spec)
    if "label_noise" in spec.params:
        D = noisy_distribution(spec.target_hypothesis, float(spec.param("label_noise")))
    seeded = rule if isinstance(rule, SeededRule) else derandomize(rule, uniform_reference(rule.reachable_set))
    alpha = float(spec.param("alpha", 0.0))
    report = metrics.audit(seeded, D, spec.sample_size, trials, tape, alpha, rep.seed, jobs)
    rep.extra["report"] = report.to_json()
    tv, fp = report.expected_tv, report.fixed_prior_tv
    dis = 1.0 - report.replicability_rate.estimate
    rep.add_estimate("replicability_rate", report.replicability_rate)
    slack = tv.ci + report.replicability_rate.ci
    rep.add_estimate("expected_tv", tv, dis, tv.estimate <= dis + slack)
    rep.add_estimate("fixed_prior_tv", fp, tv.estimate, fp.estimate <= tv.estimate + fp.ci + tv.ci)
    rep.add("tv_upper_by_fixed_prior", tv.estimate, tv.ci, 2 * fp.estimate,
            tv.estimate <= 2 * fp.estimate + 2 * fp.ci + tv.ci)


def cmd_verify(cfg, tape, trials, jobs, rep):
    tests = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    if not tests.exists():
        raise ConfigError(f"acceptance suite not found at {tests}")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-s", str(tests)],
                          capture_output=True, text=True)
    lines = [l for l in proc.stdout.splitlines() if l.startswith(("PASS", "FAIL"))]
    for line in lines:
        rep.add(line.split()[1], None, None, None, line.startswith("PASS"))
    rep.add("pytest_exit_code", proc.returncode, 0.0, 0, proc.returncode == 0)


HANDLERS = {
    "couple": cmd_couple, "sq": cmd_sq, "heavy-hitters": cmd_heavy_hitters,
    "agnostic": cmd_agnostic, "global-to-repl": cmd_global_to_repl,
    "listglobal-to-tv": cmd_listglobal_to_tv, "tv-to-dp": cmd_tv_to_dp, "amplify": cmd_amplify,
    "boost": cmd_boost, "audit": cmd_audit, "verify": cmd_verify,
}

DEFAULT_TRIALS = {"couple": 10000, "sq": 1000, "heavy-hitters": 500, "agnostic": 100,
                  "global-to-repl": 200, "listglobal-to-tv": 100, "tv-to-dp": 100,
                  "amplify": 200, "boost": 100, "audit": 1000, "verify": 0}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvindist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", help="hex seed (mandatory, here or in the config)")
        p.add_argument("--trials", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="report path (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"))
    return parser


def load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("seed", "trials", "jobs", "out", "format"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        cfg = load_config(args)
        if args.command != "verify" and "seed" not in cfg:
            raise ConfigError("a seed is required (--seed or config field 'seed')")
        seed = Seed.from_hex(str(cfg.get("seed", "0")))
        trials = int(cfg.get("trials", DEFAULT_TRIALS[args.command]))
        jobs = int(cfg.get("jobs", 1))
        fmt = cfg.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"unknown format {fmt!r}")
        if trials < 0 or jobs < 1:
            raise ConfigError("trials must be >= 0 and jobs >= 1")
        shown = {k: v for k, v in cfg.items() if k not in ("out", "jobs", "format")}
        rep = Report(args.command, seed.hex, shown)
        HANDLERS[args.command](cfg, Tape.root(seed).derive(args.command), trials, jobs, rep)
    except (ConfigError, PreconditionError, ValueError) as e:
        print(f"tvindist: {e}", file=sys.stderr)
        return 1
    except CouplingInconsistencyError as e:
        print(f"tvindist: invariant violation: {e}", file=sys.stderr)
        return 2
    text = rep.render(fmt)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not rep.passed:
        return 2
    return 0


def main() -> None:
    sys.exit(run())

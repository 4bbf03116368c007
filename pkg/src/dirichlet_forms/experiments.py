"""End-to-end scenarios behind the ``df`` command line.

Each ``run_*`` function builds its objects, writes CSV tables (a comment line
carrying the seed and a timestamp, then one header line), a
``verdicts.json`` sidecar and gnuplot companion scripts into the output
directory, and returns the :class:`Report`.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .capacity import capacity, exceptional_set_check
from .config import DEFAULT
from .forms import (ResolventEvaluator, SemigroupEvaluator, generator_from_form, form_from_generator,
                    form_from_graph, is_dirichlet_form, is_dirichlet_operator,
                    is_markovian_semigroup, zero_form)
from .ground_state import (detailed_balance_defect, gaussian_wavefunction,
                           geodesic_gaussian_wavefunction, ground_state_form, rayleigh_quotient,
                           second_variation_min, variational_residual)
from .process import (autocorrelation, conditional_mean, empirical_semigroup, fit_exponential,
                      ground_state_chain, stationary_histogram, stochastic_action, tv_distance)
from . import random_forms
from .state_space import build_circle_grid, build_line_grid

SCENARIOS = ("ou-verify", "heat", "roundtrip", "capacity")

GRID_DEFAULTS = {
    "ou-verify": (-6.0, 6.0, 601),
    "heat": (0.0, math.pi, 201),
    "roundtrip": (0.0, 1.0, 2),
    "capacity": (-1.0, 1.0, 41),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int = 42
    out: str = "df-out"
    grid_a: Optional[float] = None
    grid_b: Optional[float] = None
    grid_n: Optional[int] = None
    paths: int = 100_000
    horizon: float = 1e4
    burn_in: float = 10.0
    association_paths: int = 10_000
    circumference: float = 2 * math.pi
    circle_n: int = 400
    forms: int = 50
    counterexamples: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        a, b, n = GRID_DEFAULTS[self.scenario]
        self.grid_a = float(a if self.grid_a is None else self.grid_a)
        self.grid_b = float(b if self.grid_b is None else self.grid_b)
        self.grid_n = int(n if self.grid_n is None else self.grid_n)
        self.validate()

    def validate(self):
        if not (math.isfinite(self.grid_a) and math.isfinite(self.grid_b)) or self.grid_a >= self.grid_b:
            raise ConfigError("need finite grid-a < grid-b")
        if self.grid_n < 2:
            raise ConfigError("grid-n must be >= 2")
        if self.paths < 2 or self.association_paths < 2:
            raise ConfigError("path counts must be >= 2")
        if not self.horizon > self.burn_in >= 0:
            raise ConfigError("need horizon > burn-in >= 0")
        if not self.circumference > 0 or self.circle_n < 3:
            raise ConfigError("need circumference > 0 and circle-n >= 3")
        if self.forms < 1 or self.counterexamples < 0 or self.workers < 1:
            raise ConfigError("forms >= 1, counterexamples >= 0, workers >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    threshold: object = None
    detail: str = ""

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = "PASS" if self.passed else "FAIL"
        return d


@dataclass
class Report:
    command: str
    config: ExperimentConfig
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add(self, name, passed, value=None, threshold=None, detail=""):
        self.checks.append(Check(name, bool(passed), _plain(value), _plain(threshold), detail))

    @property
    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self):
        cfg = asdict(self.config)
        cfg.pop("out")
        cfg.pop("workers")
        return {
            "command": self.command,
            "seed": self.config.seed,
            "config": cfg,
            "checks": [c.to_dict() for c in self.checks],
            "failures": self.failures,
            "status": "PASS" if self.ok else "FAIL",
        }


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


class _Writer:
    def __init__(self, report: Report):
        self.report = report
        self.out = Path(report.config.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def csv(self, name, header, rows):
        path = self.out / name
        with path.open("w", newline="") as fh:
            fh.write(f"# df {self.report.command} seed={self.report.config.seed} "
                     f"generated={self.stamp}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        self.report.files.append(str(path))

    def text(self, name, body):
        path = self.out / name
        path.write_text(body)
        self.report.files.append(str(path))

    def verdicts(self):
        path = self.out / "verdicts.json"
        path.write_text(json.dumps(self.report.to_dict(), indent=2, sort_keys=True) + "\n")
        self.report.files.append(str(path))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _gnuplot(data, using, title, xlabel, ylabel, extra=""):
    return (f"# gnuplot companion for {data}\n"
            f"set datafile separator ','\nset key autotitle columnhead\n"
            f"set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n{extra}"
            f"plot '{data}' every ::1 using {using} with linespoints\n")


# -- ou-verify ----------------------------------------------------------------

# (x, t, observable) for the association check
ASSOCIATION_TRIPLES = [
    (0.0, 0.1, "step"),
    (1.0, 0.5, "x"),
    (-1.5, 0.25, "x2"),
    (2.0, 1.0, "cos"),
    (0.5, 0.05, "bump"),
    (-0.5, 0.75, "x"),
    (3.0, 0.3, "tanh"),
    (-2.5, 0.2, "window"),
    (1.0, 1.5, "x2"),
    (0.0, 2.0, "cos"),
]

OBSERVABLES = {
    "x": lambda x: x,
    "x2": lambda x: x ** 2,
    "step": lambda x: (x > 0).astype(float),
    "cos": np.cos,
    "bump": lambda x: np.exp(-x ** 2),
    "tanh": np.tanh,
    "window": lambda x: (np.abs(x) < 1).astype(float),
}


def _nearest(x, value):
    return int(np.argmin(np.abs(x - value)))


def run_ou_verify(cfg: ExperimentConfig) -> Report:
    rep = Report("ou-verify", cfg)
    wr = _Writer(rep)
    tol = DEFAULT
    t0 = time.perf_counter()

    space = build_line_grid(cfg.grid_a, cfg.grid_b, cfg.grid_n)
    x = space.coords[:, 0]
    psi = gaussian_wavefunction(space)
    gs = ground_state_form(psi)
    lam = gs.generator.eigenvalues
    wr.csv("spectrum.csv", ["k", "eigenvalue", "continuum"],
           [(k, lam[k], 2.0 * k) for k in range(min(8, lam.size))])
    wr.text("spectrum.gp", _gnuplot("spectrum.csv", "1:2", "ground-state spectrum", "k", "eigenvalue"))
    rep.add("zero_mode", abs(lam[0]) <= tol.zero_mode, lam[0], tol.zero_mode)
    gap = float(lam[1])
    rep.add("spectral_gap", 1.96 <= gap <= 2.04, gap, [1.96, 2.04])

    p0 = _nearest(x, 0.0)
    geo = geodesic_gaussian_wavefunction(space, p0)
    diff = float(np.max(np.abs(geo.values - psi.values)))
    rep.add("geodesic_reduction", diff <= 1e-10, diff, 1e-10)
    rep.add("detailed_balance", detailed_balance_defect(gs) <= 1e-12 * np.max(np.abs(gs.form.matrix)),
            detailed_balance_defect(gs))
    v = is_dirichlet_form(gs.form, seed=cfg.seed)
    rep.add("ground_state_dirichlet", v.passed, v.verdict, detail=f"certified={v.certified}")

    ones = np.ones(space.n)
    res = variational_residual(gs.form, ones)
    rep.add("first_variation", res <= 1e-10, res, 1e-10)
    hess = second_variation_min(gs.form, ones)
    rep.add("second_variation", abs(hess - gap) <= 1e-6, hess, gap)

    chain = ground_state_chain(psi)
    s1 = rayleigh_quotient(gs.form, ones)
    rep.add("action_identity", stochastic_action(chain) == s1, stochastic_action(chain), s1)
    rep.timings["spectral"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    hist = stationary_histogram(chain, cfg.horizon, cfg.burn_in, seed=cfg.seed)
    tv = tv_distance(hist, psi.density)
    wr.csv("stationary.csv", ["vertex", "x", "empirical", "mu_psi2"],
           [(i, x[i], hist[i], psi.density[i]) for i in range(space.n)])
    wr.text("stationary.gp", _gnuplot("stationary.csv", "2:3", "occupation vs mu psi^2", "x", "mass"))
    rep.add("stationary_tv", tv <= 0.02, tv, 0.02)
    rep.timings["stationary"] = time.perf_counter() - t1

    t1 = time.perf_counter()
    lags = np.linspace(0.0, 2.0, 21)
    cov, se = autocorrelation(chain, x, lags, cfg.paths, seed=cfg.seed, workers=cfg.workers)
    c, rate = fit_exponential(lags, cov)
    wr.csv("autocorr.csv", ["lag", "autocovariance", "std_error", "fit"],
           [(lags[k], cov[k], se[k], c * math.exp(-rate * lags[k])) for k in range(lags.size)])
    wr.text("autocorr.gp", _gnuplot("autocorr.csv", "1:2", "position autocovariance", "lag", "cov",
                                    extra="set logscale y\n"))
    rep.add("autocorr_rate", abs(rate - gap) <= 0.05 * gap, rate, [gap, 0.05])

    start = _nearest(x, 1.5)
    mr_lags = np.array([0.1, 0.25, 0.5])
    m, mse = conditional_mean(chain, x, start, mr_lags, max(cfg.paths // 5, 2), seed=cfg.seed + 1,
                              workers=cfg.workers)
    mean = float(psi.density @ x)
    shrink = (m - mean) / (x[start] - mean)
    pred = np.exp(-gap * mr_lags)
    rel = np.abs(shrink / pred - 1.0)
    wr.csv("mean_reversion.csv", ["lag", "conditional_mean", "std_error", "shrink", "predicted"],
           [(mr_lags[k], m[k], mse[k], shrink[k], pred[k]) for k in range(mr_lags.size)])
    rep.add("mean_reversion", bool(np.all(rel <= 0.05)), float(rel.max()), 0.05)
    rep.timings["autocorrelation"] = time.perf_counter() - t1

    t1 = time.perf_counter()
    sg = SemigroupEvaluator(chain.generator)
    rows, ok = [], True
    for k, (xv, t, name) in enumerate(ASSOCIATION_TRIPLES):
        f = OBSERVABLES[name](x)
        v0 = _nearest(x, xv)
        est, err = empirical_semigroup(chain, v0, t, f, cfg.association_paths,
                                       seed=cfg.seed + 1000 + k, workers=cfg.workers)
        exact = float(sg.apply(t, f)[v0])
        z = abs(est - exact) / err if err > 0 else (0.0 if est == exact else math.inf)
        ok &= z <= tol.mc_sigmas
        rows.append((x[v0], t, name, est, err, exact, z))
    wr.csv("association.csv", ["x", "t", "observable", "monte_carlo", "std_error", "semigroup", "z"], rows)
    rep.add("proper_association", ok, max(r[-1] for r in rows), tol.mc_sigmas)
    rep.timings["association"] = time.perf_counter() - t1
    rep.timings["total"] = time.perf_counter() - t0
    wr.verdicts()
    return rep


# -- heat ---------------------------------------------------------------------

def _spectrum_rows(lam, oracle):
    rows, ok = [], True
    for k, o in enumerate(oracle):
        err = abs(lam[k] - o) / max(o, 1.0)
        ok &= err <= 0.01
        rows.append((k, lam[k], o, err))
    return rows, ok


def run_heat(cfg: ExperimentConfig) -> Report:
    rep = Report("heat", cfg)
    wr = _Writer(rep)
    circle = build_circle_grid(cfg.circumference, cfg.circle_n)
    line = build_line_grid(cfg.grid_a, cfg.grid_b, cfg.grid_n)

    scale_c = 2 * math.pi / cfg.circumference
    oracle_c = [0.0] + [(scale_c * k) ** 2 for k in (1, 1, 2, 2)]
    scale_l = math.pi / (cfg.grid_b - cfg.grid_a)
    oracle_l = [(scale_l * k) ** 2 for k in range(4)]

    for label, space, oracle in (("circle", circle, oracle_c), ("line", line, oracle_l)):
        form = form_from_graph(space)
        gen = generator_from_form(form)
        rows, ok = _spectrum_rows(gen.eigenvalues, oracle)
        wr.csv(f"{label}_spectrum.csv", ["k", "eigenvalue", "continuum", "rel_error"], rows)
        rep.add(f"{label}_spectrum", ok, max(r[-1] for r in rows), 0.01)
        sg = SemigroupEvaluator(gen)
        for v in (is_dirichlet_form(form, seed=cfg.seed),
                  is_dirichlet_operator(gen, seed=cfg.seed),
                  is_markovian_semigroup(sg, [0.1, 1.0, 10.0], seed=cfg.seed)):
            rep.add(f"{label}_{v.property}", v.passed and v.certified, v.verdict,
                    detail=f"certified={v.certified}")

        # flattening of an indicator towards its mean
        coord = space.coords[:, 0]
        f = (coord < coord.min() + 0.25 * (coord.max() - coord.min())).astype(float)
        mean = space.inner(f, np.ones(space.n)) / space.total_measure
        ts = np.concatenate([[0.0], np.geomspace(1e-3, 10.0, 25)])
        dev = np.array([space.norm(sg.apply(t, f) - mean) for t in ts])
        wr.csv(f"{label}_flattening.csv", ["t", "deviation_from_mean"], zip(ts, dev))
        wr.text(f"{label}_flattening.gp",
                _gnuplot(f"{label}_flattening.csv", "1:2", "semigroup flattening", "t",
                         "|T_t f - mean|", extra="set logscale x\n"))
        rep.add(f"{label}_flattening_monotone", bool(np.all(np.diff(dev) <= 1e-12)),
                float(dev[-1]))
    wr.verdicts()
    return rep


# -- roundtrip ----------------------------------------------------------------

def roundtrip_residuals(form, rng):
    """Residuals of every link of the form-generator-semigroup-resolvent chain."""
    n = form.space.n
    gen = generator_from_form(form)
    back = form_from_generator(gen)
    r_fg = float(np.max(np.abs(back.matrix - form.matrix), initial=0.0))
    sg = SemigroupEvaluator(gen)
    f = rng.standard_normal(n)
    s, t = rng.uniform(0.01, 2.0, 2)
    a = sg.apply(s + t, f)
    r_sg = float(np.max(np.abs(a - sg.apply(s, sg.apply(t, f)))) / max(1.0, np.max(np.abs(f))))
    rv = ResolventEvaluator(gen)
    al, be = rng.uniform(0.1, 5.0, 2)
    ga, gb = rv.apply(al, f), rv.apply(be, f)
    r_ri = float(np.max(np.abs(ga - gb - (be - al) * rv.apply(al, gb))))
    r_q = float(np.max(np.abs(rv.quadrature(al, f, sg) - ga)))
    return r_fg, r_sg, r_ri, r_q


def checker_verdicts(form, seed, times=(0.1, 1.0, 10.0)):
    gen = generator_from_form(form)
    sg = SemigroupEvaluator(gen)
    return (is_dirichlet_form(form, seed=seed), is_dirichlet_operator(gen, seed=seed),
            is_markovian_semigroup(sg, times, seed=seed))


def run_roundtrip(cfg: ExperimentConfig) -> Report:
    rep = Report("roundtrip", cfg)
    wr = _Writer(rep)
    tol = DEFAULT
    rng = np.random.default_rng(cfg.seed)
    forms = random_forms.dirichlet_forms(cfg.seed, cfg.forms)
    rows = []
    worst = np.zeros(4)
    disagree = 0
    r0 = roundtrip_residuals(zero_form(build_line_grid(0.0, 1.0, 5)), rng)
    rows.append(("zero", 5, "custom", *r0, "PASS", "PASS", "PASS"))
    rep.add("zero_form_residuals", max(r0) <= 1e-14, max(r0), 1e-14)
    for k, form in enumerate(forms):
        r = roundtrip_residuals(form, rng)
        worst = np.maximum(worst, r)
        vs = checker_verdicts(form, cfg.seed + k)
        disagree += len({v.verdict for v in vs}) > 1 or vs[0].verdict != "PASS"
        rows.append((k, form.space.n, form.kind, *r, *(v.verdict for v in vs)))
    wr.csv("residuals.csv", ["form", "n", "kind", "form_generator", "semigroup_law",
                             "resolvent_identity", "quadrature", "dirichlet_form",
                             "dirichlet_operator", "markovian_semigroup"], rows)
    for name, value, thr in zip(("form_generator", "semigroup_law", "resolvent_identity", "quadrature"),
                                worst, (tol.roundtrip, tol.semigroup_law, tol.resolvent_identity,
                                        tol.resolvent_quadrature)):
        rep.add(f"{name}_residual", value <= thr, value, thr)

    crow = []
    for k, form in enumerate(random_forms.counterexamples(cfg.seed, cfg.counterexamples)):
        vs = checker_verdicts(form, cfg.seed + k)
        again = checker_verdicts(form, cfg.seed + k)
        reproducible = all(a.witness == b.witness for a, b in zip(vs, again))
        bad = any(v.verdict != "FAIL" for v in vs) or not reproducible
        disagree += bad
        crow.append((k, form.space.n, *(v.verdict for v in vs), reproducible))
    wr.csv("counterexamples.csv", ["case", "n", "dirichlet_form", "dirichlet_operator",
                                   "markovian_semigroup", "witness_reproducible"], crow)
    rep.add("checker_agreement", disagree == 0, disagree, 0)
    wr.verdicts()
    return rep


# -- capacity -----------------------------------------------------------------

def nested_sets(n, levels):
    c = n // 2
    sets = [[]]
    for k in range(1, levels + 1):
        lo, hi = max(c - k + 1, 0), min(c + k, n)
        sets.append(list(range(lo, hi)))
    return sets


def run_capacity(cfg: ExperimentConfig) -> Report:
    rep = Report("capacity", cfg)
    wr = _Writer(rep)
    tol = DEFAULT
    space = build_line_grid(cfg.grid_a, cfg.grid_b, cfg.grid_n)
    form = form_from_graph(space)
    sets = nested_sets(space.n, min(10, (space.n + 1) // 2))
    rows, pots, values = [], [], []
    agree = 0.0
    for k, S in enumerate(sets):
        a = capacity(form, S)
        b = capacity(form, S, method="projected-gradient") if S else a
        d = abs(a.value - b.value)
        agree = max(agree, d)
        values.append(a.value)
        rows.append((k, len(S), a.value, b.value, d, a.method, a.certificate["min_potential"],
                     a.certificate["max_potential"], a.kkt_residual))
        pots.append(a.potential)
    wr.csv("capacity.csv", ["level", "size", "cap_solve", "cap_projected_gradient", "abs_diff",
                            "method", "min_potential", "max_potential", "kkt_residual"], rows)
    x = space.coords[:, 0]
    wr.csv("potentials.csv", ["vertex", "x"] + [f"level{k}" for k in range(len(sets))],
           [(i, x[i], *(p[i] for p in pots)) for i in range(space.n)])
    wr.text("potentials.gp", _gnuplot("potentials.csv", "2:4", "equilibrium potentials", "x", "f*"))

    rep.add("empty_set", values[0] == 0.0, values[0], 0.0)
    rep.add("solver_agreement", agree <= tol.capacity_agreement, agree, tol.capacity_agreement)
    mono = bool(np.all(np.diff(values) >= -1e-10))
    rep.add("monotone", mono, float(np.min(np.diff(values))), -1e-10)
    full = capacity(form, range(space.n)).value
    rep.add("full_space", full == space.total_measure, full, space.total_measure)
    rng = np.random.default_rng(cfg.seed)
    worst = -math.inf
    for _ in range(10):
        A = rng.choice(space.n, int(rng.integers(1, 6)), replace=False)
        B = rng.choice(space.n, int(rng.integers(1, 6)), replace=False)
        lhs = capacity(form, np.union1d(A, B)).value
        worst = max(worst, lhs - capacity(form, A).value - capacity(form, B).value)
    rep.add("subadditive", worst <= 1e-10, worst, 1e-10)
    bounds = all(capacity(form, S).within_unit_interval for S in sets)
    rep.add("potential_bounds", bounds)
    exc = exceptional_set_check(form)
    rep.add("no_exceptional_sets", exc["no_exceptional_sets"], exc["min_capacity"])
    wr.verdicts()
    return rep


RUNNERS = {
    "ou-verify": run_ou_verify,
    "heat": run_heat,
    "roundtrip": run_roundtrip,
    "capacity": run_capacity,
}


def run(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.scenario](cfg)

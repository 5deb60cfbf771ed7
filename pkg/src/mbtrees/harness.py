"""Experiment configs, seeded replicate execution and reports."""

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import frag, growth, gw, metrics
from .errors import ConfigError
from .mb_core import sample_mb_tree, tagged_transition_row
from .models import KernelModel, admissible_near, count_range, load_model
from .partitions import (AtomicMeasure, MassPartition, partition_distance, prokhorov_distance,
                         rank_mass_partition)

THREADS_ENV = "MBTREES_THREADS"


@dataclass
class ExperimentConfig:
    kind: str
    criterion: str
    models: dict
    n_grid: list = field(default_factory=list)
    replicates: int = 0
    seed: int = 0
    threads: int = 1
    gamma: float = None
    beta: float = None
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}")
        for name in ("kind", "criterion", "models"):
            if name not in d:
                raise ConfigError(f"field '{name}': missing")
        if d["kind"] not in KINDS:
            raise ConfigError(f"field 'kind': {d['kind']!r} is not one of {sorted(KINDS)}")
        if not isinstance(d["models"], dict):
            raise ConfigError("field 'models': must map names to model references")
        for name, kind in (("replicates", int), ("seed", int), ("threads", int)):
            if name in d and (not isinstance(d[name], int) or isinstance(d[name], bool) or d[name] < 0):
                raise ConfigError(f"field '{name}': must be a nonnegative integer")
        if "n_grid" in d and not (isinstance(d["n_grid"], list) and all(isinstance(n, int) and n > 0 for n in d["n_grid"])):
            raise ConfigError("field 'n_grid': must be a list of positive integers")
        for name, tol in d.get("tolerances", {}).items():
            if not isinstance(tol, (int, float)) or not tol > 0:
                raise ConfigError(f"field 'tolerances.{name}': must be positive")
        if d.get("threads", 1) < 1:
            raise ConfigError("field 'threads': must be at least 1")
        return cls(**d, base_dir=str(base_dir))

    @classmethod
    def from_json(cls, text, base_dir="."):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d, base_dir)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        try:
            return cls.from_json(text, path.parent)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def model(self, name):
        try:
            ref = self.models[name]
        except KeyError:
            raise ConfigError(f"field 'models': no model named {name!r}") from None
        return load_model(ref, self.base_dir)

    def tol(self, name):
        try:
            return float(self.tolerances[name])
        except KeyError:
            raise ConfigError(f"field 'tolerances': missing {name!r}") from None


@dataclass
class Row:
    criterion_id: str
    estimate: float
    stderr_or_stat: float
    threshold: float
    passed: bool
    note: str = ""


@dataclass
class Report:
    kind: str
    seed: int
    rows: list = field(default_factory=list)
    table: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def add(self, cid, estimate, stat, threshold, passed, note=""):
        self.rows.append(Row(str(cid), _num(estimate), _num(stat), _num(threshold), bool(passed), note))

    def point(self, cid, series, x, value):
        self.table.append({"criterion_id": str(cid), "series": str(series), "x": _num(x), "value": _num(value)})

    def lines(self):
        out = []
        for r in self.rows:
            flag = "PASS" if r.passed else "FAIL"
            out.append(f"[{flag}] criterion {r.criterion_id}: estimate={r.estimate!r} "
                       f"stat={r.stderr_or_stat!r} threshold={r.threshold!r} {r.note}".rstrip())
        return out

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, "rows": [asdict(r) for r in self.rows], "table": self.table}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["seed"], [Row(**r) for r in d["rows"]], d["table"])


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


CSV_COLUMNS = ["criterion_id", "estimate", "stderr_or_stat", "threshold", "pass"]


def report_csv(r):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in r.rows:
        w.writerow([row.criterion_id] + ["" if v is None else repr(v) for v in
                                         (row.estimate, row.stderr_or_stat, row.threshold)]
                   + ["true" if row.passed else "false"])
    return buf.getvalue()


def table_csv(r):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion_id", "series", "x", "value"])
    for p in r.table:
        w.writerow([p["criterion_id"], p["series"], "" if p["x"] is None else repr(p["x"]),
                    "" if p["value"] is None else repr(p["value"])])
    return buf.getvalue()


def report_json(r):
    return json.dumps(r.to_dict(), indent=1, sort_keys=True) + "\n"


def emit_report(r, fmt, path):
    """Write ``r`` as csv or json; csv also writes ``<stem>.table.csv`` when there is a table."""
    path = Path(path)
    if fmt == "json":
        path.write_text(report_json(r))
    elif fmt == "csv":
        path.write_text(report_csv(r))
        if r.table:
            path.with_name(path.stem + ".table.csv").write_text(table_csv(r))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def resolve_threads(requested):
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1")
        return value
    return max(1, int(requested or 1))


def chunk_rng(seed, stream, chunk):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, chunk)))


def _run_chunk(fn, seed, stream, c, m, args):
    return fn(chunk_rng(seed, stream, c), m, *args)


def replicate(fn, reps, seed, stream, threads=1, chunk=1000, args=()):
    """Run ``fn(rng, count, *args)`` over fixed chunks and stack in chunk order.

    Chunk c always draws from stream (seed, stream, c), so the result does
    not depend on ``threads``.
    """
    jobs = [(c, min(chunk, reps - c * chunk)) for c in range(-(-reps // chunk))]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_run_chunk, *zip(*[(fn, seed, stream, c, m, args) for c, m in jobs])))
    else:
        parts = [_run_chunk(fn, seed, stream, c, m, args) for c, m in jobs]
    return np.concatenate(parts) if parts else np.zeros(0)


def _sole(cfg, name=None):
    if name is None:
        if len(cfg.models) != 1:
            raise ConfigError("field 'models': exactly one model expected")
        name = next(iter(cfg.models))
    return cfg.model(name)


def _n(cfg, default=None):
    if cfg.n_grid:
        return cfg.n_grid[0]
    if default is None:
        raise ConfigError("field 'n_grid': missing")
    return default


# ---------------------------------------------------------------- kinds


def run_gw_kernel_exact(cfg, threads):
    spec = _sole(cfg)
    tol = cfg.tol("abs")
    grid = cfg.n_grid or list(range(1, 11))
    counts = gw.count_tables(spec, max(grid))
    kernel = gw.gw_splitting_kernel(spec, counts)
    r = Report(cfg.kind, cfg.seed)
    worst = 0.0
    for n in grid:
        for i in range(1, spec.kappa + 1):
            if counts.tree[i - 1, n] <= 0:
                continue
            census = gw.census_split_law(spec, n, i)
            enum = dict(kernel.support(n, i))
            err = max(abs(float(census.get(k, 0)) - enum.get(k, 0.0)) for k in set(census) | set(enum))
            worst = max(worst, err)
            r.point(cfg.criterion, f"type{i}", n, err)
    r.add(cfg.criterion, worst, None, tol, worst <= tol, "max |enumerated - census|")
    return r


def run_otter_dwass(cfg, threads):
    spec = _sole(cfg)
    tol = cfg.tol("abs")
    n_max = _n(cfg, 200)
    p_max = int(cfg.params.get("p_max", 5))
    dp, cyc = gw.otter_dwass_table(spec, n_max, p_max)
    err = float(np.max(np.abs(dp[1:, 1:] - cyc[1:, 1:])))
    r = Report(cfg.kind, cfg.seed)
    for p in range(1, p_max + 1):
        r.point(cfg.criterion, f"p={p}", n_max, dp[p, n_max])
    r.add(cfg.criterion, err, None, tol, err <= tol, f"max |DP - (p/n)P(S_n=-p)|, p<={p_max}, n<={n_max}")
    return r


def run_local_limit(cfg, threads):
    spec = _sole(cfg)
    target = _n(cfg, 2000)
    lo, hi = cfg.tol("low"), cfg.tol("high")
    counts = gw.count_tables(spec, count_range(target))
    pd = gw.perron_data(spec)
    r = Report(cfg.kind, cfg.seed)
    for z in cfg.params.get("z", [[1], [2], [3]]):
        law = counts.forest_law(z)
        n = admissible_near(law, target)
        _, span = gw.lattice(law)
        ratio = law[n] / gw.asymptotic_count_estimate(spec, z, n, span, pd)
        tag = ",".join(map(str, z))
        r.point(cfg.criterion, f"z=({tag})", n, ratio)
        r.add(f"{cfg.criterion}[z=({tag}),n={n}]", ratio, span, hi, lo <= ratio <= hi,
              f"ratio in [{lo}, {hi}]; stat column is the lattice span")
    return r


def _tagged_chunk(rng, m, kernel, n, i):
    out = np.zeros((m, 2), dtype=np.int64)
    for k in range(m):
        t = sample_mb_tree(kernel, n, i, rng)
        v = int(t.label_node[0])
        while t.depth[v] > 1:
            v = int(t.parent[v])
        if t.depth[v] == 1:
            out[k] = t.size[v], t.type[v]
    return out


def run_tagged_chain(cfg, threads):
    model = _sole(cfg)
    n = _n(cfg, 15)
    i = int(cfg.params.get("start_type", 1))
    alpha = cfg.tol("p_value")
    kernel = model.build(n)
    obs = replicate(_tagged_chunk, cfg.replicates, cfg.seed, 0, threads, 5000, (kernel, n, i))
    row = tagged_transition_row(kernel, n, i)
    stay = 1.0 - sum(row.values())
    cells = sorted(row) + ([(0, 0)] if stay > 1e-12 else [])
    expected = np.array([row.get(c, stay) for c in cells]) * len(obs)
    codes = {c: k for k, c in enumerate(cells)}
    counts = np.zeros(len(cells))
    stray = 0
    for s, t in map(tuple, obs):
        if (s, t) in codes:
            counts[codes[(s, t)]] += 1
        else:
            stray += 1
    # pool sparse cells so every expected count is at least 5
    order = np.argsort(expected)
    keep, pool_e, pool_o = [], 0.0, 0.0
    for k in order:
        if expected[k] < 5 or pool_e and pool_e < 5:
            pool_e += expected[k]
            pool_o += counts[k]
        else:
            keep.append(k)
    e = list(expected[keep]) + ([pool_e] if pool_e else [])
    o = list(counts[keep]) + ([pool_o] if pool_e else [])
    res = stats.chisquare(o, e)
    r = Report(cfg.kind, cfg.seed)
    for c, k in codes.items():
        r.point(cfg.criterion, f"({c[0]},{c[1]})", counts[k] / len(obs), expected[k] / len(obs))
    ok = stray == 0 and res.pvalue > alpha
    r.add(cfg.criterion, res.pvalue, res.statistic, alpha, ok,
          f"chi-square p-value over {len(e)} cells; {stray} outcomes off the support")
    return r


def _gw_path_chunk(rng, m, spec, counts, n, i):
    out = np.zeros((m, spec.kappa + 1))
    for k in range(m):
        t = gw.sample_conditioned_gw(spec, n, i, rng, counts=counts)
        v = int(t.label_node[0])
        out[k, 0] = t.depth[v]
        while v >= 0:
            out[k, t.type[v]] += 1
            v = int(t.parent[v])
    return out


def _gw_paths(cfg, spec, target, threads, stream):
    counts = gw.count_tables(spec, count_range(target))
    n = admissible_near(counts.tree_law(1), target)
    data = replicate(_gw_path_chunk, cfg.replicates, cfg.seed, stream, threads, 100, (spec, counts, n, 1))
    return n, data


def run_type_mixing(cfg, threads):
    spec = _sole(cfg)
    tol = cfg.tol("abs")
    n, data = _gw_paths(cfg, spec, _n(cfg, 2000), threads, 0)
    freq = data[:, 1:].sum(axis=0) / data[:, 1:].sum()
    chi = gw.perron_data(spec).chi
    r = Report(cfg.kind, cfg.seed)
    for j in range(spec.kappa):
        err = abs(freq[j] - chi[j])
        r.point(cfg.criterion, f"type{j + 1}", n, freq[j])
        r.add(f"{cfg.criterion}[type {j + 1}]", freq[j], err, tol, err <= tol, f"chi={float(chi[j])!r}, n={n}")
    return r


def run_gw_limit(cfg, threads):
    names = sorted(cfg.models)
    if len(names) != 2:
        raise ConfigError("field 'models': gw_limit needs exactly two specs")
    tol = cfg.tol("rel")
    target = _n(cfg, 2000)
    means, consts, ses = {}, {}, {}
    r = Report(cfg.kind, cfg.seed)
    for stream, name in enumerate(names):
        spec = cfg.model(name)
        n, data = _gw_paths(cfg, spec, target, threads, stream)
        scaled = data[:, 0] / math.sqrt(n)
        means[name] = scaled.mean()
        ses[name] = scaled.std(ddof=1) / math.sqrt(len(scaled))
        pd = gw.perron_data(spec)
        consts[name] = pd.sigma * math.sqrt(pd.a[0])
        r.point(cfg.criterion, name, n, means[name])
    a, b = names
    ratio = means[a] / means[b]
    expect = consts[b] / consts[a]
    err = abs(ratio / expect - 1.0)
    se = ratio * math.hypot(ses[a] / means[a], ses[b] / means[b])
    r.add(cfg.criterion, ratio, se, tol, err <= tol,
          f"E[depth]/sqrt(n) ratio {a}/{b} vs sigma*sqrt(a1) ratio {b}/{a} = {float(expect)!r}; rel err {err:.4f}")
    return r


def _urn_chunk(rng, m, w, vals, probs, steps):
    return growth.urn_limit_sample(w, vals, probs, steps, rng, reps=m)


def run_urn_limit(cfg, threads):
    steps = int(cfg.params.get("steps", 10**4))
    ks_tol = cfg.tol("ks")
    r = Report(cfg.kind, cfg.seed)
    beta = cfg.beta if cfg.beta is not None else 1.0
    w0 = cfg.params.get("polya_initial", [1.0, 1.0])
    lim = replicate(_urn_chunk, cfg.replicates, cfg.seed, 0, threads, 1000, (w0, [beta], [1.0], steps))
    ks = metrics.ks_statistic(lim[:, 0], cdf=stats.beta(w0[0] / beta, w0[1] / beta).cdf)
    r.add(f"{cfg.criterion}[polya]", float(lim[:, 0].mean()), ks, ks_tol, ks < ks_tol, "KS vs Beta limit")
    ri = cfg.params["random"]
    lim = replicate(_urn_chunk, cfg.replicates, cfg.seed, 1, threads, 1000,
                    (ri["initial"], ri["values"], ri["probs"], steps))
    gaps = np.diff(np.sort(lim, axis=1), axis=1)
    ok = bool(np.all(lim > 0) and np.all(gaps > 0))
    r.add(f"{cfg.criterion}[random]", float(lim.min()), float(gaps.min()), 0.0, ok,
          "min coordinate and min pairwise gap must be positive")
    return r


def _J_chunk(rng, m, bricks, n, i):
    return growth.growth_root_splits(bricks, n, i, m, rng).J


def run_ell_weights(cfg, threads):
    bricks = _sole(cfg)
    n = _n(cfg, 10**4)
    i = int(cfg.params.get("type", 1))
    ks = cfg.params.get("k", [1, 2, 3])
    tol = cfg.tol("rel")
    gamma = 1.0 / (1.0 + sum(a["q"] * a["edges"] for a in bricks.alphabet))
    J = replicate(_J_chunk, cfg.replicates, cfg.seed, 0, threads, 10**4, (bricks, n, i))
    exact = growth.ell_weights(bricks, i, max(ks), "closed_form")
    r = Report(cfg.kind, cfg.seed)
    for k in ks:
        p = float(np.mean(J == k))
        est = n**gamma * p
        se = n**gamma * math.sqrt(p * (1 - p) / len(J))
        err = abs(est / exact[k] - 1.0)
        r.point(cfg.criterion, "empirical", k, est)
        r.point(cfg.criterion, "closed_form", k, exact[k])
        r.add(f"{cfg.criterion}[k={k}]", est, se, tol, err <= tol, f"closed form {float(exact[k])!r}; rel err {err:.4f}")
    return r


def _weight_chunk(rng, m, bricks, n, i, mode):
    return growth.growth_root_splits(bricks, n, i, m, rng).weights(i, mode)


def run_kernel_convergence(cfg, threads):
    bricks = _sole(cfg)
    n = _n(cfg, 10**4)
    i = int(cfg.params.get("type", 1))
    mode = cfg.params.get("mode", "critical")
    k_max = int(cfg.params.get("k_max", 50))
    comp_samples = int(cfg.params.get("component_samples", 10**4))
    tol = cfg.tol("rel")
    gamma = 1.0 / (1.0 + sum(a["q"] * a["edges"] for a in bricks.alphabet))
    w = replicate(_weight_chunk, cfg.replicates, cfg.seed, 0, threads, 10**4, (bricks, n, i, mode))
    est = n**gamma * w.mean()
    se = n**gamma * w.std(ddof=1) / math.sqrt(len(w))
    ell = growth.ell_weights(bricks, i, k_max, "closed_form") if bricks.equal_brick_edges() is not None \
        else growth.ell_weights(bricks, i, k_max, "monte_carlo", chunk_rng(cfg.seed, 2, 0))
    rng = chunk_rng(cfg.seed, 1, 0)
    r = Report(cfg.kind, cfg.seed)
    target = 0.0
    for k in range(0 if bricks.out_degree(i) else 1, k_max + 1):
        masses, types = growth.growth_dislocation_samples(bricks, i, k, comp_samples, rng)
        part = ell[k] * float(growth.ranked_weight(masses, types, i, mode).mean())
        target += part
        r.point(cfg.criterion, "component", k, part)
    r.point(cfg.criterion, "empirical", n, est)
    r.point(cfg.criterion, "truncated_sum", k_max, target)
    err = abs(est / target - 1.0)
    r.add(cfg.criterion, est, se, tol, err <= tol, f"truncated sum over k<={k_max}: {float(target)!r}; rel err {err:.4f}")
    return r


def _marginal_discrete_chunk(rng, m, kernel, n, i):
    out = np.zeros((m, 2))
    for k in range(m):
        t = sample_mb_tree(kernel, n, i, rng)
        a, b = int(t.label_node[0]), int(t.label_node[1])
        out[k, 0] = t.depth[a]
        anc = set()
        while a >= 0:
            anc.add(a)
            a = int(t.parent[a])
        while b not in anc:
            b = int(t.parent[b])
        out[k, 1] = t.depth[b]
    return out


def _marginal_continuum_chunk(rng, m, d, i):
    p = frag.map_params(d)
    out = np.zeros((m, 2))
    for k in range(m):
        out[k, 0] = frag.absorption_time(d, i, rng, p)
        out[k, 1] = frag.simulate_marginal_tree(d, i, 2, rng).split_height(1, 2)
    return out


def run_marginal_compare(cfg, threads):
    kmodel = cfg.model("discrete")
    d = cfg.model("continuum")
    if not isinstance(kmodel, KernelModel):
        raise ConfigError("field 'models.discrete': must be a kernel model")
    n = _n(cfg, 2048)
    i = int(cfg.params.get("type", 1))
    tol = cfg.tol("ks")
    kernel = kmodel.build(n)
    disc = replicate(_marginal_discrete_chunk, cfg.replicates, cfg.seed, 0, threads, 500, (kernel, n, i))
    disc = disc / n**d.gamma
    cont = replicate(_marginal_continuum_chunk, cfg.replicates, cfg.seed, 1, threads, 500, (d, i))
    r = Report(cfg.kind, cfg.seed)
    for col, name in enumerate(("D1", "D2")):
        ks = metrics.ks_statistic(disc[:, col], cont[:, col])
        r.point(cfg.criterion, f"{name}_discrete_mean", n, disc[:, col].mean())
        r.point(cfg.criterion, f"{name}_continuum_mean", n, cont[:, col].mean())
        r.add(f"{cfg.criterion}[{name}]", float(disc[:, col].mean()), ks, tol, ks < tol,
              f"two-sample KS; continuum mean {float(cont[:, col].mean())!r}")
    return r


def _height_chunk(rng, m, kernel, n, i):
    return np.array([sample_mb_tree(kernel, n, i, rng, label=False).height for _ in range(m)], dtype=float)


def run_height_moments(cfg, threads):
    grid = cfg.n_grid or [2**k for k in range(7, 14)]
    tol = cfg.tol("factor")
    i = int(cfg.params.get("type", 1))
    r = Report(cfg.kind, cfg.seed)
    for stream, name in enumerate(sorted(cfg.models)):
        model = cfg.model(name)
        gamma = model.gamma if cfg.gamma is None else cfg.gamma
        kernel = model.build(max(grid))
        vals = []
        for j, n in enumerate(grid):
            h = replicate(_height_chunk, cfg.replicates, cfg.seed, stream * 100 + j, threads, 250, (kernel, n, i))
            vals.append(h.mean() / n**gamma)
            r.point(cfg.criterion, name, n, vals[-1])
        spread = max(vals) / min(vals)
        r.add(f"{cfg.criterion}[{name}]", spread, None, tol, spread < tol, "max/min of E[H_n]/n^gamma")
    return r


def _depth_chunk(rng, m, bricks, steps):
    out = np.zeros(m)
    for k in range(m):
        state = growth.grow(None, steps, rng, bricks=bricks)
        out[k] = growth.vertex_depths(state).mean()
    return out


def run_growth_scaling(cfg, threads):
    tol = cfg.tol("rel")
    grid = cfg.n_grid or [10**3, 10**4]
    r = Report(cfg.kind, cfg.seed)
    for stream, name in enumerate(sorted(cfg.models)):
        bricks = cfg.model(name)
        gamma = 1.0 / (1.0 + sum(a["q"] * a["edges"] for a in bricks.alphabet))
        vals = []
        for j, n in enumerate(grid):
            dep = replicate(_depth_chunk, cfg.replicates, cfg.seed, stream * 100 + j, threads, 100, (bricks, n))
            vals.append(dep.mean() / n**gamma)
            r.point(cfg.criterion, name, n, vals[-1])
        err = abs(vals[-1] / vals[0] - 1.0)
        r.add(f"{cfg.criterion}[{name}]", vals[-1], err, tol, err <= tol,
              "mean vertex depth / n^gamma at the two ends of the grid")
    return r


def _random_measure(rng, k, dim, total):
    m = rng.random(k) + 0.05
    return AtomicMeasure(rng.random((k, dim)), m / m.sum() * total)


def run_prokhorov_props(cfg, threads):
    tol = cfg.tol("abs")
    rng = chunk_rng(cfg.seed, 0, 0)
    trials = int(cfg.params.get("trials", 100))
    r = Report(cfg.kind, cfg.seed)

    worst = 0.0
    for _ in range(trials):
        dim = int(rng.integers(1, 4))
        mu, nu, rho = (_random_measure(rng, int(rng.integers(1, 9)), dim, 1.0) for _ in range(3))
        dmn, dnm = prokhorov_distance(mu, nu), prokhorov_distance(nu, mu)
        worst = max(worst, prokhorov_distance(mu, mu), abs(dmn - dnm),
                    dmn - prokhorov_distance(mu, rho) - prokhorov_distance(rho, nu))
    r.add(f"{cfg.criterion}[prokhorov axioms]", worst, None, tol, worst <= tol, "identity, symmetry, triangle")

    bad = 0
    for _ in range(trials):
        k = int(rng.integers(1, 8))
        m = rng.random(k)
        s = rank_mass_partition(zip(m / m.sum() * rng.random(), rng.integers(1, 4, size=k)))
        bad += rank_mass_partition(s.atoms) != s or partition_distance(s, rank_mass_partition(s.atoms)) > tol
    r.add(f"{cfg.criterion}[rank idempotence]", bad, None, 0, bad == 0, "partitions changed by re-ranking")

    spec = cfg.model("gw")
    counts = gw.count_tables(spec, 40)
    worst = 0.0
    parity = True
    for _ in range(trials):
        n = admissible_near(counts.tree_law(1), int(rng.integers(5, 40)))
        t = gw.sample_conditioned_gw(spec, n, 1, rng, counts=counts)
        labels = rng.choice(np.arange(1, n + 1), size=min(n, 6), replace=False)
        lt = metrics.distance_matrix(t, labels)
        worst = max(worst, metrics.four_point_violation(lt))
        parity = parity and metrics.gromov_products_ok(lt)
    d = cfg.model("frag")
    for _ in range(trials // 4):
        lt = metrics.distance_matrix(frag.simulate_marginal_tree(d, 1, 5, rng), range(1, 6))
        worst = max(worst, metrics.four_point_violation(lt))
        parity = parity and metrics.gromov_products_ok(lt)
    r.add(f"{cfg.criterion}[four-point]", worst, None, tol, worst <= tol and parity,
          "largest four-point excess; integer trees also checked for even Gromov products")

    pd = gw.perron_data(spec)
    biased, succ = gw.kesten_bias(spec, pd)
    err = max([abs(sum(p for _, p in law) - 1.0) for law in biased] + list(np.abs(succ.sum(axis=1) - 1.0)))
    r.add(f"{cfg.criterion}[kesten normalization]", err, None, tol, err <= tol, "biased laws and spine rows")

    p, cross = gw.extinct_conditioned_offspring(spec)
    err = max(abs(sum(q for _, q in law) - 1.0) for law in cross.values())
    r.add(f"{cfg.criterion}[extinct-conditioned normalization]", err, None, tol, err <= tol, f"p={[float(x) for x in p]!r}")
    radius, ok = gw.subcriticality_check(cross, spec.kappa)
    want = cfg.params.get("expected_radius")
    close = want is None or abs(radius - want) <= tol
    r.add(f"{cfg.criterion}[subcriticality]", radius, None, 1.0, ok and close,
          f"block spectral radius; expected {want!r}")

    mp = frag.map_params(d)
    err = 0.0
    for i in range(1, d.kappa + 1):
        for q in (0.0, 1.0, 2.0):
            psi_direct = sum(w * sum(m - m ** (1 + q) for m, t in s.atoms if t == i) for w, s in d.measures[i - 1])
            err = max(err, abs(mp.psi(i, q) - psi_direct))
            for j in range(1, d.kappa + 1):
                if j == i:
                    continue
                vals, probs = mp.jump_law(i, j)
                lam = mp.rate(i, j)
                via_law = lam * float(np.dot(probs, np.exp(-q * vals))) if lam else 0.0
                err = max(err, abs(mp.transform(i, j, q) - frag.atom_sum(d, i, j, q)), abs(via_law - frag.atom_sum(d, i, j, q)))
    r.add(f"{cfg.criterion}[MAP Laplace identity]", err, None, tol, err <= tol, "q in {0,1,2}")
    return r


KINDS = {
    "gw_kernel_exact": run_gw_kernel_exact,
    "otter_dwass": run_otter_dwass,
    "local_limit": run_local_limit,
    "tagged_chain": run_tagged_chain,
    "type_mixing": run_type_mixing,
    "gw_limit": run_gw_limit,
    "urn_limit": run_urn_limit,
    "ell_weights": run_ell_weights,
    "kernel_convergence": run_kernel_convergence,
    "marginal_compare": run_marginal_compare,
    "height_moments": run_height_moments,
    "prokhorov_props": run_prokhorov_props,
    "growth_scaling": run_growth_scaling,
}


def run_experiment(cfg, threads=None):
    """Dispatch ``cfg`` to its experiment; the result depends only on (cfg, seed)."""
    t = resolve_threads(cfg.threads if threads is None else threads)
    return KINDS[cfg.kind](cfg, t)

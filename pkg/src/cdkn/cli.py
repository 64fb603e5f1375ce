"""Command-line surface.

Every subcommand emits a ``cdkn-report/1`` JSON document (or a CSV
flattening) that echoes enough configuration to reproduce the run
bit-for-bit in exact mode.  Exit codes: 0 success, 1 usage, 2 input
error, 3 verification-negative, 4 truncation where completeness was
demanded.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from fractions import Fraction

import click

from . import cd_verify, entropy, generators, poincare, spacefile, transport, uniqueness
from .errors import CdknError, EmptyChainSetError, MetricError, ParseError
from .geodesics import default_eps_geo
from .parallel import parallel_map
from .space import ball as make_ball
from .space import default_radius_sweep, doubling_constant, validate_metric

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NEGATIVE = 3
EXIT_TRUNCATED = 4


def _parse_number(text):
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    try:
        return int(text)
    except ValueError:
        return float(text)


def _parse_dim(text):
    if text in ("inf", "infinity", "oo"):
        return math.inf
    return float(text)


def _load(space_path):
    return spacefile.load_space(space_path)


def _eps(eps_opt, k):
    if eps_opt is None:
        return default_eps_geo(k)
    return _parse_number(eps_opt)


def _measure(space, spec_text):
    kind, _, arg = spec_text.partition(":")
    if kind == "uniform":
        return transport.ProbMeasure.uniform(space)
    if kind == "dirac":
        idx = space.index_of(arg) if arg in space.points else int(arg)
        return transport.ProbMeasure.dirac(space, idx)
    if kind == "dirichlet":
        pairs = cd_verify.sample_measure_pairs(space, 1, int(arg))
        return pairs[0][0]
    if kind == "file":
        with open(arg) as fh:
            weights = [spacefile.decode_number(x) for x in json.load(fh)]
        return transport.ProbMeasure.create(tuple(weights))
    raise click.UsageError(f"unknown measure spec {spec_text!r}")


def _function(space, spec_text):
    kind, _, arg = spec_text.partition(":")
    if kind == "dist":
        idx = space.index_of(arg) if arg in space.points else int(arg)
        return [float(space.dist[idx][q]) for q in range(space.n)]
    if kind == "random":
        import numpy as np
        rng = np.random.default_rng(int(arg))
        raw = rng.uniform(0.0, float(space.diam), size=space.n)
        return poincare.lipschitz_project(space, raw)
    if kind == "step":
        diam = float(space.diam)
        a, b = 0.25 * diam, 0.5 * diam
        return [min(1.0, max(0.0, (float(space.dist[0][q]) - a) / (b - a)))
                for q in range(space.n)]
    raise click.UsageError(f"unknown function spec {spec_text!r}")


def _emit(report: spacefile.RunReport, out, fmt, plot_path=None, plot_fn=None):
    if plot_path and plot_fn is not None:
        plot_fn(plot_path)
    doc = report.to_json()
    if fmt == "csv":
        text = _csv_flatten(doc)
    else:
        text = json.dumps(doc, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _csv_flatten(doc):
    rows = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}[{i}]", v)
        else:
            rows.append((prefix, obj))

    walk("", doc)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue().rstrip("\n")


def _fail(code, kind, message):
    click.echo(json.dumps({"error": {"kind": kind, "message": str(message)}}),
               err=True)
    sys.exit(code)


common = [
    click.option("--space", "space_path", type=click.Path(), default=None,
                 help="space file (cdkn-space/1)"),
    click.option("--k", "k", type=int, default=8, show_default=True),
    click.option("--eps-geo", "eps_geo", default=None,
                 help="chain tolerance (default 1.5/k); rationals like 3/16"),
    click.option("--kappa", type=float, default=0.0, show_default=True),
    click.option("--dim", default="inf", show_default=True,
                 help="dimension bound N (real or 'inf')"),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--samples", type=int, default=20, show_default=True),
    click.option("--cap", type=int, default=10_000, show_default=True),
    click.option("--tol", type=float, default=None),
    click.option("--out", type=click.Path(), default=None),
    click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                 default="json", show_default=True),
    click.option("--plot", "plot_path", type=click.Path(), default=None),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Curvature-dimension checks on finite metric measure spaces."""


@main.command()
@with_common
def validate(space_path, **opts):
    """Validate the metric axioms of a space file."""
    space = _load(space_path)
    report = validate_metric(space)
    with spacefile.timed_report("validate", {"space": space_path}) as rr:
        rr.results = {"ok": report.ok, "violations": report.violations}
    _emit(rr, opts["out"], opts["fmt"])
    if not report.ok:
        sys.exit(EXIT_NEGATIVE)


@main.command()
@click.option("--mu", required=True, help="uniform | dirac:ID | dirichlet:SEED | file:PATH")
@click.option("--nu", required=True)
@with_common
def w2(mu, nu, space_path, **opts):
    """Quadratic Wasserstein distance and optimal coupling."""
    space = _load(space_path)
    m0 = _measure(space, mu)
    m1 = _measure(space, nu)
    with spacefile.timed_report("w2", {"space": space_path, "mu": mu,
                                       "nu": nu}) as rr:
        dist, coupling = transport.w2(space, m0, m1)
        rr.results = {"distance": dist, "cost2": coupling.cost2,
                      "coupling": coupling.cells,
                      "marginal_defect": coupling.marginal_defect()}
    _emit(rr, opts["out"], opts["fmt"])


@main.command()
@click.option("--mu", required=True)
@click.option("--nu", required=True)
@click.option("--t", "t_text", default=None, help="grid time like 3/8; all by default")
@with_common
def interpolate(mu, nu, t_text, space_path, k, eps_geo, **opts):
    """Displacement interpolation along the lifted optimal plan."""
    space = _load(space_path)
    m0 = _measure(space, mu)
    m1 = _measure(space, nu)
    eps = _eps(eps_geo, k)
    cfg = {"space": space_path, "mu": mu, "nu": nu, "k": k, "eps_geo": eps}
    with spacefile.timed_report("interpolate", cfg) as rr:
        plan = transport.optimal_dynamical_plan(space, m0, m1, k, eps)
        times = ([_parse_number(t_text)] if t_text
                 else [Fraction(j, k) for j in range(k + 1)])
        curves = []
        for t in times:
            mu_t = transport.interpolate(space, plan, t)
            curves.append({"t": t, "weights": mu_t.weights})
        rr.results = {"interpolants": curves,
                      "chains": [c.nodes for c in plan.chains],
                      "plan_weights": plan.weights}

    def plot(path):
        _plot_entropy_curve(space, plan, path)

    _emit(rr, opts["out"], opts["fmt"], opts["plot_path"], plot)


@main.command(name="entropy")
@click.option("--mu", required=True)
@click.option("--entropy", "spec_text", default="shannon",
              help="shannon | renyi:N | power:P")
@with_common
def entropy_cmd(mu, spec_text, space_path, **opts):
    """Evaluate an entropy functional on a measure."""
    space = _load(space_path)
    m0 = _measure(space, mu)
    spec = _entropy_spec(spec_text)
    with spacefile.timed_report("entropy", {"space": space_path, "mu": mu,
                                            "entropy": spec_text}) as rr:
        rr.results = {"value": entropy.evaluate_entropy(spec, m0, space)}
    _emit(rr, opts["out"], opts["fmt"])


def _entropy_spec(text):
    kind, _, arg = text.partition(":")
    if kind == "shannon":
        return entropy.shannon()
    if kind == "renyi":
        return entropy.renyi(float(arg))
    if kind == "power":
        return entropy.power_test(float(arg))
    raise click.UsageError(f"unknown entropy spec {text!r}")


@main.command()
@click.option("--t", type=float, required=True)
@click.option("--dist", "d", type=float, required=True)
@with_common
def beta(t, d, kappa, dim, **opts):
    """Distortion coefficient for a curvature/dimension pair."""
    params = entropy.DistortionParams(kappa, _parse_dim(dim))
    with spacefile.timed_report("beta", {"t": t, "dist": d, "kappa": kappa,
                                         "dim": dim}) as rr:
        rr.results = {"beta": entropy.beta_of_distance(t, d, params)}
    _emit(rr, opts["out"], opts["fmt"])


@main.command(name="cd-check")
@click.option("--support-stride", type=int, default=None,
              help="restrict sampled atoms to every Nth point")
@with_common
def cd_check(support_stride, space_path, k, eps_geo, kappa, dim, seed,
             samples, tol, **opts):
    """Search sampled measure pairs for curvature-dimension violations."""
    space = _load(space_path)
    eps = _eps(eps_geo, k)
    params = entropy.DistortionParams(kappa, _parse_dim(dim))
    support = (list(range(0, space.n, support_stride))
               if support_stride else None)
    cfg = {"space": space_path, "k": k, "eps_geo": eps, "kappa": kappa,
           "dim": dim, "seed": seed, "samples": samples,
           "support_stride": support_stride, "tol": tol}
    with spacefile.timed_report("cd-check", cfg) as rr:
        report = cd_verify.check_cd(space, params, samples, k, eps, seed,
                                    support=support, tol=tol)
        rr.results = report
        rr.flags["complete"] = report.complete
    _emit(rr, opts["out"], opts["fmt"])
    if report.verdict == "violated":
        sys.exit(EXIT_NEGATIVE)
    if not report.complete:
        sys.exit(EXIT_TRUNCATED)


@main.command(name="convexity-check")
@click.option("--mu", required=True)
@click.option("--nu", required=True)
@click.option("--entropy", "spec_text", default="shannon")
@with_common
def convexity_check(mu, nu, spec_text, space_path, k, eps_geo, cap, tol, **opts):
    """Strong displacement convexity search over enumerated plans."""
    space = _load(space_path)
    m0 = _measure(space, mu)
    m1 = _measure(space, nu)
    spec = _entropy_spec(spec_text)
    eps = _eps(eps_geo, k)
    cfg = {"space": space_path, "mu": mu, "nu": nu, "entropy": spec_text,
           "k": k, "eps_geo": eps, "cap": cap, "tol": tol}
    with spacefile.timed_report("convexity-check", cfg) as rr:
        chk = cd_verify.check_strong_displacement_convexity(
            space, spec, m0, m1, k, eps, cap=cap, tol=tol)
        rr.results = chk
        rr.flags["complete"] = chk.complete
    _emit(rr, opts["out"], opts["fmt"])
    if not chk.consistent:
        sys.exit(EXIT_NEGATIVE)
    if not chk.complete:
        sys.exit(EXIT_TRUNCATED)


@main.command(name="density-check")
@click.option("--center", required=True)
@click.option("--radius", required=True)
@click.option("--function", "fn_text", default="dist:0")
@click.option("--mode", type=click.Choice(["cd", "strong"]), default="strong")
@with_common
def density_check(center, radius, fn_text, mode, space_path, k, eps_geo,
                  kappa, dim, tol, **opts):
    """Median-split transport density bounds on one ball."""
    space = _load(space_path)
    idx = space.index_of(center) if center in space.points else int(center)
    b = make_ball(space, idx, _parse_number(radius))
    u = _function(space, fn_text)
    eps = _eps(eps_geo, k)
    split = poincare.median_split(space, u, b)
    mu_p = transport.ProbMeasure.restriction(space, split.plus)
    mu_m = transport.ProbMeasure.restriction(space, split.minus)
    plan = transport.optimal_dynamical_plan(space, mu_p, mu_m, k, eps,
                                            chain_select="spread")
    c_bound = 2.0 / float(b.mass)
    cfg = {"space": space_path, "center": center, "radius": radius,
           "function": fn_text, "mode": mode, "k": k, "eps_geo": eps,
           "kappa": kappa, "dim": dim}
    with spacefile.timed_report("density-check", cfg) as rr:
        if mode == "strong":
            rep = cd_verify.check_density_bound_strong(
                space, plan, c_bound, tol if tol is not None else 1e-9)
        else:
            params = entropy.DistortionParams(kappa, _parse_dim(dim))
            support = {i for ch in plan.chains
                       for i in (ch.nodes[0], ch.nodes[-1])}
            D = max(space.dist[i][j] for i in support for j in support)
            rep = cd_verify.check_density_bound_cd(
                space, plan, c_bound, params, float(D),
                tol if tol is not None else 1e-9)
        rr.results = rep
    _emit(rr, opts["out"], opts["fmt"])
    if not rep.passed:
        sys.exit(EXIT_NEGATIVE)


@main.command(name="evi-check")
@click.option("--flow", "flow_path", required=True,
              help="JSON list of [time, weights] samples")
@click.option("--nu", required=True)
@click.option("--entropy", "spec_text", default="shannon")
@with_common
def evi_check_cmd(flow_path, nu, spec_text, space_path, tol, **opts):
    """Evolution variational inequality check of a supplied flow."""
    space = _load(space_path)
    with open(flow_path) as fh:
        raw = json.load(fh)
    samples = [(t, transport.ProbMeasure.create(
        tuple(spacefile.decode_number(x) for x in w))) for t, w in raw]
    flow = cd_verify.FlowTrajectory.create(samples)
    spec = _entropy_spec(spec_text)
    cfg = {"space": space_path, "flow": flow_path, "nu": nu,
           "entropy": spec_text}
    with spacefile.timed_report("evi-check", cfg) as rr:
        rep = cd_verify.evi_check(space, flow, _measure(space, nu), spec,
                                  tol if tol is not None else 1e-9)
        rr.results = rep
    _emit(rr, opts["out"], opts["fmt"])
    if not rep.passed:
        sys.exit(EXIT_NEGATIVE)


@main.command(name="poincare-certify")
@click.option("--center", required=True)
@click.option("--radius", required=True)
@click.option("--function", "fn_text", default="dist:0")
@click.option("--strong", is_flag=True, default=False)
@with_common
def poincare_certify(center, radius, fn_text, strong, space_path, k, eps_geo,
                     kappa, dim, **opts):
    """One weak (dilation 2) or strong (dilation 1) certificate."""
    space = _load(space_path)
    idx = space.index_of(center) if center in space.points else int(center)
    b = make_ball(space, idx, _parse_number(radius))
    u = _function(space, fn_text)
    eps = _eps(eps_geo, k)
    pitch = min(float(space.dist[i][j]) for i in range(space.n)
                for j in range(space.n) if i != j)
    grad = poincare.slope_gradient(space, u, 1.5 * pitch, k, eps)
    n_dim = _parse_dim(dim)
    cfg = {"space": space_path, "center": center, "radius": radius,
           "function": fn_text, "strong": strong, "k": k, "eps_geo": eps,
           "kappa": kappa, "dim": dim}
    with spacefile.timed_report("poincare-certify", cfg) as rr:
        if strong:
            cert = poincare.certify_strong_poincare(space, b, n_dim, u, grad,
                                                    k, eps)
        else:
            params = entropy.DistortionParams(kappa, n_dim)
            cert = poincare.certify_weak_poincare(space, b, params, u, grad,
                                                  k, eps)
        rr.results = cert
    _emit(rr, opts["out"], opts["fmt"])
    if not cert.passed:
        sys.exit(EXIT_NEGATIVE)


@main.command(name="poincare-sweep")
@click.option("--balls", "balls_text", default=None,
              help="comma list of CENTER:RADIUS; a default ladder otherwise")
@with_common
def poincare_sweep_cmd(balls_text, space_path, k, eps_geo, kappa, dim, seed,
                       **opts):
    """Weak certificates over a ball ladder and the standard function suite."""
    space = _load(space_path)
    eps = _eps(eps_geo, k)
    params = entropy.DistortionParams(kappa, _parse_dim(dim))
    if balls_text:
        specs = []
        for tok in balls_text.split(","):
            c, r = tok.split(":")
            idx = space.index_of(c) if c in space.points else int(c)
            specs.append((idx, _parse_number(r)))
    else:
        diam = float(space.diam)
        center = min(range(space.n),
                     key=lambda i: max(float(space.dist[i][j])
                                       for j in range(space.n)))
        specs = [(center, diam * f) for f in (0.15, 0.2, 0.3)]
    suite = poincare.default_function_suite(space, seed)
    cfg = {"space": space_path, "balls": balls_text, "k": k, "eps_geo": eps,
           "kappa": kappa, "dim": dim, "seed": seed}
    with spacefile.timed_report("poincare-sweep", cfg) as rr:
        certs = poincare.poincare_sweep(space, params, specs, suite, k, eps)
        worst = max((c.measured_ratio for c in certs), default=0.0)
        rr.results = {"worst_ratio": worst,
                      "theoretical": certs[0].theoretical_constant if certs else None,
                      "certificates": certs}
        ok = all(c.passed for c in certs)
        rr.flags["all_passed"] = ok

    def plot(path):
        _plot_ratios(certs, path)

    _emit(rr, opts["out"], opts["fmt"], opts["plot_path"], plot)
    if not ok:
        sys.exit(EXIT_NEGATIVE)


@main.command(name="uniqueness")
@click.option("--base", default="0")
@with_common
def uniqueness_cmd(base, space_path, k, eps_geo, cap, **opts):
    """Geodesic multiplicity report from a base point."""
    space = _load(space_path)
    idx = space.index_of(base) if base in space.points else int(base)
    eps = _eps(eps_geo, k)
    cfg = {"space": space_path, "base": base, "k": k, "eps_geo": eps,
           "cap": cap}
    with spacefile.timed_report("uniqueness", cfg) as rr:
        rep = uniqueness.multiplicity_report(space, idx, k, eps, cap=cap)
        rr.results = rep
        rr.flags["exhaustive"] = rep.exhaustive
    _emit(rr, opts["out"], opts["fmt"])
    if not rep.exhaustive:
        sys.exit(EXIT_TRUNCATED)


@main.command(name="branch-search")
@click.option("--base", default="0")
@with_common
def branch_search(base, space_path, k, eps_geo, dim, cap, tol, **opts):
    """Branching-driven convexity violation search."""
    space = _load(space_path)
    idx = space.index_of(base) if base in space.points else int(base)
    eps = _eps(eps_geo, k)
    n_dim = _parse_dim(dim)
    cfg = {"space": space_path, "base": base, "k": k, "eps_geo": eps,
           "dim": dim, "cap": cap}
    with spacefile.timed_report("branch-search", cfg) as rr:
        res = uniqueness.branch_violation_search(
            space, idx, entropy.renyi(n_dim), k, eps, cap=cap,
            tol=tol if tol is not None else 1e-9)
        rr.results = res
    _emit(rr, opts["out"], opts["fmt"])


@main.command()
@click.option("--name", required=True)
@click.option("--params", "params_text", default="{}",
              help="JSON generator parameters")
@with_common
def generate(name, params_text, **opts):
    """Emit a bundled example space to a file or stdout."""
    params = json.loads(params_text)
    space = generators.generate_example(name, **params)
    sf = spacefile.SpaceFile.from_space(space, {"name": name,
                                                "params": params})
    if opts["out"]:
        spacefile.save_space(opts["out"], sf)
        click.echo(json.dumps({"written": opts["out"], "points": space.n}))
    else:
        click.echo(json.dumps(sf.to_json(), indent=1))


@main.command()
@click.option("--radii", "radii_text", default=None,
              help="comma list of radii; a default sweep otherwise")
@with_common
def doubling(radii_text, space_path, **opts):
    """Doubling-constant measurement over a radius sweep."""
    space = _load(space_path)
    if radii_text:
        radii = [_parse_number(t) for t in radii_text.split(",")]
    else:
        radii = default_radius_sweep(space)
    cfg = {"space": space_path, "radii": radii}
    with spacefile.timed_report("doubling", cfg) as rr:
        per_radius = parallel_map(
            lambda r: doubling_constant(space, [r]), radii)
        rr.results = {"doubling_constant": max(per_radius),
                      "per_radius": dict(zip(map(float, radii), per_radius))}
    _emit(rr, opts["out"], opts["fmt"])


def _plot_entropy_curve(space, plan, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from .entropy import shannon
    from .cd_verify import evaluate_entropy
    ts = [j / plan.k for j in range(plan.k + 1)]
    es = [evaluate_entropy(shannon(),
                           transport.plan_marginal(space, plan, j), space)
          for j in range(plan.k + 1)]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(ts, es, "o-")
    ax.set_xlabel("t")
    ax.set_ylabel("relative entropy")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_ratios(certs, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 3))
    xs = range(len(certs))
    ax.bar(xs, [c.measured_ratio for c in certs])
    if certs:
        ax.axhline(certs[0].theoretical_constant, color="r", linestyle="--")
    ax.set_xlabel("certificate")
    ax.set_ylabel("measured ratio")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run():
    """Entry point mapping error classes to the documented exit codes."""
    try:
        main.main(standalone_mode=False)
    except click.UsageError as exc:
        _fail(EXIT_USAGE, "usage", exc.format_message())
    except click.ClickException as exc:
        _fail(EXIT_USAGE, "usage", exc.format_message())
    except (ParseError, MetricError, FileNotFoundError) as exc:
        _fail(EXIT_INPUT, type(exc).__name__, exc)
    except EmptyChainSetError as exc:
        _fail(EXIT_INPUT, "EmptyChainSet", exc)
    except CdknError as exc:
        _fail(EXIT_INPUT, type(exc).__name__, exc)


if __name__ == "__main__":
    run()

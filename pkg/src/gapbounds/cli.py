"""Command-line entry point: ``gapbounds --config run.toml --out results/``.

Commands run in the order given in the config. ``bound`` evaluates the
analytic lower bounds, ``eigs`` the grid spectrum, ``verify`` the
intertwining residuals and variance inequalities, and ``report`` writes
report.json, CSV tables and PNG figures into the output directory.

Exit codes: 0 success, 1 configuration error, 2 an applicable bound
exceeds the oracle eigenvalue by more than VIOLATION_TOL, 3 a solver did
not converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as bd
from . import config as cfgmod
from .errors import ConfigError, DomainError, GapBoundsError, GridTooLarge, NoConvergence
from .intertwine import ScalarField, check_intertwining, default_inf_grid, intertwining_decay
from .model import make_weight, identity_weight
from .oracle import (Grid, default_grid, discretize, johnsen_check_1d, lowest_eigs, verify_bl,
                     verify_cordero, verify_second_order_1d, verify_variance_identity_1d)

log = logging.getLogger("gapbounds")

VIOLATION_TOL = 2e-2
EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_NOCONV = 0, 1, 2, 3


def to_json_value(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(obj, dict):
        return {str(k): to_json_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_value(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_value(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return "inf" if x > 0 else "-inf" if x < 0 else "nan"
    return obj


def dumps(report: dict) -> str:
    """Canonical text: sorted keys, shortest round-trip float repr."""
    return json.dumps(to_json_value(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def comparable(report: dict) -> dict:
    """The report without run-dependent metadata (timings)."""
    out = json.loads(dumps(report))
    out.get("metadata", {}).pop("timings", None)
    return out


# ---------------------------------------------------------------------------
# polynomial test functions shared by the verification commands


def _test_functions(d):
    fs = {
        "x1": ScalarField(lambda x: x[..., 0],
                          lambda x: np.broadcast_to(np.eye(d)[0], np.shape(x)).copy()),
        "x1^2": ScalarField(lambda x: x[..., 0] ** 2,
                            lambda x: np.concatenate([2 * x[..., :1], np.zeros_like(x[..., 1:])], -1)),
        "x1^3-x1": ScalarField(lambda x: x[..., 0] ** 3 - x[..., 0],
                               lambda x: np.concatenate([3 * x[..., :1] ** 2 - 1,
                                                         np.zeros_like(x[..., 1:])], -1)),
    }
    if d >= 2:
        def grad_prod(x):
            g = np.zeros(np.shape(x))
            g[..., 0], g[..., 1] = x[..., 1], x[..., 0]
            return g
        fs["x1*x2"] = ScalarField(lambda x: x[..., 0] * x[..., 1], grad_prod)
    fs["sum x^2"] = ScalarField(lambda x: np.sum(x**2, -1), lambda x: 2 * np.asarray(x))
    return fs


class Runner:
    """Executes the commands of one configuration and collects the report."""

    def __init__(self, cfg: cfgmod.RunConfig):
        self.cfg = cfg
        self.V = cfg.build_potential()
        self.d = self.V.dim
        self.W, self.weight_info = self._resolve_weight()
        self.records = {}
        self.timings = {}
        self._op = None
        self._spec = None
        self._weighted = None
        self.bound_results = []

    # -- setup --------------------------------------------------------------

    def _resolve_weight(self):
        c = self.cfg
        try:
            if c.weight == "identity":
                return identity_weight(self.d), {"family": "identity"}
            if c.weight == "exp_eps_U":
                return make_weight(self.V, "exp_eps_U", c.eps), {"family": "exp_eps_U", "eps": c.eps}
            eps, val = bd.optimize_eps(self.V, c.objective, c.box)
            info = {"family": "exp_eps_U", "eps": eps.tolist(), "optimized": c.objective, "objective_value": val}
            return make_weight(self.V, "exp_eps_U", eps), info
        except DomainError as exc:
            raise ConfigError(f"weight: {exc}") from exc

    @property
    def grid(self) -> Grid:
        base = default_grid(self.d)
        try:
            return Grid(self.d, self.cfg.radius or base.radius, self.cfg.grid_n or base.n)
        except GridTooLarge as exc:
            raise ConfigError(f"grid: {exc}") from exc

    @property
    def inf_n(self):
        return self.cfg.inf_n or default_inf_grid(self.d)

    def operator(self):
        if self._op is None:
            self._op = discretize(self.V, self.grid)
        return self._op

    def spectrum(self):
        if self._spec is None:
            k = max(self.cfg.k or 0, self.d + 2)
            t = time.perf_counter()
            self._spec = lowest_eigs(self.operator(), k, seed=self.cfg.seed)
            self.timings["eigensolve"] = time.perf_counter() - t
        return self._spec

    def weighted(self):
        if self._weighted is None:
            gaps = bd.weighted_gaps(self.V, self.W, "oracle", self.grid, self.cfg.box, self.cfg.seed)
            self._weighted = gaps
        return self._weighted

    # -- commands -----------------------------------------------------------

    def cmd_bound(self):
        c, V, W = self.cfg, self.V, self.W
        out = []
        first = bd.first_order_bound(V, None, c.box, self.inf_n)
        if "first_order" in c.bounds:
            out.append(first)
            if W.family != "identity":
                out.append(bd.first_order_bound(V, W, c.box, self.inf_n))
        if "cordero" in c.bounds:
            if first.applicable:
                out.append(bd.cordero_bound(V, first.value, c.box, self.inf_n, bd.GRID))
            else:
                out.append(bd.cordero_bound(V, self.spectrum().gap(), c.box, self.inf_n, bd.ORACLE))
        if "second_order" in c.bounds:
            # identity weight: every reweighted measure is mu itself
            gaps = [self.spectrum().gap()] * self.d if W.family == "identity" else self.weighted()
            res = bd.second_order_bound(V, W, min(gaps), c.box, self.inf_n)
            res.notes.append(f"per-coordinate weighted gaps {gaps}")
            out.append(res)
        if "prop41" in c.bounds and V.has_product_structure:
            eps = self._prop41_eps()
            if eps is not None:
                out.extend(bd.prop41(V, eps, c.box))
        self.bound_results = out
        return [r.as_dict() for r in out]

    def _prop41_eps(self):
        if self.W.family == "exp_eps_U":
            return list(self.W.eps)
        if self.V.family == "product_perturbed" and "a" in self.V.params:
            return [1.0 - self.V.params["a"] / 2.0] * self.d
        return None

    def cmd_eigs(self):
        res = self.spectrum()
        out = res.as_dict()
        out["lambda_1"] = float(res.eigenvalues[1])
        if len(res.eigenvalues) > self.d + 1:
            out["lambda_d_plus_1"] = float(res.eigenvalues[self.d + 1])
        return out

    def cmd_verify(self):
        V, W, d = self.V, self.W, self.d
        rng = np.random.default_rng(self.cfg.seed)
        points = rng.uniform(0.3, 1.8, size=(3, d)) * rng.choice([-1.0, 1.0], size=(3, d))
        fns = _test_functions(d)
        out = {"intertwining": [], "brascamp_lieb": [], "cordero": []}
        weights = [identity_weight(d)] + ([W] if W.family != "identity" else [])
        for Wk in weights:
            for name, f in fns.items():
                res = max(float(np.max(np.abs(check_intertwining(V, Wk, f, x, 1e-3)))) for x in points)
                _, slope = intertwining_decay(V, Wk, f, points[0], [4e-3, 2e-3, 1e-3])
                out["intertwining"].append({"weight": Wk.family, "function": name,
                                            "max_residual": res, "decay_slope": slope})
        op = self.operator()
        for Wk in weights:
            for name, f in fns.items():
                chk = verify_bl(op, V, Wk, f)
                out["brascamp_lieb"].append({"weight": Wk.family, "function": name, **chk.as_dict()})
        lam1 = self.spectrum().gap()
        for name, f in fns.items():
            chk = verify_cordero(op, V, f, lam1)
            out["cordero"].append({"function": name, **chk.as_dict()})
        if d == 1:
            g1 = Grid(1, op.grid.radius, op.grid.n)
            out["variance_identity"] = [{"weight": Wk.family, "function": name,
                                         **verify_variance_identity_1d(V, Wk, f, g1).as_dict()}
                                        for Wk in weights for name, f in fns.items()]
            out["second_order"] = [{"weight": Wk.family, "function": name,
                                    **verify_second_order_1d(V, Wk, f, g1).as_dict()}
                                   for Wk in weights for name, f in fns.items() if name != "x1"]
            out["schrodinger"] = johnsen_check_1d(V, g1, seed=self.cfg.seed).as_dict()
        return out

    # -- violations and output ---------------------------------------------

    def violations(self):
        if self._spec is None:
            return []
        ev = self._spec.eigenvalues
        index = {bd.LAMBDA_1: 1, bd.LAMBDA_D1: self.d + 1}
        found = []
        for b in self.bound_results:
            k = index[b.target]
            if b.value is None or k >= len(ev):
                continue
            excess = b.value - ev[k]
            if excess > VIOLATION_TOL:
                found.append({"method": b.method, "target": b.target, "bound": b.value,
                              "oracle": float(ev[k]), "excess": float(excess)})
        return found

    def report(self) -> dict:
        versions = {"gapbounds": __version__, "numpy": np.__version__}
        import scipy
        versions["scipy"] = scipy.__version__
        rep = {
            "schema_version": cfgmod.SCHEMA_VERSION,
            "config": self.cfg.as_dict(),
            "problem": self.V.describe(),
            "weight": self.weight_info,
            "results": self.records,
            "violations": self.violations(),
            "metadata": {"grid": self.grid.as_dict(), "box": self.cfg.box, "inf_n": self.inf_n,
                         "versions": versions, "timings": dict(self.timings)},
        }
        return json.loads(dumps(rep))

    def run(self):
        for name in self.cfg.commands:
            t = time.perf_counter()
            if name == "report":
                continue
            self.records[name] = getattr(self, f"cmd_{name}")()
            self.timings[name] = time.perf_counter() - t
        return self.report()


def write_outputs(runner: Runner, report: dict, out: Path, dump: bool):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report), encoding="utf-8")
    written = ["report.json"]
    cfg = runner.cfg
    spec = runner._spec
    if cfg.csv:
        if spec is not None:
            with open(out / "eigenvalues.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["index", "eigenvalue", "residual"])
                for k, (v, r) in enumerate(zip(spec.eigenvalues, spec.residuals)):
                    w.writerow([k, repr(float(v)), repr(float(r))])
            written.append("eigenvalues.csv")
        if runner.bound_results:
            with open(out / "bounds.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["method", "target", "applicable", "value", "constituent", "constituent_value",
                            "provenance"])
                for b in runner.bound_results:
                    for name, con in b.constituents.items():
                        w.writerow([b.method, b.target, b.applicable,
                                    "" if b.value is None else repr(b.value), name,
                                    repr(float(con.value)), con.provenance])
            written.append("bounds.csv")
    if cfg.figures:
        from .plotting import plot_curvature, plot_spectrum
        if spec is not None:
            plot_spectrum(spec.eigenvalues, [b.as_dict() for b in runner.bound_results], out / "spectrum.png",
                          runner.d)
            written.append("spectrum.png")
        plot_curvature(runner.V, runner.W, cfg.box, out / "curvature.png")
        written.append("curvature.png")
    if dump:
        op = runner.operator()
        K = op.K.tocoo()
        np.savetxt(out / "K.csv", np.column_stack([K.row, K.col, K.data]), delimiter=",",
                   header="row,col,value", comments="", fmt=["%d", "%d", "%.17g"])
        np.savetxt(out / "m.csv", op.m, delimiter=",", fmt="%.17g")
        spec = runner.spectrum()
        np.savetxt(out / "eigenvectors.csv", spec.eigenfunctions(op), delimiter=",", fmt="%.17g")
        written += ["K.csv", "m.csv", "eigenvectors.csv"]
    return written


def summarize(report: dict) -> str:
    lines = [f"problem: {report['problem']}", f"weight: {report['weight']}"]
    res = report["results"]
    for b in res.get("bound", []):
        val = "n/a" if b["value"] is None else f"{b['value']:.10g}"
        failed = [c["name"] for c in b["checks"] if not c["passed"]]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        lines.append(f"bound {b['method']:<28s} {b['target']:<16s} {val}{tail}")
    if "eigs" in res:
        lines.append("eigs  " + " ".join(f"{v:.8g}" for v in res["eigs"]["eigenvalues"]))
    if "verify" in res:
        v = res["verify"]
        if v["intertwining"]:
            lines.append(f"verify intertwining max residual {max(r['max_residual'] for r in v['intertwining']):.3g}")
        if v["brascamp_lieb"]:
            lines.append(f"verify Brascamp-Lieb min slack {min(r['slack'] for r in v['brascamp_lieb']):.3g}")
    for viol in report["violations"]:
        lines.append(f"VIOLATION {viol['method']} {viol['target']}: bound {viol['bound']:.8g} "
                     f"> oracle {viol['oracle']:.8g}")
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(prog="gapbounds", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="TOML run configuration (env GAPBOUNDS_CONFIG)")
    p.add_argument("--out", help="output directory, overrides output.dir (env GAPBOUNDS_OUT)")
    p.add_argument("--threads", type=int, help="BLAS/LAPACK threads (env GAPBOUNDS_THREADS)")
    p.add_argument("--dump-matrices", action="store_true", default=None,
                   help="also write K, masses and eigenvectors as CSV (env GAPBOUNDS_DUMP_MATRICES)")
    p.add_argument("--seed", type=int, help="seed for start vectors and sample points (env GAPBOUNDS_SEED)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _apply_overrides(cfg, args, env):
    for key in ("seed", "threads"):
        val = getattr(args, key)
        val = env.get(key) if val is None else val
        if val is not None:
            setattr(cfg, key, val)
    out = args.out or env.get("out")
    if out:
        cfg.out = out
    dump = args.dump_matrices if args.dump_matrices is not None else env.get("dump_matrices")
    if dump is not None:
        cfg.dump_matrices = dump
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.threads < 0:
        raise ConfigError("threads must be non-negative")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        env = cfgmod.env_overrides()
        path = args.config or env.get("config")
        if not path:
            raise ConfigError("no configuration given (--config or GAPBOUNDS_CONFIG)")
        cfg = cfgmod.load(path)
        _apply_overrides(cfg, args, env)
        runner = Runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from threadpoolctl import threadpool_limits
    try:
        with threadpool_limits(limits=cfg.threads or None):
            report = runner.run()
            if "report" in cfg.commands or cfg.dump_matrices:
                written = write_outputs(runner, report, Path(cfg.out), cfg.dump_matrices)
                log.info("wrote %s", ", ".join(written))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except GapBoundsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summarize(report))
    if report["violations"]:
        print(f"{len(report['violations'])} bound(s) exceed the oracle by more than {VIOLATION_TOL:g}",
              file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

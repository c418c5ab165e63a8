"""Command-line front end.

Every command reads a versioned JSON config, writes its results under
``--out`` and exits with 0 when all checks pass, 1 when a check fails and 2
on a usage or config error. Outputs depend only on the config and the seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .anisotropy import Anisotropy
from .approx import (BoxIndexSet, ParameterError, bernstein_check_relation,
                     bernstein_experiment, counting_bound_check, jackson_experiment,
                     jackson_r, write_json, write_rate_csv)
from .brushlet1d import RampProfile, bell_eval, brushlet_freq_eval
from .covering import (CoveringSpec, build_layer, corridor_intervals, layer_to_dict, rect_at,
                       tiling_svg, verify_alpha_covering)
from .grid import GridFunction
from .tensor_basis import enumerate_active, gram_matrix, layer_box, projection_identities
from .transform import analyze, gaussian, parseval_report, synthesize

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config

REQ = object()

SCHEMA = {
    "version": REQ, "alpha": REQ, "a": REQ, "cutoff": None, "ramp_order": 3, "seed": 0,
    "partition": {"j_max": 3},
    "bells": {"layer": 1, "tile": 1, "n": [0, 1, 2], "points": 801},
    "transform": {"function": "gaussian", "center": None, "width": 1.0, "modulation": None,
                  "L": REQ, "n_max": None, "oversample": 8, "fast": False,
                  "synth": None, "tol": 1e-6},
    "verify": {"j_max": 200, "constants": "stated", "samples": 500,
               "gram": {"j_max": 3, "n_max": 1, "oversample": 16, "tol": 1e-8},
               "projection": {"j_max": 3, "trials": 20, "spacing": 0.0625, "tol": 1e-10,
                              "input": "auto", "points": 1500}},
    "approx": {"jackson": [], "bernstein": [], "counting": []},
}

JACKSON = {"gamma": REQ, "tau": REQ, "beta": REQ, "p": REQ, "t": REQ, "log2_m_max": 12,
           "trials": 5, "tol": 0.10, "layer": 2, "tiles": 8}
BERNSTEIN = {"gamma": REQ, "beta": REQ, "p": REQ, "t": REQ, "tau": REQ, "q": None,
             "variant": 1, "n_grid": [16, 32, 64, 128, 256, 512, 1024], "trials": 10,
             "max_slope": 0.05}
COUNTING = {"layers": [1, 50], "q": REQ, "side": 4.0, "doublings": 3, "points": 20000,
            "tol": 0.10}


def _fill(given, schema, where: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    out = {}
    for key, default in schema.items():
        path = f"{where}.{key}" if where else key
        if key in given:
            val = given[key]
            if isinstance(default, dict) and val is not None:
                val = _fill(val, default, path)
            out[key] = val
        elif default is REQ:
            raise ConfigError(f"missing required key {path}")
        elif isinstance(default, dict):
            out[key] = _fill({}, default, path) if _all_optional(default) else None
        else:
            out[key] = default
    return out


def _all_optional(schema) -> bool:
    return all(v is not REQ and (not isinstance(v, dict) or _all_optional(v))
               for v in schema.values())


def parse_config(raw: dict) -> dict:
    """Validate ``raw`` and fill defaults; blocks absent from ``raw`` stay ``None``."""
    if not raw:
        raise ConfigError("empty config")
    cfg = _fill(raw, SCHEMA, "")
    if cfg["version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {cfg['version']!r}")
    for block in ("partition", "bells", "transform", "verify", "approx"):
        if block not in raw:
            cfg[block] = None
    if cfg["approx"] is not None:
        cfg["approx"]["jackson"] = [_fill(b, JACKSON, f"approx.jackson[{i}]")
                                    for i, b in enumerate(cfg["approx"]["jackson"])]
        cfg["approx"]["bernstein"] = [_fill(b, BERNSTEIN, f"approx.bernstein[{i}]")
                                      for i, b in enumerate(cfg["approx"]["bernstein"])]
        cfg["approx"]["counting"] = [_fill(b, COUNTING, f"approx.counting[{i}]")
                                     for i, b in enumerate(cfg["approx"]["counting"])]
    try:
        cfg["spec"] = CoveringSpec(float(cfg["alpha"]), Anisotropy(cfg["a"]),
                                   None if cfg["cutoff"] is None else tuple(cfg["cutoff"]))
        cfg["ramp"] = RampProfile(int(cfg["ramp_order"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["approx"] is not None:
        _check_approx(cfg["spec"], cfg["approx"])
    return cfg


def _check_approx(spec: CoveringSpec, block: dict) -> None:
    """Reject infeasible exponent relations before anything runs."""
    nu = spec.aniso.nu
    for i, b in enumerate(block["jackson"]):
        try:
            r = jackson_r(nu, spec.alpha, b["p"], b["t"])
        except ParameterError as exc:
            raise ConfigError(f"approx.jackson[{i}]: {exc}") from exc
        lhs = 1 / b["tau"] - 1 / b["p"]
        rhs = (b["gamma"] - b["beta"]) / nu - r / b["t"]
        if not 0 < b["tau"] < b["p"] or not b["beta"] < b["gamma"] or abs(lhs - rhs) > 1e-9:
            raise ConfigError(f"approx.jackson[{i}]: infeasible parameter balance "
                              f"(1/tau - 1/p = {lhs:.6g}, (gamma - beta)/nu - r/t = {rhs:.6g})")
    for i, b in enumerate(block["bernstein"]):
        q = b["tau"] if b["q"] is None else b["q"]
        try:
            bernstein_check_relation(nu, b["gamma"], b["beta"], b["p"], b["t"], b["tau"], q,
                                     b["variant"])
        except (ParameterError, ValueError) as exc:
            raise ConfigError(f"approx.bernstein[{i}]: {exc}") from exc
    for i, b in enumerate(block["counting"]):
        if not 0 < spec.alpha < 1:
            raise ConfigError(f"approx.counting[{i}]: alpha must lie in (0, 1)")


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# commands


class Run:
    """Collects check outcomes and writes output files."""

    def __init__(self, out: Path, seed: int, jobs: int):
        self.out, self.seed, self.jobs = out, seed, jobs
        self.checks: list[tuple[str, bool, str]] = []
        out.mkdir(parents=True, exist_ok=True)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    def path(self, name: str) -> Path:
        return self.out / name

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def summary(self) -> None:
        with self.path("checks.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "passed", "detail"])
            w.writerows(self.checks)
        for name, ok, detail in self.checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def _need(cfg, block):
    if cfg[block] is None:
        raise ConfigError(f"config has no '{block}' block")
    return cfg[block]


def cmd_partition(cfg, run: Run) -> None:
    block = _need(cfg, "partition")
    spec, j_max = cfg["spec"], int(block["j_max"])
    write_json(run.path("partition.json"),
               {"spec": spec.to_dict(), "layers": [layer_to_dict(j, spec) for j in range(j_max + 1)]})
    if spec.d == 2:
        run.path("partition.svg").write_text(tiling_svg(spec, j_max))
    total = sum(len(build_layer(j, spec)) for j in range(j_max + 1))
    run.check("partition.written", total > 0, f"{total} tiles in layers 0..{j_max}")


def _polyline_svg(series, width=800, height=300) -> str:
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = min(0.0, float(ys.min())), max(0.0, float(ys.max()))
    sx = width / (x1 - x0) if x1 > x0 else 1.0
    sy = height / (y1 - y0) if y1 > y0 else 1.0
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">']
    for name, x, y in series:
        pts = " ".join(f"{(a - x0) * sx:.3f},{height - (b - y0) * sy:.3f}" for a, b in zip(x, y))
        lines.append(f'<polyline class="{name}" fill="none" stroke="black" points="{pts}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_bells(cfg, run: Run) -> None:
    block = _need(cfg, "bells")
    spec, ramp = cfg["spec"], cfg["ramp"]
    rect = rect_at(int(block["layer"]), int(block["tile"]), spec)
    rows, series = [], []
    for i, iv in enumerate(rect.intervals):
        from .brushlet1d import Bell
        bell = Bell(iv, ramp)
        lo, hi = bell.support
        xi = np.linspace(lo, hi, int(block["points"]))
        b = bell_eval(bell, xi)
        series.append((f"bell-{i}", xi, b))
        rows.extend({"dim": i, "n": "bell", "xi": float(x), "value": float(v)} for x, v in zip(xi, b))
        for n in block["n"]:
            w = brushlet_freq_eval(bell, int(n), xi)
            series.append((f"brushlet-{i}-{n}", xi, w))
            rows.extend({"dim": i, "n": int(n), "xi": float(x), "value": float(v)}
                        for x, v in zip(xi, w))
        ident = float(np.max(np.abs(b ** 2 + bell_eval(bell, 2 * bell.alpha - xi) ** 2 - 1.0)
                             * ((xi > bell.alpha - iv.eps_left) & (xi < bell.alpha + iv.eps_left))))
        run.check(f"bells.dim{i}.left_cut_identity", ident < 1e-12, f"{ident:.3g}")
    write_rate_csv(run.path("bells.csv"), rows)
    run.path("bells.svg").write_text(_polyline_svg(series))


def cmd_transform(cfg, run: Run) -> None:
    block = _need(cfg, "transform")
    spec, ramp = cfg["spec"], cfg["ramp"]
    if block["function"] != "gaussian":
        raise ConfigError("transform.function must be 'gaussian'")
    f = gaussian(block["center"], block["width"], block["modulation"])
    coeffs = analyze(f, spec, block["L"], n_max=block["n_max"], oversample=block["oversample"],
                     ramp=ramp, fast=bool(block["fast"]), jobs=run.jobs)
    coeffs.save(run.path("coefficients.json"))
    rep = parseval_report(f, coeffs)
    write_json(run.path("transform.json"), {"analysis": coeffs.meta["report"].to_dict(),
                                            "parseval": rep})
    tol = float(block["tol"])
    run.check("transform.bessel", rep["ratio"] <= 1 + tol, f"ratio {rep['ratio']:.12g}")
    run.check("transform.parseval", rep["ratio"] >= 1 - tol, f"ratio {rep['ratio']:.12g}")
    if block["synth"] is not None:
        g = synthesize(coeffs, block["synth"]["bounds"], block["synth"]["counts"])
        g.save(run.path("synthesis"))
        ref = g.like(f(g.points()))
        err = math.sqrt((g - ref).norm2() / ref.norm2())
        run.check("transform.round_trip", err < tol, f"relative error {err:.3g}")


def _random_grids(spec: CoveringSpec, j_max: int, h: float, trials: int, rng):
    ext = [float(v) for v in layer_box(j_max + 1, spec) + 2.0]
    ext = [math.ceil(e / h) * h for e in ext]
    counts = [int(round(2 * e / h)) + 1 for e in ext]
    for _ in range(trials):
        vals = rng.normal(size=counts) + 1j * rng.normal(size=counts)
        yield GridFunction([(-e, e) for e in ext], counts, vals)


def _grid_aligned(spec: CoveringSpec, j_max: int, h: float) -> bool:
    """True when every reflection point ``2 * knot`` up to layer ``j_max + 1`` is a grid node."""
    for j in range(1, j_max + 2):
        for i in range(spec.d):
            for iv in corridor_intervals(j, i, spec):
                for k in (iv.left, iv.right):
                    r = 2.0 * k / h
                    if abs(r - round(r)) > 1e-9 * max(1.0, abs(r)):
                        return False
    return True


def _random_smooth(spec: CoveringSpec, j_max: int, trials: int, n_points: int, rng):
    ext = layer_box(j_max + 1, spec) + 2.0
    for _ in range(trials):
        c = rng.uniform(-ext, ext, (6, spec.d))
        w = rng.uniform(0.5, 4.0, 6)
        k = rng.normal(size=(6, spec.d))
        amp = rng.normal(size=6) + 1j * rng.normal(size=6)

        def f(p, c=c, w=w, k=k, amp=amp):
            p = np.asarray(p, dtype=float)
            out = np.zeros(p.shape[:-1], dtype=complex)
            for ci, wi, ki, ai in zip(c, w, k, amp):
                out += ai * np.exp(-np.sum((p - ci) ** 2, -1) / wi + 1j * (p @ ki))
            return out

        yield f, rng.uniform(-ext, ext, (n_points, spec.d))


def cmd_verify(cfg, run: Run) -> None:
    block = _need(cfg, "verify")
    spec, ramp = cfg["spec"], cfg["ramp"]
    rng = np.random.default_rng(run.seed)
    rep = verify_alpha_covering(spec, int(block["j_max"]), samples=int(block["samples"]),
                                rng=np.random.default_rng(run.seed), constants=block["constants"])
    write_json(run.path("verify_partition.json"), {
        "j_max": rep.j_max, "constants": rep.constants,
        "partition_max_rel_err": rep.partition_max_rel_err,
        "lemma_a_violations": rep.lemma_a_violations, "lemma_b_violations": rep.lemma_b_violations,
        "lemma_c_violations": rep.lemma_c_violations, "cutoff_violations": rep.cutoff_violations,
        "geometric_ratio": list(rep.geometric_ratio), "overlap_n0": rep.overlap_n0,
        "eccentricity_K": rep.eccentricity_K})
    run.check("verify.partition_exact", rep.partition_max_rel_err <= 1e-12,
              f"{rep.partition_max_rel_err:.3g}")
    for name in ("lemma_a", "lemma_b", "lemma_c", "cutoff"):
        bad = getattr(rep, f"{name}_violations")
        run.check(f"verify.{name}", not bad, f"{len(bad)} violations ({block['constants']} constants)")

    gb = block["gram"]
    if gb is not None:
        idx = enumerate_active(spec, layer_box(int(gb["j_max"]), spec), int(gb["n_max"]))
        G = gram_matrix(idx, oversample=int(gb["oversample"]), ramp=ramp)
        dev = float(np.max(np.abs(G - np.eye(len(idx))))) if idx else 0.0
        write_json(run.path("verify_gram.json"), {"size": len(idx), "max_dev": dev})
        run.check("verify.gram", dev < float(gb["tol"]), f"{len(idx)} brushlets, max dev {dev:.3g}")

    pb = block["projection"]
    if pb is not None:
        jp, h, trials = int(pb["j_max"]), float(pb["spacing"]), int(pb["trials"])
        mode = pb["input"]
        if mode not in ("auto", "grid", "callable"):
            raise ConfigError("verify.projection.input must be 'auto', 'grid' or 'callable'")
        if mode == "auto":
            mode = "grid" if _grid_aligned(spec, jp, h) else "callable"
        if mode == "grid":
            cases = ((g, None) for g in _random_grids(spec, jp, h, trials, rng))
        else:
            cases = _random_smooth(spec, jp, trials, int(pb["points"]), rng)
        worst: dict = {}
        for f, pts in cases:
            for k, v in projection_identities(spec, f, jp, points=pts, ramp=ramp).items():
                worst[k] = max(worst.get(k, 0.0), v)
        rows = [{"identity": k, "input": mode, "max_defect": v} for k, v in sorted(worst.items())]
        write_rate_csv(run.path("verify_projection.csv"), rows)
        for k, v in sorted(worst.items()):
            run.check(f"verify.projection.{k}", v < float(pb["tol"]), f"{v:.3g}")


def cmd_approx(cfg, run: Run) -> None:
    block = _need(cfg, "approx")
    spec = cfg["spec"]
    rate_rows, summary = [], {"jackson": [], "bernstein": [], "counting": []}
    for i, b in enumerate(block["jackson"]):
        m_grid = [2 ** k for k in range(int(b["log2_m_max"]) + 1)]
        e = jackson_experiment(spec, b["gamma"], b["tau"], b["beta"], b["p"], b["t"], m_grid,
                               trials=int(b["trials"]), layer=int(b["layer"]), tiles=int(b["tiles"]),
                               seed=run.seed + i, jobs=run.jobs)
        rate_rows.extend({"experiment": f"jackson{i}", **r} for r in e.rows())
        summary["jackson"].append({k: v for k, v in e.to_dict().items() if k != "sigma"})
        worst = max(abs(s - e.predicted_slope) for s in e.trial_slopes)
        run.check(f"approx.jackson{i}", worst <= float(b["tol"]),
                  f"predicted {e.predicted_slope:.4f}, fitted {e.fitted_slope:.4f}, worst trial dev {worst:.4f}")
    for i, b in enumerate(block["bernstein"]):
        rep = bernstein_experiment(spec, b["gamma"], b["beta"], b["p"], b["t"], b["tau"], b["q"],
                                   b["n_grid"], trials=int(b["trials"]), variant=int(b["variant"]),
                                   seed=run.seed + i)
        rate_rows.extend({"experiment": f"bernstein{i}", **r} for r in rep.rows())
        summary["bernstein"].append(rep.to_dict())
        run.check(f"approx.bernstein{i}", rep.slope <= float(b["max_slope"]), f"slope {rep.slope:.4f}")
    for i, b in enumerate(block["counting"]):
        lo, hi = b["layers"]
        prng = np.random.default_rng(run.seed + i)
        pts = float(b["side"]) * prng.uniform(size=(int(b["points"]), spec.d))
        consts = []
        for k in range(int(b["doublings"]) + 1):
            box = BoxIndexSet(spec, range(int(lo), int(hi) + 1), float(b["side"]) * 2 ** (k / spec.d))
            rep = counting_bound_check(spec, box, float(b["q"]), sample_pts=pts)
            consts.append({"size": str(box.size), "constant": rep.constant})
            rate_rows.append({"experiment": f"counting{i}", "doubling": k, "constant": rep.constant})
        summary["counting"].append({"q": b["q"], "layers": [lo, hi], "runs": consts})
        c0 = consts[0]["constant"]
        spread = max(abs(c["constant"] / c0 - 1) for c in consts) if c0 > 0 else math.inf
        run.check(f"approx.counting{i}", spread <= float(b["tol"]), f"C={c0:.6g}, spread {spread:.3g}")
    write_rate_csv(run.path("rates.csv"), rate_rows)
    write_json(run.path("approx.json"), summary)


COMMANDS = {"partition": cmd_partition, "bells": cmd_bells, "transform": cmd_transform,
            "verify": cmd_verify, "approx": cmd_approx}


def cmd_run(cfg, run: Run) -> None:
    """Every block present in the config, in a fixed order."""
    ran = False
    for name, fn in COMMANDS.items():
        if cfg[name] is not None:
            fn(cfg, run)
            ran = True
    if not ran:
        raise ConfigError("config has no command blocks")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brushlets", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=[*COMMANDS, "run"])
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--jobs", type=int, default=1, help="worker count for parallel stages")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg["seed"] if args.seed is None else args.seed
        if not 0 <= int(seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        run = Run(Path(args.out), int(seed), args.jobs)
        (cmd_run if args.command == "run" else COMMANDS[args.command])(cfg, run)
    except ConfigError as exc:
        print(f"brushlets: config error: {exc}", file=sys.stderr)
        return 2
    run.summary()
    return 0 if run.ok else 1


if __name__ == "__main__":
    sys.exit(main())

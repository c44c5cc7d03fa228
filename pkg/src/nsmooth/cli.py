"""Batch front end: validate a JSON run config, execute one pipeline, and
write machine-readable outputs (report.json + grid.csv).

Determinism contract: two runs with equal configs produce byte-identical
reports. Floats are serialized with 17 significant digits, dict keys are
sorted, and no wall-clock data enters the report.

Exit codes: 0 success, 1 config error, 2 hypothesis/acceptance failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from . import __version__
from .catalog import build_field_expr, dist_to_point
from .clarke import MapField, SamplingParams, gs_critical, is_singular_map, is_singular_scalar
from .errors import ConfigError, HypothesisFailure, InsufficientSamples, NSmoothError
from .experiments import equivalence_scan, reeb_check
from .fibration import embed, eta_search
from .manifold import Euclidean, FlatTorus, Sphere, manifold_from_descriptor
from .minnorm import min_norm_point
from .quadrature import ball_quadrature
from .smoothing import (
    MollifierSpec,
    PartitionOfUnity,
    build_cover,
    build_smoothed,
    grad_norms_batch,
    lambda_eps,
    lipschitz_estimate,
    max_error_on_grid,
)

SCHEMA_VERSION = 1
SCHEMA_PATH = Path(__file__).with_name("config_schema.json")


# ----------------------------------------------------------------------
# deterministic serialization


def _fmt_float(x):
    if not np.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def emit_json(obj, indent=0):
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join("  " * (indent + 1) + emit_json(v, indent + 1) for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj, key=str):
            items.append("  " * (indent + 1) + json.dumps(str(k)) + ": " + emit_json(obj[k], indent + 1))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


def _csv_cell(v):
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_grid_csv(path, coord_dim, rows):
    """rows: iterables (coords, F, F_eps, grad_norm, margin, verdict)."""
    header = [f"x{i}" for i in range(coord_dim)] + ["F", "F_eps", "grad_norm", "margin", "verdict"]
    lines = [",".join(header)]
    for coords, *rest in rows:
        cells = [_csv_cell(c) for c in coords] + [_csv_cell(v) for v in rest]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# config handling


def _path_str(err):
    parts = []
    for p in err.absolute_path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts) or "(root)"


def load_config(path):
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("(file)", f"cannot read config: {exc}")
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError("(file)", f"invalid JSON: {exc}")
    schema = json.loads(SCHEMA_PATH.read_text())
    validator = Draft202012Validator(schema)
    errors = list(validator.iter_errors(config))
    if errors:
        err = best_match(errors)
        raise ConfigError(_path_str(err), err.message)
    return config


def _build_manifold(config):
    spec = config.get("manifold")
    if spec is None:
        raise ConfigError("manifold", "required")
    kind = spec["kind"]
    if kind == "euclidean":
        if "dim" not in spec:
            raise ConfigError("manifold.dim", "required for euclidean")
        return Euclidean(spec["dim"])
    if kind == "sphere":
        if "dim" not in spec:
            raise ConfigError("manifold.dim", "required for sphere")
        return Sphere(spec["dim"], spec.get("radius", 1.0))
    if "periods" not in spec:
        raise ConfigError("manifold.periods", "required for flat_torus")
    return FlatTorus(spec["periods"])


def _build_field(config, manifold):
    if "field" not in config:
        raise ConfigError("field", "required for this subcommand")
    try:
        entry = build_field_expr(config["field"], manifold)
    except NSmoothError as exc:
        raise ConfigError("field", str(exc))
    source = entry.field.source if isinstance(entry.field, MapField) else entry.field.manifold
    if source.descriptor() != manifold.descriptor():
        raise ConfigError("field", f"field lives on {source.descriptor()}, config manifold is {manifold.descriptor()}")
    return entry


def _sampling_params(config, seed):
    s = config.get("sampling", {})
    return SamplingParams(
        n=s.get("n", 40),
        seed=seed,
        radius0=s.get("radius0"),
        tol_sing=s.get("tol_sing", SamplingParams.tol_sing),
    )


# ----------------------------------------------------------------------
# subcommands


def _cmd_probe(config, M, seed, out):
    entry = _build_field(config, M)
    point = np.asarray(config["probe"]["point"], float)
    M.check_point(point)
    params = _sampling_params(config, seed)
    results = {}
    rows = []
    if isinstance(entry.field, MapField):
        v = is_singular_map(entry.field, point, params)
        results["clarke_map"] = v.to_dict()
        rows.append((point, None, None, None, v.margin, int(v.singular)))
    else:
        v = is_singular_scalar(entry.field, point, params)
        results["clarke_scalar"] = v.to_dict()
        if entry.name == "dist-to-point":
            base = np.asarray(config["field"]["params"]["point"], float)
            g = gs_critical(M, base, point, params)
            results["grove_shiohama"] = g.to_dict()
            results["verdicts_agree"] = bool(g.singular == v.singular)
        rows.append((point, entry.field.value(point), None, None, v.margin, int(v.singular)))
    write_grid_csv(out / "grid.csv", M.coord_dim, rows)
    return results, 0


def _cmd_scan(config, M, seed, out):
    block = config["scan"]
    base = np.asarray(block["base_point"], float)
    M.check_point(base)
    n = block.get("grid_points", 200)
    entry = dist_to_point(M, base)
    grid = np.atleast_2d(M.grid(n))
    extras = [base[None, :]]
    if entry.known_singular_set is not None:
        extras.append(entry.known_singular_set)
    grid = np.concatenate([grid] + extras, axis=0)
    grid = _dedupe(grid)
    params = _sampling_params(config, seed)
    rep = equivalence_scan(M, base, grid, params)
    rows = [
        (
            rep.grid[i],
            rep.distances[i],
            None,
            None,
            rep.clarke_margin[i],
            int(rep.gs_singular[i]),
        )
        for i in range(len(rep.grid))
    ]
    write_grid_csv(out / "grid.csv", M.coord_dim, rows)
    results = rep.summary()
    results["singular_points"] = rep.grid[rep.gs_singular]
    results["indeterminate_points"] = int(np.sum(rep.indeterminate))
    code = 0 if not rep.disagreements else 2
    return results, code


def _dedupe(points, tol=1e-9):
    kept = []
    for p in points:
        if not any(np.linalg.norm(p - q) < tol for q in kept):
            kept.append(p)
    return np.stack(kept)


def _cmd_smooth(config, M, seed, out):
    entry = _build_field(config, M)
    block = config["smooth"]
    ladder = sorted(block["epsilon_ladder"], reverse=True)
    n = block.get("grid_points", 400)
    order = block.get("quad_order")
    grid = np.atleast_2d(M.grid(n))
    cover_r = block.get("cover_radius", M.injectivity_radius / 4.0)
    cover = build_cover(M, cover_r)
    if isinstance(entry.field, MapField):
        embedding = embed(entry.field.target)
        scalar = False
    else:
        embedding = None
        scalar = True
    lip = lipschitz_estimate(entry.field, seed=seed)
    rungs = []
    last_S = None
    for eps in ladder:
        kwargs = {"order": order} if order is not None else {}
        try:
            S = build_smoothed(entry.field, cover, eps, embedding=embedding, **kwargs)
        except NSmoothError as exc:
            rungs.append({"eps": eps, "status": type(exc).__name__})
            continue
        err = max_error_on_grid(S, grid)
        bound = eps * lambda_eps(M, cover, eps) * lip.value
        ok = err <= bound * (1.0 + 1e-3)
        rungs.append({"eps": eps, "status": "evaluated", "max_error": err,
                      "bound": bound, "within_bound": ok})
        last_S = S
    results = {
        "cover_size": cover.size,
        "cover_radius": cover_r,
        "lambda_eps": {f"{r['eps']:.17g}": lambda_eps(M, cover, r["eps"]) for r in rungs if r["status"] == "evaluated"},
        "lipschitz_estimate": {"value": lip.value, "lower_bound": lip.lower_bound},
        "grid_size": len(grid),
        "rungs": rungs,
        "all_within_bound": all(r.get("within_bound", False) for r in rungs if r["status"] == "evaluated"),
    }
    rows = []
    if last_S is not None:
        base_vals = entry.field.eval(grid) if scalar else None
        s_vals = last_S.values(grid) if scalar else None
        gnorm = grad_norms_batch(last_S, grid) if scalar else None
        margins = None
        if scalar and block.get("with_margins", True):
            params = _sampling_params(config, seed)
            margins = np.empty(len(grid))
            for i, q in enumerate(grid):
                try:
                    margins[i] = is_singular_scalar(entry.field, q, params).margin
                except InsufficientSamples:
                    margins[i] = np.nan
        for i in range(len(grid)):
            rows.append((
                grid[i],
                base_vals[i] if scalar else None,
                s_vals[i] if scalar else None,
                gnorm[i] if scalar else None,
                margins[i] if margins is not None else None,
                None,
            ))
    write_grid_csv(out / "grid.csv", M.coord_dim, rows)
    code = 0 if results["all_within_bound"] else 2
    return results, code


def _cmd_fibrate(config, M, seed, out):
    entry = _build_field(config, M)
    if not isinstance(entry.field, MapField):
        raise ConfigError("field", "fibrate needs a map-valued catalog field")
    block = config["fibrate"]
    E = embed(entry.field.target)
    ladder = block.get("epsilon_ladder", [0.2, 0.1, 0.05, 0.025, 0.0125])
    grid = M.grid(block.get("grid_points", 4096))
    eps_acc, rep = eta_search(
        entry.field, E, block["eta"], eps_ladder=ladder, grid=grid,
        sigma_tol=block.get("sigma_tol", 1e-3),
    )
    results = rep.to_dict()
    rows = []
    if eps_acc is not None or rep.eps is not None:
        eps_used = eps_acc if eps_acc is not None else rep.eps
        cover = build_cover(M, M.injectivity_radius / 4.0)
        S = build_smoothed(entry.field, cover, eps_used, embedding=E)
        from .fibration import Fibration

        fib = Fibration(S, E)
        vals = fib.values(grid)
        base = entry.field.eval(grid)
        dists = entry.field.target.distance(vals, base)
        D, _ = fib.differentials(grid)
        svals = np.linalg.svd(D, compute_uv=False)
        sigma_n = svals[:, entry.field.target.dim - 1]
        tol = block.get("sigma_tol", 1e-3)
        for i in range(len(grid)):
            rows.append((grid[i], None, None, sigma_n[i], dists[i], int(sigma_n[i] > tol)))
    write_grid_csv(out / "grid.csv", M.coord_dim, rows)
    return results, (0 if rep.accepted else 2)


def _cmd_reeb(config, M, seed, out):
    entry = _build_field(config, M)
    block = config["reeb"]
    b1, b2 = block["band"]
    if not b1 < block["level"] < b2:
        raise ConfigError("reeb.band", "need band[0] < level < band[1]")
    params = _sampling_params(config, seed)
    n_grid = block.get("grid_points", 600)
    code = 0
    try:
        rep = reeb_check(entry, block["level"], (b1, b2), block["epsilon"],
                         n_grid=n_grid, params=params)
        results = rep.to_dict()
    except HypothesisFailure as exc:
        results = {"passed": False, "failed_step": exc.step, "detail": str(exc)}
        if exc.report is not None:
            results["steps"] = exc.report.steps
        code = 2
    grid = M.grid(n_grid)
    vals = entry.field.eval(grid)
    cover = build_cover(M, M.injectivity_radius / 4.0)
    S = build_smoothed(entry.field, cover, block["epsilon"])
    svals = S.values(grid)
    gnorm = grad_norms_batch(S, grid)
    rows = [(grid[i], vals[i], svals[i], gnorm[i], None, None) for i in range(len(grid))]
    write_grid_csv(out / "grid.csv", M.coord_dim, rows)
    return results, code


def _cmd_selftest(config, M, seed, out):
    checks = {}
    rng = np.random.default_rng(seed)

    def record(name, ok, detail):
        checks[name] = {"ok": bool(ok), "detail": detail}

    for Mfld in (Euclidean(2), Sphere(2, 1.0), FlatTorus([1.0, 1.0])):
        name = Mfld.descriptor()["kind"]
        P = Mfld.random_points(200, rng)
        cap = Mfld.injectivity_radius if np.isfinite(Mfld.injectivity_radius) else 10.0
        V = Mfld.project_tangent(P, rng.standard_normal(P.shape))
        V = V / np.linalg.norm(V, axis=1, keepdims=True) * (0.9 * cap * rng.uniform(0.01, 1.0, (len(P), 1)))
        Q = Mfld.exp(P, V)
        back = Mfld.log(P, Q, strict=False) if not isinstance(Mfld, Euclidean) else Q - P
        err = np.max(np.linalg.norm(back - V, axis=1) / (1.0 + np.linalg.norm(V, axis=1)))
        record(f"exp_log_roundtrip_{name}", err <= 1e-9, {"max_err": float(err)})
        derr = np.max(np.abs(Mfld.distance(P, Q) - np.linalg.norm(V, axis=1)))
        record(f"exp_distance_{name}", derr <= 1e-10, {"max_err": float(derr)})

    S2 = Sphere(2, 1.0)
    P = S2.random_points(100, rng)
    Q = S2.random_points(100, rng)
    W1 = S2.project_tangent(P, rng.standard_normal(P.shape))
    W2 = S2.project_tangent(P, rng.standard_normal(P.shape))
    T1, T2 = S2.transport(P, Q, W1), S2.transport(P, Q, W2)
    gram_err = max(
        float(np.max(np.abs(np.sum(T1 * T2, axis=1) - np.sum(W1 * W2, axis=1)))),
        float(np.max(np.abs(np.sum(T1 * T1, axis=1) - np.sum(W1 * W1, axis=1)))),
    )
    record("transport_isometry_sphere", gram_err <= 1e-10, {"max_err": gram_err})

    quad_ok = True
    detail = {}
    for m in (1, 2, 3):
        nodes, w = ball_quadrature(m, 0.7, 6)
        vol = float(w.sum())
        from .quadrature import ball_volume

        rel = abs(vol - ball_volume(m, 0.7)) / ball_volume(m, 0.7)
        detail[f"volume_rel_err_m{m}"] = rel
        quad_ok &= rel <= 1e-10
        odd = float(np.abs(w @ nodes[:, 0]))
        detail[f"odd_moment_m{m}"] = odd
        quad_ok &= odd <= 1e-12
    record("ball_quadrature_exactness", quad_ok, detail)

    res = min_norm_point(np.array([[1.0, 0.0], [0.0, 1.0]]))
    record("min_norm_two_points", abs(res.norm - np.sqrt(0.5)) <= 1e-12, {"norm": res.norm})
    ok_wolfe = True
    for _ in range(20):
        pts = rng.standard_normal((6, 3)) + rng.standard_normal(3)
        r = min_norm_point(pts)
        ok_wolfe &= r.wolfe_gap(pts) >= -1e-8
    record("min_norm_wolfe_certificate", ok_wolfe, {})

    cov = build_cover(S2, np.pi / 4.0, grid_size=2000)
    pou = PartitionOfUnity(cov)
    w = pou.weights(S2.grid(500))
    record("partition_sums_to_one", float(np.max(np.abs(w.sum(axis=1) - 1.0))) <= 1e-12,
           {"max_err": float(np.max(np.abs(w.sum(axis=1) - 1.0)))})

    m2 = MollifierSpec(2, 0.1)
    nodes, wq = ball_quadrature(2, 0.1, 80)
    mass = float(wq @ m2.density(nodes))
    record("mollifier_unit_mass", abs(mass - 1.0) <= 1e-8, {"mass": mass})

    ok = all(c["ok"] for c in checks.values())
    write_grid_csv(out / "grid.csv", 0, [])
    return {"checks": checks, "all_ok": ok}, (0 if ok else 2)


_HANDLERS = {
    "probe": (_cmd_probe, True),
    "scan": (_cmd_scan, True),
    "smooth": (_cmd_smooth, True),
    "fibrate": (_cmd_fibrate, True),
    "reeb": (_cmd_reeb, True),
    "selftest": (_cmd_selftest, False),
}


def run(subcommand, config_path, out_dir=".", seed=None):
    """Execute one subcommand; returns the process exit code."""
    try:
        config = load_config(config_path)
        handler, needs_manifold = _HANDLERS[subcommand]
        if subcommand != "selftest" and subcommand not in config:
            raise ConfigError(subcommand, f"config block {subcommand!r} required")
        M = _build_manifold(config) if needs_manifold else None
        effective_seed = int(seed if seed is not None else config.get("seed", 0))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        results, code = handler(config, M, effective_seed, out)
    except ConfigError as exc:
        print(f"config error at {exc.field_path}: {exc}", file=sys.stderr)
        return 1
    except NSmoothError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "nsmooth",
        "tool_version": __version__,
        "subcommand": subcommand,
        "seed": effective_seed,
        "config": config,
        "results": results,
        "exit_code": code,
    }
    (out / "report.json").write_text(emit_json(report) + "\n")
    print(emit_json({"subcommand": subcommand, "exit_code": code,
                     "report": str(out / "report.json")}))
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nsmooth",
        description="Singularity tests, mollifier smoothing, and fibration checks for Lipschitz fields on built-in manifolds.",
    )
    parser.add_argument("subcommand", choices=sorted(_HANDLERS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=".", help="output directory (report.json, grid.csv)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())

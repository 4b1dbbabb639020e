"""``cpp-predict`` command line.

Subcommands: ``fit``, ``predict``, ``simulate``, ``split-eval``. ``--data``
accepts a CSV path or ``bundled:airquality``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources

import numpy as np

from . import __version__, kernels
from .config import load_config
from .conjugate import Dataset, PriorSpec, fit_posterior, sigma2_posterior_params
from .dataio import Report, emit_results, fit_transform, load_csv
from .engine import design, predict
from .lab import run_scenario
from .protocol import OUTLIER_RULES, SplitPlan, find_outliers, split_eval

log = logging.getLogger("cpp_predict")


def bundled_path(name):
    path = resources.files("cpp_predict") / "data" / f"{name}.csv"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data set {name!r}")
    return path


def _load(args):
    path = bundled_path(args.data.split(":", 1)[1]) if args.data.startswith("bundled:") else args.data
    features = args.features.split(",") if args.features else None
    return load_csv(path, args.response, features, missing=args.missing)


def _config(args, **overrides):
    return load_config(args.config, overrides)


def _print_json(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_fit(args):
    loaded = _load(args)
    cfg = _config(args)
    m = cfg.model()
    data = loaded.data
    if args.standardize:
        data = fit_transform(data.X, data.y).apply(data)
    Z = design(data.X, m)
    d = Dataset(Z, data.y)
    prior = PriorSpec.default(Z.shape[1], m.prior_scale)
    st = fit_posterior(d, prior)
    shape, scale = sigma2_posterior_params(st, d, prior, m.a0, m.b0)
    _print_json({
        "n": d.n, "p": d.p, "features": list(loaded.features), "dropped_rows": list(loaded.dropped_rows),
        "beta_hat": st.beta_hat.tolist(), "max_leverage": float(st.leverages.max()),
        "sigma2_posterior": {"shape": shape, "scale": scale,
                             "mean": scale / (shape - 1.0) if shape > 1 else None},
    })
    return 0


def _parse_rows(values, q):
    rows = []
    for v in values:
        row = [float(t) for t in v.split(",")]
        if len(row) != q:
            raise SystemExit(f"--xnew row {v!r} has {len(row)} values, expected {q}")
        rows.append(row)
    return np.array(rows)


def cmd_predict(args):
    loaded = _load(args)
    cfg = _config(args, divergence=args.divergence, alpha=args.alpha)
    X_new = _parse_rows(args.xnew, loaded.data.p)
    data, tr = loaded.data, None
    if args.standardize:
        tr = fit_transform(data.X, data.y)
        data, X_new = tr.apply(data), tr.apply_X(X_new)
    pred = predict(data, X_new, cfg.model(), np.random.default_rng(cfg.seed))
    cpp, plug, var = pred.cpp_mean, pred.map_mean, pred.pred_var
    if tr is not None:
        cpp, plug, var = tr.invert_y(cpp), tr.invert_y(plug), var * tr.y_sd**2
    out = []
    for k, x in enumerate(args.xnew):
        out.append({
            "x_new": x, "cpp": float(cpp[k]), "map": float(plug[k]), "pred_var": float(var[k]),
            "boundary_draws": int(pred.boundary_draws[k]), "convexity_ok": bool(pred.convexity_ok[k]),
        })
    _print_json({"divergence": str(cfg.divergence_kind), "seed": cfg.seed, "predictions": out})
    return 0


def cmd_simulate(args):
    cfg = _config(args)
    sc = cfg.scenario()
    t0 = time.perf_counter()
    s = run_scenario(sc, workers=cfg.simulate.workers)
    summary = {"config": cfg.to_dict(), "backend": kernels.BACKEND, "version": __version__,
               "elapsed_s": time.perf_counter() - t0, **s.as_dict()}
    plot = [row for r in s.replicates if not r.failed for row in r.observation_rows()]
    files = emit_results(Report(summary, "replicates", [r.row() for r in s.replicates], {"gains": plot}), args.out)
    print(f"mean MLPD {s.mean:+.4f} (SE {s.se:.4f}), {s.pct_positive:.0f}% positive, "
          f"{s.n_failed} failed; wrote {', '.join(str(f) for f in files)}")
    return 0


def _outliers(spec, data):
    if spec in OUTLIER_RULES:
        return tuple(int(i) for i in find_outliers(data, spec))
    if not spec.strip():
        return ()
    return tuple(int(t) for t in spec.split(","))


def cmd_split_eval(args):
    loaded = _load(args)
    cfg = _config(args)
    out_idx = _outliers(args.outliers, loaded.data)
    plan = SplitPlan(cfg.split.n_clean_test, out_idx, cfg.split.n_splits, cfg.seed)
    rep = split_eval(loaded.data, plan, cfg.model())
    echo = {**cfg.to_dict(), "data": args.data, "response": args.response,
            "features": list(loaded.features), "dropped_rows": list(loaded.dropped_rows),
            "outliers": args.outliers, "outlier_indices": list(out_idx), "kernel_backend": kernels.BACKEND}
    files = emit_results(rep.to_report(echo), args.out)
    m = rep.metrics()
    print(f"mean MLPD {m['mean_mlpd']:+.4f} (SE {m['se']:.4f}), {m['splits_positive']}/{m['n_splits']} positive, "
          f"gain clean {m['gain_clean']:+.4f}, outlier {m['gain_outlier']:+.4f}; wrote {len(files)} files")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="cpp-predict", description="Conformal-projective point prediction")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--data", required=True, help="CSV path or bundled:NAME")
        p.add_argument("--response", required=True)
        p.add_argument("--features", help="comma-separated feature columns (default: all others)")
        p.add_argument("--missing", choices=("reject", "drop"), default="reject")
        p.add_argument("--config", help="JSON run configuration")

    p = sub.add_parser("fit", help="posterior summary for a data set")
    data_args(p)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="CPP and plug-in predictions at new covariate rows")
    data_args(p)
    p.add_argument("--xnew", action="append", required=True, help="comma-separated covariate row; repeatable")
    p.add_argument("--divergence", choices=("logbc", "hellinger", "dpd"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="Monte Carlo contamination scenario")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("split-eval", help="repeated random splits with held-out outliers")
    data_args(p)
    p.add_argument("--outliers", required=True,
                   help="comma-separated 0-based row positions (after NA removal), or a rule: studentized | iqr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split_eval)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

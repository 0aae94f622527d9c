"""Command-line entry point.

Exit codes: 0 success, 2 bad arguments or failed preconditions, 1 runtime
errors such as unreadable files.  Every flag can also come from a JSON
--config file whose keys are the flag names; flags given explicitly win.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .grid import InvalidArgument, threshold

PROG = "topokit"


class UsageError(InvalidArgument):
    pass


# ---------------------------------------------------------------------------
# helpers

def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x).__name__}")


def _mask(path: str, alpha: float) -> np.ndarray:
    return threshold(io.read_grid(path), alpha)


def _need(args, *names) -> None:
    for n in names:
        if getattr(args, n, None) in (None, []):
            raise UsageError(f"--{n.replace('_', '-')}: required")


def _map(fn, items, jobs: int):
    """Apply fn over input files; results stay in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _outputs_for(inputs: list[str], out: str, suffix: str) -> list[Path]:
    if len(inputs) == 1 and not Path(out).is_dir():
        return [Path(out)]
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    return [d / (Path(p).stem + suffix) for p in inputs]


def _family(args):
    if args.family == "boundary":
        from .watershed import boundary_skeleton_from_mask
        _need(args, "mask")
        return boundary_skeleton_from_mask(_mask(args.mask, args.alpha), args.base_epsilon)
    from .morse import skeleton_1d
    _need(args, "grid")
    return skeleton_1d(io.read_grid(args.grid), args.base_epsilon)


# ---------------------------------------------------------------------------
# commands

def _diagram_one(job):
    from .persistence import diagram
    src, dst, relative_frame, method, unit = job
    dgm = diagram(io.read_grid(src), relative_frame, method=method, unit_essential=unit)
    io.write_diagram_csv(dst, dgm)
    return len(dgm)


def cmd_diagram(args):
    _need(args, "grid", "out")
    outs = _outputs_for(args.grid, args.out, ".csv")
    jobs = [(g, o, args.relative_frame, args.method, args.unit_essential)
            for g, o in zip(args.grid, outs)]
    counts = _map(_diagram_one, jobs, args.jobs)
    _emit({"files": [str(o) for o in outs], "dots": counts})


def cmd_topoloss(args):
    from .topomatch import patchwise_topological_loss, topological_loss
    _need(args, "likelihood", "gt")
    f = io.read_grid(args.likelihood)
    g = _mask(args.gt, args.alpha)
    if args.patch:
        loss, grad = patchwise_topological_loss(f, g, args.patch, args.relative_frame)
        targets = None
    else:
        loss, match, targets, grad = topological_loss(f, g, args.relative_frame)
    if args.targets and targets is not None:
        io.write_targets_csv(args.targets, targets)
    if args.gradient:
        io.write_raw(args.gradient, grad)
    res = {"loss": loss, "weighted": args.lambda_topo * loss}
    if targets is not None:
        res["targets"] = len(targets)
    _emit(res)


def cmd_trigger_loss(args):
    from .topomatch import trigger_topo_loss
    _need(args, "grid")
    value, targets = trigger_topo_loss(io.read_grid(args.grid))
    if args.targets:
        io.write_targets_csv(args.targets, targets)
    _emit({"loss": value, "weighted": args.trigger_weight * value, "targets": len(targets)})


def cmd_warp(args):
    from .warp import homotopy_warp
    _need(args, "source", "target", "out")
    s = _mask(args.source, args.alpha)
    t = _mask(args.target, args.alpha)
    w = homotopy_warp(s, t, repeat=args.repeat, adjacency=args.adjacency)
    io.write_mask(args.out, w)
    _emit({"flipped": int(np.count_nonzero(w != s)), "remaining": int(np.count_nonzero(w != t))})


def cmd_critical_mask(args):
    from .warp import critical_masks
    _need(args, "pred", "gt", "out")
    p = _mask(args.pred, args.alpha)
    g = _mask(args.gt, args.alpha)
    cm = critical_masks(p, g, repeat=args.repeat, adjacency=args.adjacency)
    ext = ".pgm" if p.ndim == 2 else ".raw"
    names = {}
    for key, m in (("m_g", cm.m_g), ("m_f", cm.m_f), ("m", cm.m)):
        path = f"{args.out}_{key}{ext}"
        io.write_mask(path, m)
        names[key] = {"file": path, "pixels": int(np.count_nonzero(m))}
    _emit(names)


def _warping_error_one(job):
    from .warp import warping_error
    pred, gt, alpha, adjacency = job
    return warping_error(_mask(pred, alpha), _mask(gt, alpha), adjacency)


def cmd_warping_error(args):
    _need(args, "pred", "gt")
    if len(args.pred) != len(args.gt):
        raise UsageError(f"--gt: {len(args.gt)} files given for {len(args.pred)} predictions")
    jobs = [(p, g, args.alpha, args.adjacency) for p, g in zip(args.pred, args.gt)]
    vals = _map(_warping_error_one, jobs, args.jobs)
    _emit({"warping_error": vals[0] if len(vals) == 1 else vals})


def cmd_morse_skeleton(args):
    from .morse import skeleton_1d
    _need(args, "grid", "out")
    fam = skeleton_1d(io.read_grid(args.grid), args.epsilon)
    io.write_mask(args.out, fam.query(args.epsilon))
    if args.branches:
        io.write_branches_csv(args.branches, fam)
    _emit({"branches": len(fam), "pixels": int(np.count_nonzero(fam.query(args.epsilon)))})


def cmd_watershed(args):
    from .watershed import basin_labels, watershed_regions
    _need(args, "grid", "out")
    f = io.read_grid(args.grid)
    labels, count = watershed_regions(f, args.theta)
    io.write_mask(args.out, labels == 0)
    if args.labels:
        io.write_raw(args.labels, basin_labels(f, args.theta))
    _emit({"regions": count, "membrane_pixels": int(np.count_nonzero(labels == 0))})


def cmd_dmt_mask(args):
    from .morse import dmt_critical_mask
    _need(args, "grid", "out")
    m = dmt_critical_mask(io.read_grid(args.grid), args.epsilon, sheets=not args.no_sheets)
    io.write_mask(args.out, m)
    _emit({"pixels": int(np.count_nonzero(m))})


def cmd_boundary_skeleton(args):
    from .watershed import boundary_skeleton_from_mask
    _need(args, "mask", "out")
    fam = boundary_skeleton_from_mask(_mask(args.mask, args.alpha), args.epsilon)
    io.write_mask(args.out, fam.query(args.epsilon))
    if args.branches:
        io.write_branches_csv(args.branches, fam)
    _emit({"branches": len(fam)})


def cmd_sample(args):
    from .probstruct import GaussianThreshold, sample_skeletons
    _need(args, "out_dir")
    g = GaussianThreshold(args.mu, args.sigma)
    fam = _family(args)
    init = _mask(args.initial, args.alpha) if args.initial else None
    samples = sample_skeletons(fam, g, args.seed, args.n, init)
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    ext = ".pgm" if len(fam.shape) == 2 else ".raw"
    rows = []
    for i, s in enumerate(samples):
        io.write_mask(d / f"sample_{i:04d}{ext}", s.segmentation)
        rows.append((i, s.epsilon_used))
    io.write_csv(d / "epsilons.csv", ["sample", "epsilon"], rows)
    _emit({"samples": len(samples), "out_dir": str(d)})


def cmd_uncertainty(args):
    from .probstruct import empirical_uncertainty
    _need(args, "samples", "out")
    d = Path(args.samples)
    if not d.is_dir():
        raise UsageError(f"--samples: {d} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in (".pgm",) + io.GRID_SUFFIXES)
    u = empirical_uncertainty([_mask(str(p), args.alpha) for p in files])
    io.write_raw(args.out, u)
    _emit({"samples": len(files), "max": float(u.max()), "mean": float(u.mean())})


def cmd_proofread_sim(args):
    from .probstruct import GaussianThreshold, gt_branch_labels, proofread_simulate
    _need(args, "gt", "out")
    g = GaussianThreshold(args.mu, args.sigma)
    fam = _family(args)
    gt = _mask(args.gt, args.alpha)
    init = _mask(args.initial, args.alpha) if args.initial else None
    labels = gt_branch_labels(fam, gt)
    order = "uncertainty_desc" if args.order == "uncertainty" else "random"
    curve = proofread_simulate(fam, g, labels, gt, order, args.seed, init)
    io.write_curve_csv(args.out, curve.rows)
    _emit({"branches": len(fam), "steps": curve.steps,
           "final_voi": curve.rows[-1][1], "final_pixel_error": curve.rows[-1][2]})


def _metrics_one(job):
    from .metrics import all_metrics
    pred, gt, alpha, patch, n_patches, seed, regions_from = job
    return all_metrics(_mask(pred, alpha), _mask(gt, alpha), patch, n_patches, seed, regions_from)


def cmd_metrics(args):
    _need(args, "pred", "gt")
    if len(args.pred) != len(args.gt):
        raise UsageError(f"--gt: {len(args.gt)} files given for {len(args.pred)} predictions")
    jobs = [(p, g, args.alpha, args.patch, args.n_patches, args.seed, args.regions_from)
            for p, g in zip(args.pred, args.gt)]
    res = _map(_metrics_one, jobs, args.jobs)
    out = res[0] if len(res) == 1 else [dict(r, pred=p) for r, p in zip(res, args.pred)]
    if args.json:
        _emit(out, args.out)
    else:
        for r in res:
            print(" ".join(f"{k}={v:.6g}" for k, v in r.items()
                           if isinstance(v, float)))


def cmd_synth(args):
    from . import synth
    _need(args, "out_dir")
    scene = synth.make(args.scene)
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    for key, arr in scene.arrays.items():
        if arr.dtype == bool and arr.ndim == 2:
            path = d / f"{scene.name}_{key}.pgm"
            io.write_pgm(path, arr)
        else:
            path = d / f"{scene.name}_{key}.raw"
            io.write_raw(path, arr)
        files[key] = path.name
    meta = dict(scene.meta, scene=scene.name, shape=list(next(iter(scene.arrays.values())).shape),
                files=files)
    _emit(meta, str(d / f"{scene.name}.json"))
    _emit({"scene": scene.name, "files": sorted(files.values())})


# ---------------------------------------------------------------------------
# parser

def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _adjacency(s: str) -> int:
    v = int(s)
    if v not in (4, 8, 6, 26):
        raise argparse.ArgumentTypeError(f"must be 4, 8, 6 or 26, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flag values; explicit flags win")
    common.add_argument("--jobs", type=_positive_int, default=1,
                        help="worker processes across input files")

    p = argparse.ArgumentParser(prog=PROG, description="Topology kernels for image grids.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    def alpha(sp):
        sp.add_argument("--alpha", type=float, default=0.5,
                        help="threshold for binarising grid inputs (0 < alpha < 1)")

    def adjacency(sp):
        sp.add_argument("--adjacency", type=_adjacency, default=None,
                        help="foreground adjacency (4/8 in 2D, 6/26 in 3D)")

    sp = add("diagram", cmd_diagram, "persistence diagram of a grid as CSV")
    sp.add_argument("--grid", nargs="+")
    sp.add_argument("--out", help="CSV file, or a directory for several grids")
    sp.add_argument("--relative-frame", action="store_true")
    sp.add_argument("--method", choices=["union_find", "reduction"], default="union_find")
    sp.add_argument("--unit-essential", action="store_true",
                    help="report the essential dot with death 1 instead of the grid minimum")

    sp = add("topoloss", cmd_topoloss, "matching loss between a likelihood and a binary gt")
    sp.add_argument("--likelihood")
    sp.add_argument("--gt")
    alpha(sp)
    sp.add_argument("--relative-frame", action="store_true")
    sp.add_argument("--patch", type=_positive_int, default=None, help="tile size; whole grid if omitted")
    sp.add_argument("--lambda-topo", type=float, default=1e-4)
    sp.add_argument("--targets", help="CSV of critical-pixel targets")
    sp.add_argument("--gradient", help="raw grid of the dense gradient")

    sp = add("trigger-loss", cmd_trigger_loss, "single-component prior on a mask grid")
    sp.add_argument("--grid")
    sp.add_argument("--trigger-weight", type=float, default=10.0)
    sp.add_argument("--targets")

    sp = add("warp", cmd_warp, "homotopic warp of source toward target")
    sp.add_argument("--source")
    sp.add_argument("--target")
    sp.add_argument("--out")
    sp.add_argument("--repeat", action="store_true", help="rescan until no flip happens")
    alpha(sp)
    adjacency(sp)

    sp = add("critical-mask", cmd_critical_mask, "critical masks m_g, m_f and their union")
    sp.add_argument("--pred")
    sp.add_argument("--gt")
    sp.add_argument("--out", help="output prefix; writes <out>_m_g, <out>_m_f, <out>_m")
    sp.add_argument("--repeat", action="store_true")
    alpha(sp)
    adjacency(sp)

    sp = add("warping-error", cmd_warping_error, "fraction of pixels left after warping gt onto pred")
    sp.add_argument("--pred", nargs="+")
    sp.add_argument("--gt", nargs="+")
    alpha(sp)
    adjacency(sp)

    sp = add("morse-skeleton", cmd_morse_skeleton, "ridge skeleton after persistence pruning")
    sp.add_argument("--grid")
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--out")
    sp.add_argument("--branches", help="CSV branch table")

    sp = add("watershed", cmd_watershed, "persistence-filtered watershed membrane")
    sp.add_argument("--grid")
    sp.add_argument("--theta", type=float, default=0.1)
    sp.add_argument("--out")
    sp.add_argument("--labels", help="raw grid of basin labels")

    sp = add("dmt-mask", cmd_dmt_mask, "ridge skeleton plus basin boundaries")
    sp.add_argument("--grid")
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--out")
    sp.add_argument("--no-sheets", action="store_true")

    sp = add("boundary-skeleton", cmd_boundary_skeleton, "instance-separating boundaries of a blob mask")
    sp.add_argument("--mask")
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--out")
    sp.add_argument("--branches")
    alpha(sp)

    def family(sp):
        sp.add_argument("--family", choices=["morse", "boundary"], default="morse")
        sp.add_argument("--grid", help="likelihood for a ridge family")
        sp.add_argument("--mask", help="blob mask for a boundary family")
        sp.add_argument("--base-epsilon", type=float, default=0.01,
                        help="pruning level when building the family")
        sp.add_argument("--mu", type=float, default=0.2)
        sp.add_argument("--sigma", type=float, default=0.05)
        sp.add_argument("--initial", help="binary mask grown from the sampled skeleton")
        alpha(sp)

    sp = add("sample", cmd_sample, "sample skeletons at Gaussian thresholds")
    family(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=_positive_int, default=10)
    sp.add_argument("--out-dir")

    sp = add("uncertainty", cmd_uncertainty, "per-pixel variance over a directory of samples")
    sp.add_argument("--samples")
    sp.add_argument("--out")
    alpha(sp)

    sp = add("proofread-sim", cmd_proofread_sim, "simulated branch-by-branch proofreading")
    family(sp)
    sp.add_argument("--gt")
    sp.add_argument("--order", choices=["uncertainty", "random"], default="uncertainty")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="curve CSV")

    sp = add("metrics", cmd_metrics, "dice, accuracy, ARI, VOI, Betti and warping error")
    sp.add_argument("--pred", nargs="+")
    sp.add_argument("--gt", nargs="+")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--out", help="write the JSON here instead of stdout")
    sp.add_argument("--patch", type=_positive_int, default=64)
    sp.add_argument("--n-patches", type=_positive_int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--regions-from", choices=["foreground", "complement"], default="foreground")
    alpha(sp)

    from .synth import SCENES
    sp = add("synth", cmd_synth, "write a synthetic scene and its JSON sidecar")
    sp.add_argument("--scene", choices=sorted(SCENES), default="rings")
    sp.add_argument("--out-dir")
    return p


def _validate(args) -> None:
    checks = {
        "alpha": lambda v: 0 < v < 1,
        "epsilon": lambda v: math.isfinite(v) and v >= 0,
        "base_epsilon": lambda v: math.isfinite(v) and v >= 0,
        "theta": lambda v: math.isfinite(v) and v > 0,
        "sigma": lambda v: math.isfinite(v) and v > 0,
        "mu": math.isfinite,
        "lambda_topo": lambda v: math.isfinite(v) and v >= 0,
        "trigger_weight": lambda v: math.isfinite(v) and v >= 0,
    }
    need = {
        "alpha": "0 < alpha < 1", "epsilon": "finite and >= 0", "base_epsilon": "finite and >= 0",
        "theta": "finite and > 0", "sigma": "finite and > 0", "mu": "finite",
        "lambda_topo": "finite and >= 0", "trigger_weight": "finite and >= 0",
    }
    for name, ok in checks.items():
        v = getattr(args, name, None)
        if v is not None and not ok(float(v)):
            raise UsageError(f"--{name.replace('_', '-')}: must be {need[name]}, got {v}")


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"--config: cannot read {args.config} ({e})") from None
        if not isinstance(cfg, dict):
            raise UsageError("--config: expected a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known - {"command"})
        if unknown:
            raise UsageError(f"--config: unknown key {unknown[0]!r} for {args.command}")
        for a in sub._actions:
            if a.dest in cfg and a.nargs == "+" and isinstance(cfg[a.dest], str):
                cfg[a.dest] = [cfg[a.dest]]
        # defaults from the file, then re-parse so explicit flags override them
        sub.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
        args = parser.parse_args(argv)
    _validate(args)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        args.func(args)
    except SystemExit as e:          # argparse usage errors
        return int(e.code or 0) and 2
    except InvalidArgument as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 2
    except (io.FormatError, OSError) as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:      # noqa: BLE001
        print(f"{PROG}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

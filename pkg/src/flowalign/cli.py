"""Command-line pipeline: extract descriptors, align, evaluate, synthesize."""

import argparse
import logging
import os
import sys
import tempfile
import time

import numpy as np

from .costvol import SequenceSet, build_cost_volume, resolve_k_max
from .evaluate import (
    GroundTruthCsvError,
    SynthParams,
    evaluate_matches,
    format_summary,
    generate_synthetic,
    read_gt_frames,
    read_gt_gps,
    render_pr_svg,
    write_gt_frames,
    write_report_csv,
)
from .features import DimensionMismatchError, compute_hog, load_pgm, read_fvec, write_fvec
from .flownet import CapacityOverflowError, build_network
from .maxflow import (
    DEFAULT_BACKEND,
    InconsistentFlowError,
    MalformedNetworkError,
    min_cut_from_residual,
    push_relabel_max_flow,
)
from .surface import SurfaceCoverageError, extract_surface, global_best, read_matches, write_matches

log = logging.getLogger("flowalign")

EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _atomic_write(path, writer, mode="w"):
    """Write through a temp file and rename, so partial output never lands."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".flowalign-")
    try:
        with os.fdopen(fd, mode) as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _frame_paths(args):
    if len(args.images) == 1 and os.path.isdir(args.images[0]):
        directory = args.images[0]
        if args.manifest:
            with open(args.manifest) as fh:
                names = [line.strip() for line in fh if line.strip()]
        else:
            names = sorted(n for n in os.listdir(directory)
                           if n.lower().endswith(".pgm"))
        paths = [os.path.join(directory, n) for n in names]
    else:
        paths = list(args.images)
    if not paths:
        raise ValueError(f"no frames found in {args.images[0]}")
    return paths


def cmd_extract(args) -> int:
    paths = _frame_paths(args)
    descs = []
    size = None
    first = None
    for path in paths:
        with open(path, "rb") as fh:
            try:
                img = load_pgm(fh.read())
            except ValueError as exc:
                raise ValueError(f"{path}: {exc}") from None
        if size is None:
            size, first = (img.width, img.height), path
        elif (img.width, img.height) != size:
            raise DimensionMismatchError(
                f"mixed image sizes: {first} is {size[0]}x{size[1]}, "
                f"{path} is {img.width}x{img.height}")
        descs.append(compute_hog(img, cell_size=args.cell_size, bins=args.bins))
    _atomic_write(args.out, lambda fh: write_fvec(np.asarray(descs), fh), mode="wb")
    log.info("extract: %d frames, descriptor dim %d -> %s",
             len(descs), descs[0].size, args.out)
    return 0


def cmd_align(args) -> int:
    if args.eta < 0:
        raise ValueError(f"eta must be >= 0, got {args.eta}")
    if args.scale < 1:
        raise ValueError(f"scale must be >= 1, got {args.scale}")

    with open(args.test) as fh:
        test = read_fvec(fh)
    refs = []
    for path in args.refs:
        with open(path) as fh:
            refs.append(read_fvec(fh))
    seqs = SequenceSet(test, refs)
    k_max = resolve_k_max(args.kmax, seqs)

    times = {}
    tick = time.perf_counter()
    vol = build_cost_volume(seqs, k_max=k_max)
    times["volume"] = time.perf_counter() - tick

    tick = time.perf_counter()
    net = build_network(vol, eta=args.eta, scale=args.scale)
    times["network"] = time.perf_counter() - tick

    tick = time.perf_counter()
    result = push_relabel_max_flow(net, backend=args.backend)
    times["maxflow"] = time.perf_counter() - tick

    tick = time.perf_counter()
    cut = min_cut_from_residual(net, result)
    times["cut"] = time.perf_counter() - tick

    tick = time.perf_counter()
    surf = extract_surface(cut, vol)
    match = global_best(surf, vol)
    times["surface"] = time.perf_counter() - tick

    # independent capacity recount over the cut arcs
    recount = int(np.asarray(cut.cut_caps, dtype=np.int64).sum())
    if recount != result.flow_value:
        raise InconsistentFlowError(
            f"cut capacity {recount} does not equal flow value {result.flow_value}")

    _atomic_write(args.out, lambda fh: write_matches(surf, match, fh))

    n_forward = int(np.asarray(net.is_forward).sum())
    log.info("align: backend %s, volume %dx%dx%d (k_max %d)",
             args.backend or DEFAULT_BACKEND, vol.n_refs, vol.n_test,
             2 * vol.k_max + 1, vol.k_max)
    log.info("align: network %d nodes, %d arcs", net.node_count, n_forward)
    log.info("align: flow value %d == cut capacity over %d cut arcs",
             result.flow_value, len(cut.cut_arcs))
    log.info("align: stage seconds %s",
             " ".join(f"{k}={v:.3f}" for k, v in times.items()))
    log.info("align: matched %d of %d frames -> %s",
             int(match.valid.sum()), match.n_test, args.out)
    return 0


def cmd_eval(args) -> int:
    with open(args.matches) as fh:
        _, match = read_matches(fh)
    with open(args.gt) as fh:
        header = fh.readline().strip()
        fh.seek(0)
        if header == "j,i,true_ref_frame":
            gt = read_gt_frames(fh)
        elif header == "seq,frame,lat,lon":
            gt = read_gt_gps(fh)
        else:
            raise GroundTruthCsvError(f"unrecognized ground-truth header: {header!r}")

    # one P-R point per distinct achievable cost, so the curve is complete
    costs = sorted({float(c) for c in match.best_cost[match.valid]})
    thresholds = costs or [args.threshold]
    distances = (args.tp_tol_meters,) if gt.mode == "gps" else ()
    report = evaluate_matches(match, gt, thresholds, args.threshold,
                              tol_frames=args.tp_tol_frames,
                              tol_meters=args.tp_tol_meters,
                              threshold_distances=distances)

    _atomic_write(args.out, lambda fh: write_report_csv(report, fh))
    svg_path = os.path.splitext(args.out)[0] + ".svg"
    _atomic_write(svg_path, lambda fh: fh.write(render_pr_svg(report)))
    sys.stdout.write(format_summary(report))
    log.info("eval: %d curve points -> %s, chart -> %s",
             len(report.pr_points), args.out, svg_path)
    return 0


def cmd_synth(args) -> int:
    params = SynthParams(n_places=args.places, n_refs=args.refs, dim=args.dim,
                         speed_jitter=args.jitter, desync=args.desync,
                         noise_sigma=args.noise, dropout_prob=args.dropout)
    seqs, gt = generate_synthetic(params, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "test.fvec"),
                  lambda fh: write_fvec(seqs.test, fh), mode="wb")
    for i, ref in enumerate(seqs.refs):
        _atomic_write(os.path.join(args.out, f"ref_{i:02d}.fvec"),
                      lambda fh, r=ref: write_fvec(r, fh), mode="wb")
    _atomic_write(os.path.join(args.out, "gt.csv"),
                  lambda fh: write_gt_frames(gt, fh))
    log.info("synth: %d+1 sequences of dim %d, %d test frames -> %s",
             params.n_refs, params.dim, seqs.n_test, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowalign",
        description="Align image-descriptor sequences by min-cut over a "
                    "3D flow network, and score the matches.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="HOG descriptors from PGM frames")
    p.add_argument("images", nargs="+",
                   help="a directory of .pgm frames, or the frame files in order")
    p.add_argument("--manifest",
                   help="text file of frame names overriding lexicographic order")
    p.add_argument("--cell-size", type=int, default=30, help="HOG cell size")
    p.add_argument("--bins", type=int, default=50, help="orientation bins")
    p.add_argument("--out", required=True, help="output FVEC path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("align", help="match a test sequence against references")
    p.add_argument("test", help="test-sequence FVEC")
    p.add_argument("refs", nargs="+", help="reference FVEC files")
    p.add_argument("--kmax", default="auto",
                   help='shift window half-width, or "auto" for half the '
                        "shortest reference")
    p.add_argument("--eta", type=float, default=0.01,
                   help="occlusion capacity factor")
    p.add_argument("--scale", type=int, default=1_000_000,
                   help="cost-to-integer capacity scale")
    p.add_argument("--backend", choices=["pure", "compiled"], default=None,
                   help="solver kernel (default: best available)")
    p.add_argument("--out", required=True, help="output match CSV path")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score a match CSV against ground truth")
    p.add_argument("matches", help="match CSV from align")
    p.add_argument("gt", help="ground-truth CSV (frame or gps mode)")
    p.add_argument("--threshold", type=float, default=1.0,
                   help="cost threshold for the reported counts")
    p.add_argument("--tp-tol-frames", type=int, default=None,
                   help="frame tolerance for a true positive (frame-mode gt)")
    p.add_argument("--tp-tol-meters", type=float, default=None,
                   help="distance tolerance for a true positive (gps-mode gt)")
    p.add_argument("--out", required=True, help="output report CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic sequences + ground truth")
    p.add_argument("--places", type=int, required=True, help="route length")
    p.add_argument("--refs", type=int, default=1, help="reference count")
    p.add_argument("--dim", type=int, default=16, help="descriptor dimension")
    p.add_argument("--jitter", type=int, default=0, help="max extra repeats per place")
    p.add_argument("--desync", type=int, default=0, help="max timeline lag in frames")
    p.add_argument("--noise", type=float, default=0.0, help="descriptor noise sigma")
    p.add_argument("--dropout", type=float, default=0.0,
                   help="probability a frame is replaced by noise")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SurfaceCoverageError, InconsistentFlowError, MalformedNetworkError) as exc:
        log.error("internal consistency failure: %s", exc)
        return EXIT_INTERNAL
    except (OSError, ValueError, CapacityOverflowError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

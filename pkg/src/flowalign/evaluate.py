"""Scoring matches against ground truth, plus a synthetic sequence generator."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costvol import SequenceSet
from .surface import GlobalMatch

EARTH_RADIUS_M = 6_371_000.0

DROPOUT_BURST_FRAMES = 4


class ModeMismatchError(ValueError):
    """Raised when a tolerance kind does not fit the ground-truth mode."""


class GroundTruthCsvError(ValueError):
    """Raised on malformed ground-truth CSV files."""


class MissingGroundTruthError(ValueError):
    """Raised when a matched frame has no ground-truth entry."""


@dataclass
class GroundTruth:
    """Known correspondence for every test frame.

    Frame mode stores ref_frames[i, j], the true frame of reference i for
    test frame j. GPS mode stores a coordinate per test frame plus one
    coordinate track per reference; tolerances are then metric.
    """

    mode: str
    ref_frames: Optional[np.ndarray] = None
    test_gps: Optional[np.ndarray] = None
    ref_gps: Optional[list] = None

    def __post_init__(self):
        if self.mode not in ("frame", "gps"):
            raise ValueError(f"unknown ground-truth mode {self.mode!r}")
        if self.mode == "frame":
            if self.ref_frames is None or self.test_gps is not None or self.ref_gps is not None:
                raise ValueError("frame mode takes ref_frames only")
            self.ref_frames = np.asarray(self.ref_frames, dtype=np.int64)
            if self.ref_frames.ndim != 2:
                raise ValueError("ref_frames must be (n_refs, n_test)")
            if np.any(self.ref_frames < 0):
                raise ValueError("negative reference frame index in ground truth")
        else:
            if self.test_gps is None or self.ref_gps is None or self.ref_frames is not None:
                raise ValueError("gps mode takes test_gps and ref_gps only")
            self.test_gps = _check_coords(np.asarray(self.test_gps, dtype=np.float64), "test")
            self.ref_gps = [
                _check_coords(np.asarray(t, dtype=np.float64), f"reference {i}")
                for i, t in enumerate(self.ref_gps)
            ]

    @property
    def n_test(self) -> int:
        if self.mode == "frame":
            return self.ref_frames.shape[1]
        return self.test_gps.shape[0]


def _check_coords(track, name):
    if track.ndim != 2 or track.shape[1] != 2:
        raise ValueError(f"{name} GPS track must be (n, 2), got {track.shape}")
    lat, lon = track[:, 0], track[:, 1]
    if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0):
        raise ValueError(f"{name} GPS track has out-of-range coordinates")
    return track


@dataclass
class EvalReport:
    """Precision-recall points plus error statistics at one threshold."""

    pr_points: list
    threshold: float
    counts: tuple
    mean_error_m: Optional[float] = None
    variance_m: Optional[float] = None
    percentage_error: dict = field(default_factory=dict)


def _check_tol(gt: GroundTruth, tol_frames, tol_meters):
    if gt.mode == "frame":
        if tol_frames is None or tol_meters is not None:
            raise ModeMismatchError("frame-mode ground truth needs a frame tolerance")
        return float(tol_frames)
    if tol_meters is None or tol_frames is not None:
        raise ModeMismatchError("gps-mode ground truth needs a metric tolerance")
    return float(tol_meters)


def _matched_gps_error(match: GlobalMatch, gt: GroundTruth, j: int) -> float:
    i = int(match.best_ref[j])
    f = int(match.ref_frame[j])
    if i >= len(gt.ref_gps):
        raise MissingGroundTruthError(f"no GPS track for reference {i}")
    track = gt.ref_gps[i]
    if f >= track.shape[0]:
        raise MissingGroundTruthError(f"no GPS fix for reference {i} frame {f}")
    return haversine_m(gt.test_gps[j], track[f])


def classify(match: GlobalMatch, t: float, gt: GroundTruth,
             tol_frames=None, tol_meters=None) -> tuple:
    """Split test frames into (TP, FP, FN) at cost threshold t.

    A frame is positive when it matched with cost <= t. Positives are
    true when the matched reference frame agrees with ground truth within
    the tolerance; every negative frame, including no-match frames,
    counts as a false negative.
    """
    tol = _check_tol(gt, tol_frames, tol_meters)
    m = match.n_test
    if gt.n_test != m:
        raise MissingGroundTruthError(
            f"ground truth covers {gt.n_test} frames, matches cover {m}")
    positive = match.valid & (match.best_cost <= t)
    pos = np.flatnonzero(positive)
    tp = 0
    if gt.mode == "frame":
        n_gt = gt.ref_frames.shape[0]
        for j in pos:
            i = int(match.best_ref[j])
            if i >= n_gt:
                raise MissingGroundTruthError(f"no ground truth for reference {i}")
            if abs(int(match.ref_frame[j]) - int(gt.ref_frames[i, j])) <= tol:
                tp += 1
    else:
        for j in pos:
            if _matched_gps_error(match, gt, j) <= tol:
                tp += 1
    fp = int(pos.size) - tp
    return tp, fp, m - tp - fp


def pr_curve(match: GlobalMatch, gt: GroundTruth, thresholds,
             tol_frames=None, tol_meters=None) -> list:
    """Precision and recall at each threshold, as (t, precision, recall).

    Precision at zero positives is defined as 1.0.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("need at least one threshold")
    points = []
    for t in thresholds:
        tp, fp, fn = classify(match, t, gt, tol_frames=tol_frames, tol_meters=tol_meters)
        precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
        recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
        points.append((float(t), precision, recall))
    return points


def haversine_m(a, b) -> float:
    """Great-circle distance in meters between (lat, lon) pairs in degrees."""
    lat1, lon1 = float(a[0]), float(a[1])
    lat2, lon2 = float(b[0]), float(b[1])
    for lat, lon in ((lat1, lon1), (lat2, lon2)):
        if abs(lat) > 90.0 or abs(lon) > 180.0:
            raise ValueError(f"coordinate out of range: ({lat}, {lon})")
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2 - lon1)
    h = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return float(2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h)))


def gps_error_stats(match: GlobalMatch, gt: GroundTruth, threshold_distances) -> tuple:
    """Mean, population variance, and exceedance percentages of GPS error.

    Errors are measured between each matched test frame's coordinate and
    the matched reference frame's coordinate. No-match frames carry no
    error, so they are left out of the mean and variance, but they count
    against every distance threshold. Percentages are over all test
    frames.
    """
    if gt.mode != "gps":
        raise ModeMismatchError("gps_error_stats needs gps-mode ground truth")
    m = match.n_test
    if gt.n_test != m:
        raise MissingGroundTruthError(
            f"ground truth covers {gt.n_test} frames, matches cover {m}")
    matched = np.flatnonzero(match.valid)
    errors = np.array([_matched_gps_error(match, gt, j) for j in matched])
    n_miss = m - matched.size
    if errors.size:
        mean = float(errors.mean())
        variance = float(errors.var())
    else:
        mean = float("nan")
        variance = float("nan")
    pct = {}
    for d in threshold_distances:
        over = int((errors > float(d)).sum()) + n_miss
        pct[float(d)] = 100.0 * over / m
    return mean, variance, pct


def evaluate_matches(match: GlobalMatch, gt: GroundTruth, thresholds, t: float,
                     tol_frames=None, tol_meters=None,
                     threshold_distances=()) -> EvalReport:
    """Full report: P-R curve, counts at t, GPS stats when available."""
    points = pr_curve(match, gt, thresholds, tol_frames=tol_frames, tol_meters=tol_meters)
    counts = classify(match, t, gt, tol_frames=tol_frames, tol_meters=tol_meters)
    report = EvalReport(pr_points=points, threshold=float(t), counts=counts)
    if gt.mode == "gps":
        mean, variance, pct = gps_error_stats(match, gt, threshold_distances)
        report.mean_error_m = mean
        report.variance_m = variance
        report.percentage_error = pct
    return report


def write_report_csv(report: EvalReport, sink) -> None:
    sink.write("t,precision,recall\n")
    for t, p, r in report.pr_points:
        sink.write(f"{t:.12g},{p:.12g},{r:.12g}\n")


def format_summary(report: EvalReport) -> str:
    tp, fp, fn = report.counts
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
    lines = [
        f"threshold t = {report.threshold:g}",
        f"TP {tp}  FP {fp}  FN {fn}",
        f"precision {precision:.4f}  recall {recall:.4f}",
    ]
    if report.mean_error_m is not None:
        lines.append(f"gps mean error {report.mean_error_m:.4f} m, "
                     f"variance {report.variance_m:.4f}")
        for d in sorted(report.percentage_error):
            lines.append(f"error > {d:g} m: {report.percentage_error[d]:.2f}%")
    return "\n".join(lines) + "\n"


def render_pr_svg(report: EvalReport, width=480, height=360) -> str:
    """P-R curve as a standalone SVG document (recall on x, precision on y)."""
    pad = 48
    pw, ph = width - 2 * pad, height - 2 * pad

    def sx(r):
        return pad + r * pw

    def sy(p):
        return pad + (1.0 - p) * ph

    pts = " ".join(f"{sx(r):.2f},{sy(p):.2f}" for _, p, r in report.pr_points)
    ticks = []
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        ticks.append(f'<text x="{sx(v):.0f}" y="{height - pad + 16}" '
                     f'font-size="10" text-anchor="middle">{v:g}</text>')
        ticks.append(f'<text x="{pad - 6}" y="{sy(v) + 3:.0f}" '
                     f'font-size="10" text-anchor="end">{v:g}</text>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<rect x="{pad}" y="{pad}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#888"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>\n'
        + "\n".join(ticks) + "\n"
        f'<text x="{width / 2:.0f}" y="{height - 8}" font-size="11" '
        f'text-anchor="middle">recall</text>\n'
        f'<text x="12" y="{height / 2:.0f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {height / 2:.0f})">precision</text>\n'
        '</svg>\n'
    )


# ---------------------------------------------------------------------------
# ground-truth CSV io
# ---------------------------------------------------------------------------

def write_gt_frames(gt: GroundTruth, sink) -> None:
    if gt.mode != "frame":
        raise ModeMismatchError("write_gt_frames needs frame-mode ground truth")
    sink.write("j,i,true_ref_frame\n")
    n_refs, m = gt.ref_frames.shape
    for j in range(m):
        for i in range(n_refs):
            sink.write(f"{j},{i},{int(gt.ref_frames[i, j])}\n")


def read_gt_frames(source) -> GroundTruth:
    header = source.readline().strip()
    if header != "j,i,true_ref_frame":
        raise GroundTruthCsvError(f"bad ground-truth header: {header!r}")
    rows = {}
    for lineno, line in enumerate(source, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise GroundTruthCsvError(f"line {lineno}: expected 3 fields")
        try:
            j, i, f = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise GroundTruthCsvError(f"line {lineno}: {exc}") from None
        if (j, i) in rows:
            raise GroundTruthCsvError(f"duplicate entry for frame {j}, reference {i}")
        rows[(j, i)] = f
    if not rows:
        raise GroundTruthCsvError("ground-truth file has no rows")
    m = max(j for j, _ in rows) + 1
    n_refs = max(i for _, i in rows) + 1
    frames = np.zeros((n_refs, m), dtype=np.int64)
    for j in range(m):
        for i in range(n_refs):
            if (j, i) not in rows:
                raise GroundTruthCsvError(f"missing entry for frame {j}, reference {i}")
            frames[i, j] = rows[(j, i)]
    return GroundTruth(mode="frame", ref_frames=frames)


def write_gt_gps(gt: GroundTruth, sink) -> None:
    if gt.mode != "gps":
        raise ModeMismatchError("write_gt_gps needs gps-mode ground truth")
    sink.write("seq,frame,lat,lon\n")
    for f, (lat, lon) in enumerate(gt.test_gps):
        sink.write(f"test,{f},{lat:.12g},{lon:.12g}\n")
    for i, track in enumerate(gt.ref_gps):
        for f, (lat, lon) in enumerate(track):
            sink.write(f"{i},{f},{lat:.12g},{lon:.12g}\n")


def read_gt_gps(source) -> GroundTruth:
    header = source.readline().strip()
    if header != "seq,frame,lat,lon":
        raise GroundTruthCsvError(f"bad ground-truth header: {header!r}")
    tracks = {}
    for lineno, line in enumerate(source, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise GroundTruthCsvError(f"line {lineno}: expected 4 fields")
        seq = parts[0]
        try:
            f = int(parts[1])
            lat, lon = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise GroundTruthCsvError(f"line {lineno}: {exc}") from None
        tracks.setdefault(seq, {})[f] = (lat, lon)

    def build(seq):
        if seq not in tracks:
            raise GroundTruthCsvError(f"no rows for sequence {seq!r}")
        entries = tracks[seq]
        n = max(entries) + 1
        if len(entries) != n:
            raise GroundTruthCsvError(f"sequence {seq!r} has gaps in frame numbering")
        return np.array([entries[f] for f in range(n)], dtype=np.float64)

    ref_names = sorted((s for s in tracks if s != "test"), key=lambda s: int(s))
    if ref_names != [str(i) for i in range(len(ref_names))]:
        raise GroundTruthCsvError("reference sequences must be numbered 0..N-1")
    return GroundTruth(mode="gps", test_gps=build("test"),
                       ref_gps=[build(s) for s in ref_names])


# ---------------------------------------------------------------------------
# synthetic sequences
# ---------------------------------------------------------------------------

@dataclass
class SynthParams:
    """Knobs for the synthetic route generator.

    n_places latent waypoints are visited in order by every sequence.
    desync bounds how far any sequence may lag the canonical timeline
    (a late start, or lingering at a place); speed_jitter is the largest
    number of extra repeats of one place. noise_sigma perturbs observed
    descriptors and dropout_prob replaces short bursts of frames with
    pure noise.
    """

    n_places: int
    n_refs: int = 1
    dim: int = 16
    speed_jitter: int = 0
    desync: int = 0
    noise_sigma: float = 0.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        if self.n_places < 4:
            raise ValueError(f"n_places must be >= 4, got {self.n_places}")
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        if self.n_refs < 1:
            raise ValueError(f"n_refs must be >= 1, got {self.n_refs}")
        if self.speed_jitter < 0 or self.desync < 0:
            raise ValueError("speed_jitter and desync must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError(f"dropout_prob must be in [0, 1], got {self.dropout_prob}")


def _make_places(rng, n_places, dim):
    raw = rng.normal(size=(n_places, dim))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    smooth = raw.copy()
    smooth[1:-1] = (raw[:-2] + raw[1:-1] + raw[2:]) / 3.0
    smooth[0] = (raw[0] + raw[1]) / 2.0
    smooth[-1] = (raw[-2] + raw[-1]) / 2.0
    return smooth / np.linalg.norm(smooth, axis=1, keepdims=True)


def _sample_track(rng, params: SynthParams):
    # lag relative to the canonical one-frame-per-place timeline stays
    # within desync, so true shifts are bounded by construction
    lag = int(rng.integers(0, params.desync + 1))
    track = [0] * lag
    for p in range(params.n_places):
        reps = 1 + int(rng.integers(0, params.speed_jitter + 1))
        reps = min(reps, 1 + params.desync - lag)
        track.extend([p] * reps)
        lag += reps - 1
    return np.array(track, dtype=np.int64)


def _observe(rng, places, track, params: SynthParams):
    dim = places.shape[1]
    frames = places[track] + params.noise_sigma * rng.normal(size=(track.size, dim))
    if params.dropout_prob > 0.0:
        start_p = params.dropout_prob / DROPOUT_BURST_FRAMES
        dropped = np.zeros(track.size, dtype=bool)
        for f in range(track.size):
            if rng.random() < start_p:
                dropped[f:f + DROPOUT_BURST_FRAMES] = True
        for f in np.flatnonzero(dropped):
            frames[f] = rng.normal(size=dim)
    return frames


def generate_synthetic(params: SynthParams, seed: int):
    """Build a sequence set with known correspondence.

    Returns (SequenceSet, frame-mode GroundTruth). Ground truth maps each
    test frame to the first frame of its place in every reference.
    Deterministic for a given (params, seed) pair.
    """
    rng = np.random.default_rng(seed)
    places = _make_places(rng, params.n_places, params.dim)

    test_track = _sample_track(rng, params)
    test = _observe(rng, places, test_track, params)
    ref_tracks = []
    refs = []
    for _ in range(params.n_refs):
        track = _sample_track(rng, params)
        ref_tracks.append(track)
        refs.append(_observe(rng, places, track, params))

    m = test_track.size
    ref_frames = np.zeros((params.n_refs, m), dtype=np.int64)
    for i, track in enumerate(ref_tracks):
        _, first = np.unique(track, return_index=True)
        ref_frames[i] = first[test_track]
    gt = GroundTruth(mode="frame", ref_frames=ref_frames)
    return SequenceSet(test, refs), gt

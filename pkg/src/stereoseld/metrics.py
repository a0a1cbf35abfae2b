"""Location-dependent detection metrics at 100 ms frame resolution.

Per class-frame, references and predictions are paired by the
minimum-total-angular-error assignment (exhaustive; at most three events per
side). A matched pair is a true positive when its angular error is within
20 degrees and its relative distance error within 1. F-scores are macro
averages over the classes that occur; DOAE, RDE and on/off accuracy pool
every matched pair without gating.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

from .errors import DataError
from .events import Event, FrameLabels

ANGLE_GATE_DEG = 20.0
REL_DIST_GATE = 1.0


def angular_error(ref: Event, pred: Event) -> float:
    # stereo: azimuth-only, plain absolute difference
    return abs(ref.azimuth - pred.azimuth)


def match_frame(refs: list[Event], preds: list[Event]):
    """Minimum-total-angular-error one-to-one pairing.

    Returns (pairs, missed_refs, false_preds) with pairs as (ref, pred)
    tuples; the smaller side is matched completely.
    """
    if not refs or not preds:
        return [], list(refs), list(preds)
    if len(refs) <= len(preds):
        small, large, ref_side = refs, preds, True
    else:
        small, large, ref_side = preds, refs, False
    best = None
    for perm in itertools.permutations(range(len(large)), len(small)):
        cost = sum(abs(small[i].azimuth - large[j].azimuth) for i, j in enumerate(perm))
        if best is None or cost < best[0]:
            best = (cost, perm)
    _, perm = best
    used = set(perm)
    pairs = [
        (small[i], large[j]) if ref_side else (large[j], small[i])
        for i, j in enumerate(perm)
    ]
    leftovers = [large[j] for j in range(len(large)) if j not in used]
    missed = [] if ref_side else leftovers
    false = leftovers if ref_side else []
    return pairs, missed, false


@dataclass
class ClassCounts:
    n_ref: int = 0
    n_pred: int = 0
    tp: int = 0
    n_ref_on: int = 0
    n_pred_on: int = 0
    tp_on: int = 0
    ang_errors: list = field(default_factory=list)
    rel_dist_errors: list = field(default_factory=list)
    flag_matches: list = field(default_factory=list)

    def f_score(self) -> float:
        denom = 2 * self.tp + (self.n_pred - self.tp) + (self.n_ref - self.tp)
        return 100.0 * 2 * self.tp / denom if denom else 0.0

    def f_score_on(self) -> float:
        denom = 2 * self.tp_on + (self.n_pred_on - self.tp_on) + (self.n_ref_on - self.tp_on)
        return 100.0 * 2 * self.tp_on / denom if denom else 0.0


@dataclass
class EvalReport:
    f_le20_1: float
    f_le20_1_on: float
    doae: float | None
    rde: float | None
    onoff_acc: float | None
    per_class: dict[int, dict] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "F_le20_1": self.f_le20_1,
            "F_le20_1_on": self.f_le20_1_on,
            "DOAE_deg": self.doae,
            "RDE_pct": self.rde,
            "OnOff_Acc_pct": self.onoff_acc,
            "per_class": self.per_class,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def _as_streams(x):
    return [x] if isinstance(x, FrameLabels) else list(x)


def evaluate(refs, preds, n_classes: int) -> EvalReport:
    """Score prediction streams against references. refs/preds may be single
    FrameLabels or parallel sequences of them."""
    ref_streams = _as_streams(refs)
    pred_streams = _as_streams(preds)
    if len(ref_streams) != len(pred_streams):
        raise DataError(f"{len(ref_streams)} reference streams vs {len(pred_streams)} predictions")
    counts = {c: ClassCounts() for c in range(n_classes)}
    for ref, pred in zip(ref_streams, pred_streams):
        if ref.n_frames is not None and pred.n_frames is not None and ref.n_frames != pred.n_frames:
            raise DataError(f"frame misalignment: {ref.n_frames} vs {pred.n_frames}")
        frames = sorted(set(ref.events) | set(pred.events))
        for frame in frames:
            ref_evs = ref.at(frame)
            pred_evs = pred.at(frame)
            for c in {e.class_id for e in ref_evs + pred_evs}:
                if not 0 <= c < n_classes:
                    raise DataError(f"class id {c} outside [0, {n_classes})")
                cc = counts[c]
                r = [e for e in ref_evs if e.class_id == c]
                p = [e for e in pred_evs if e.class_id == c]
                cc.n_ref += len(r)
                cc.n_pred += len(p)
                cc.n_ref_on += sum(e.onscreen for e in r)
                cc.n_pred_on += sum(e.onscreen for e in p)
                pairs, _, _ = match_frame(r, p)
                for ref_ev, pred_ev in pairs:
                    ang = angular_error(ref_ev, pred_ev)
                    rel = abs(pred_ev.distance - ref_ev.distance) / ref_ev.distance
                    cc.ang_errors.append(ang)
                    cc.rel_dist_errors.append(rel)
                    cc.flag_matches.append(ref_ev.onscreen == pred_ev.onscreen)
                    if ang <= ANGLE_GATE_DEG and rel <= REL_DIST_GATE:
                        cc.tp += 1
                        if ref_ev.onscreen and pred_ev.onscreen:
                            cc.tp_on += 1
    scored = {c: cc for c, cc in counts.items() if cc.n_ref or cc.n_pred}
    scored_on = {c: cc for c, cc in counts.items() if cc.n_ref_on or cc.n_pred_on}
    f = _mean([cc.f_score() for cc in scored.values()])
    f_on = _mean([cc.f_score_on() for cc in scored_on.values()])
    all_ang = [e for cc in counts.values() for e in cc.ang_errors]
    all_rel = [e for cc in counts.values() for e in cc.rel_dist_errors]
    all_flags = [m for cc in counts.values() for m in cc.flag_matches]
    per_class = {
        c: {
            "f": cc.f_score(),
            "f_on": cc.f_score_on(),
            "n_ref": cc.n_ref,
            "n_pred": cc.n_pred,
            "doae": _mean(cc.ang_errors, empty=None),
            "rde": None if not cc.rel_dist_errors else 100.0 * _mean(cc.rel_dist_errors),
        }
        for c, cc in scored.items()
    }
    return EvalReport(
        f_le20_1=f if f is not None else 0.0,
        f_le20_1_on=f_on if f_on is not None else 0.0,
        doae=_mean(all_ang, empty=None),
        rde=None if not all_rel else 100.0 * _mean(all_rel),
        onoff_acc=None if not all_flags else 100.0 * _mean([float(m) for m in all_flags]),
        per_class=per_class,
    )


def _mean(xs, empty=None):
    return sum(xs) / len(xs) if xs else empty


def format_table(report: EvalReport) -> str:
    """Fixed-width report mirroring the standard results-table column order."""

    def fmt(v, unit=""):
        return "-" if v is None else f"{v:.1f}{unit}"

    header = f"{'F1':>8} {'F1o':>8} {'DOAE':>8} {'RDE':>8} {'Acc':>8}"
    row = (
        f"{fmt(report.f_le20_1):>8} {fmt(report.f_le20_1_on):>8} "
        f"{fmt(report.doae):>8} {fmt(report.rde):>8} {fmt(report.onoff_acc):>8}"
    )
    return header + "\n" + row

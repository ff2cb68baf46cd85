"""Match ratio, attack success / detection rates, and per-stage runtime."""

from __future__ import annotations

import csv
import io
import statistics
from collections import defaultdict
from dataclasses import dataclass, field

from .alignment import AlignedDetection, Provenance, Region
from .detection import Decision, compatible, tally
from .errors import DataError
from .framelog import FrameLog, FrameVerdicts
from .geometry import ObjectClass
from .pipeline import STAGES, Pipeline
from .prediction import PredictedCellMap

REPORT_REGIONS = (Region.FrontNear, Region.FrontFar)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


# --- match ratio ------------------------------------------------------------

@dataclass
class MatchRatioReport:
    counts: dict[tuple[ObjectClass, Region], list[int]] = field(default_factory=dict)

    def add(self, cls: ObjectClass, region: Region, matched: int, total: int):
        entry = self.counts.setdefault((cls, region), [0, 0])
        entry[0] += matched
        entry[1] += total

    def matched(self, cls: ObjectClass, region: Region) -> int:
        return self.counts.get((cls, region), [0, 0])[0]

    def total(self, cls: ObjectClass, region: Region) -> int:
        return self.counts.get((cls, region), [0, 0])[1]

    def ratio(self, cls: ObjectClass, region: Region) -> float:
        return _ratio(self.matched(cls, region), self.total(cls, region))

    def to_record(self) -> dict:
        out = {}
        for (cls, region) in sorted(self.counts, key=lambda k: (k[0], k[1].value)):
            m, t = self.counts[(cls, region)]
            out.setdefault(cls.name, {})[region.value] = {
                "matched_cells": m, "total_bbox_cells": t, "ratio": _ratio(m, t),
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", *(r.value for r in REPORT_REGIONS)])
        for cls in sorted({c for c, _ in self.counts}):
            cells = []
            for region in REPORT_REGIONS:
                m, t = self.matched(cls, region), self.total(cls, region)
                cells.append(f"{m}/{t}({100 * _ratio(m, t):.2f}%)")
            w.writerow([cls.name, *cells])
        return buf.getvalue()


def match_ratio(
    aligned_frames: list[list[AlignedDetection]],
    maps: list[PredictedCellMap],
    others_is_wildcard: bool = False,
    include_injected: bool = False,
) -> MatchRatioReport:
    """Per (class, region) share of footprint cells whose predicted label matches.

    Injected detections are skipped unless ``include_injected``: the ratio
    measures agreement on genuine objects.
    """
    if len(aligned_frames) != len(maps):
        raise ValueError(f"{len(aligned_frames)} aligned frames but {len(maps)} maps")
    report = MatchRatioReport()
    for aligned, cell_map in zip(aligned_frames, maps):
        for a in aligned:
            det = a.detection
            if a.region not in REPORT_REGIONS:
                continue
            if det.provenance == Provenance.injected and not include_injected:
                continue
            counts = tally(a.footprint_cells, cell_map)
            matched = sum(
                int(counts[c]) for c in ObjectClass if compatible(det.object_class, c, others_is_wildcard)
            )
            report.add(det.object_class, a.region, matched, int(counts.sum()))
    return report


def match_ratio_from_verdicts(
    verdict_frames: list[FrameVerdicts],
    bookkeeping: AttackBookkeeping | None = None,
    others_is_wildcard: bool = False,
) -> MatchRatioReport:
    """Same accumulation as :func:`match_ratio`, from a serialized verdict file."""
    ghosts = bookkeeping.ghost_ids if bookkeeping else {}
    report = MatchRatioReport()
    for fv in verdict_frames:
        if fv.status != "checked":
            continue
        frame_ghosts = ghosts.get((fv.scene_id, fv.frame_index), set())
        for v, region in zip(fv.verdicts, fv.regions):
            if region not in REPORT_REGIONS or v.detection_id in frame_ghosts:
                continue
            matched = sum(
                n for c, n in v.class_counts.items() if compatible(v.detected_class, c, others_is_wildcard)
            )
            report.add(v.detected_class, region, matched, v.total_cells)
    return report


# --- attack evaluation ------------------------------------------------------

@dataclass(frozen=True)
class AttackEntry:
    scene_id: str
    frame_index: int
    target_class: ObjectClass
    succeeded: bool
    injected_ids: tuple[str, ...]


@dataclass
class AttackBookkeeping:
    """Injection attempts plus every ghost id present per frame."""

    entries: list[AttackEntry] = field(default_factory=list)
    ghost_ids: dict[tuple[str, int], set[str]] = field(default_factory=dict)

    @classmethod
    def from_log(cls, log: FrameLog) -> AttackBookkeeping:
        book = cls()
        for f in log.frames:
            ids = {d.detection_id for d in f.detections if d.provenance == Provenance.injected}
            a = f.attack
            if a is not None:
                ids |= set(a.injected_ids) | set(a.extra.get("continued_ids", []))
                if "attack_start" not in a.extra:
                    book.entries.append(
                        AttackEntry(f.scene_id, f.frame_index, a.target_class, a.succeeded, tuple(a.injected_ids))
                    )
            if ids:
                book.ghost_ids[(f.scene_id, f.frame_index)] = ids
        return book


@dataclass
class ClassAttackStats:
    injected: int = 0
    successfully_spoofed: int = 0
    identified: int = 0
    spoofed_unverifiable: int = 0
    genuine: int = 0
    genuine_benign: int = 0
    genuine_flagged: int = 0
    genuine_unverifiable: int = 0

    @property
    def asr(self) -> float:
        return _ratio(self.successfully_spoofed, self.injected)

    @property
    def dsr(self) -> float:
        return _ratio(self.identified, self.successfully_spoofed)

    @property
    def degenerate(self) -> bool:
        return self.successfully_spoofed == 0

    @property
    def recall_spoofed(self) -> float:
        return self.dsr

    @property
    def recall_benign(self) -> float:
        return _ratio(self.genuine_benign, self.genuine)

    @property
    def macro_recall(self) -> float:
        return 0.5 * (self.recall_spoofed + self.recall_benign)

    @property
    def precision_spoofed(self) -> float:
        return _ratio(self.identified, self.identified + self.genuine_flagged)

    @property
    def false_alarm_rate(self) -> float:
        return _ratio(self.genuine_flagged, self.genuine)

    def to_record(self) -> dict:
        return {
            "injected": self.injected,
            "successfully_spoofed": self.successfully_spoofed,
            "asr": self.asr,
            "identified": self.identified,
            "dsr": self.dsr,
            "dsr_degenerate": self.degenerate,
            "spoofed_unverifiable": self.spoofed_unverifiable,
            "genuine": self.genuine,
            "genuine_benign": self.genuine_benign,
            "genuine_flagged": self.genuine_flagged,
            "genuine_unverifiable": self.genuine_unverifiable,
            "recall_spoofed": self.recall_spoofed,
            "recall_benign": self.recall_benign,
            "macro_recall": self.macro_recall,
            "precision_spoofed": self.precision_spoofed,
            "false_alarm_rate": self.false_alarm_rate,
        }


@dataclass
class AttackEvalReport:
    per_class: dict[ObjectClass, ClassAttackStats] = field(default_factory=dict)

    def __getitem__(self, cls: ObjectClass) -> ClassAttackStats:
        return self.per_class.setdefault(cls, ClassAttackStats())

    def to_record(self) -> dict:
        return {c.name: self.per_class[c].to_record() for c in sorted(self.per_class)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "ASR", "DSR", "recall_spoofed", "recall_benign", "macro_recall",
                    "precision_spoofed", "false_alarm_rate"])
        for c in sorted(self.per_class):
            s = self.per_class[c]
            w.writerow([
                c.name,
                f"{s.successfully_spoofed}/{s.injected}({100 * s.asr:.2f}%)",
                f"{s.identified}/{s.successfully_spoofed}({100 * s.dsr:.2f}%)",
                f"{s.recall_spoofed:.4f}", f"{s.recall_benign:.4f}", f"{s.macro_recall:.4f}",
                f"{s.precision_spoofed:.4f}", f"{s.false_alarm_rate:.4f}",
            ])
        return buf.getvalue()


def attack_eval(verdict_frames: list[FrameVerdicts], bookkeeping: AttackBookkeeping) -> AttackEvalReport:
    """Aggregate verdicts into per-class ASR / DSR / recall.

    Ghosts are the positive class. DSR only counts successful spoofs, and
    unverifiable verdicts never land in a numerator.
    """
    index = {(fv.scene_id, fv.frame_index): fv for fv in verdict_frames}
    report = AttackEvalReport()
    for e in bookkeeping.entries:
        fv = index.get((e.scene_id, e.frame_index))
        if fv is None:
            raise DataError(f"attack on {e.scene_id} frame {e.frame_index} has no verdict record")
        stats = report[e.target_class]
        stats.injected += 1
        if not e.succeeded:
            continue
        stats.successfully_spoofed += 1
        decisions = {v.detection_id: v.decision for v in fv.verdicts}
        for gid in e.injected_ids:
            if gid not in decisions:
                raise DataError(f"injected detection {gid} missing from verdicts of "
                                f"{e.scene_id} frame {e.frame_index}")
        outcome = [decisions[g] for g in e.injected_ids]
        if outcome and all(d == Decision.Spoofed for d in outcome):
            stats.identified += 1
        elif any(d == Decision.Unverifiable for d in outcome):
            stats.spoofed_unverifiable += 1

    for fv in verdict_frames:
        ghosts = bookkeeping.ghost_ids.get((fv.scene_id, fv.frame_index), set())
        for v in fv.verdicts:
            if v.detection_id in ghosts:
                continue
            stats = report[v.detected_class]
            stats.genuine += 1
            if v.decision == Decision.Benign:
                stats.genuine_benign += 1
            elif v.decision == Decision.Spoofed:
                stats.genuine_flagged += 1
            else:
                stats.genuine_unverifiable += 1
    return report


# --- runtime ----------------------------------------------------------------

@dataclass
class RuntimeReport:
    mean: dict[str, float]
    std: dict[str, float]
    frames: int
    repetitions: int

    @property
    def fps(self) -> float:
        return 1.0 / self.mean["total"] if self.mean["total"] > 0 else float("inf")

    def to_record(self) -> dict:
        return {
            "stages": {s: {"mean_s": self.mean[s], "std_s": self.std[s]} for s in STAGES},
            "frames_per_second": self.fps,
            "frames_measured": self.frames,
            "repetitions": self.repetitions,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "mean_s", "std_s"])
        for s in STAGES:
            w.writerow([s, f"{self.mean[s]:.6g}", f"{self.std[s]:.6g}"])
        w.writerow(["frames_per_second", f"{self.fps:.2f}", ""])
        return buf.getvalue()


def benchmark(pipeline: Pipeline, log: FrameLog, repetitions: int = 50, warmup: int = 3) -> RuntimeReport:
    """Time every checked key frame over ``repetitions`` passes of ``log``.

    The first ``warmup`` passes are discarded.
    """
    if repetitions < 10:
        raise ValueError("benchmark needs at least 10 repetitions")
    if not log.key_frames:
        raise DataError("log has no key frames to benchmark")
    scenes = [frames for _, frames in log.scenes()]
    samples: dict[str, list[float]] = defaultdict(list)
    for rep in range(warmup + repetitions):
        timings: list[dict] = []
        for frames in scenes:
            pipeline.check_scene(frames, timings)
        if rep < warmup:
            continue
        for t in timings:
            for stage in STAGES:
                samples[stage].append(t[stage])
    if not samples:
        raise DataError("no key frame had enough history to be checked")
    return RuntimeReport(
        mean={s: statistics.fmean(samples[s]) for s in STAGES},
        std={s: statistics.pstdev(samples[s]) for s in STAGES},
        frames=len(samples["total"]),
        repetitions=repetitions,
    )


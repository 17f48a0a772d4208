"""Frame-to-frame correspondence, track lifecycle and trajectory analytics.

Previous objects and current detections form a bipartite graph whose edges
join centroids closer than ``lambda``. :func:`resolve` walks that graph each
frame:

1. Occlusion groups (tracks hidden inside one merged blob) either keep
   following a single blob or, once they touch two or more blobs, split: the
   members are handed out greedily by ascending histogram distance between
   their frozen pre-merge references and each emerging blob.
2. Active tracks whose nearest candidate is the same blob, and whose last
   boxes overlap it, merge into a new occlusion group.
3. Everything else is paired one-to-one greedily by ascending centroid
   distance, ties to the lower track id.
4. Leftover detections start tracks; leftover tracks accumulate misses and
   are dropped once they exceed ``max_missed``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .regions import BoundingBox, RegionFeatures, l1_distance


class GraphMismatch(ValueError):
    pass


class InsufficientHistory(ValueError):
    pass


class TrackState(enum.Enum):
    ACTIVE = "Active"
    OCCLUDED = "Occluded"
    LOST = "Lost"


@dataclass(frozen=True)
class MatchGraph:
    m: int
    n: int
    edges: frozenset
    distances: dict = field(default_factory=dict, compare=False, repr=False)

    def track_edges(self, p: int) -> list[int]:
        return sorted(i for (q, i) in self.edges if q == p)

    def detection_edges(self, i: int) -> list[int]:
        return sorted(p for (p, j) in self.edges if j == i)


@dataclass
class Track:
    id: int
    features: RegionFeatures
    ref_hist_upper: np.ndarray
    ref_hist_lower: np.ndarray
    position: tuple[float, float]
    state: TrackState = TrackState.ACTIVE
    trajectory: list = field(default_factory=list)
    missed_frames: int = 0
    group: int | None = None
    last_seen: int = -1
    model: object = None  # mean-shift target model when refinement is on

    @property
    def bbox(self) -> BoundingBox:
        return self.features.bbox

    def observe(self, det: RegionFeatures, frame_index: int) -> None:
        """Unoccluded sighting: take the detection wholesale."""
        self.features = det
        self.position = det.centroid
        self.trajectory.append((frame_index, det.centroid))
        self.ref_hist_upper, self.ref_hist_lower = _reference_pair(det)
        self.state = TrackState.ACTIVE
        self.group = None
        self.missed_frames = 0
        self.last_seen = frame_index


def _reference_pair(det: RegionFeatures):
    # an empty half (one-row blobs) borrows the other half so references stay unit-sum
    upper, lower = det.hist_upper, det.hist_lower
    if upper.sum() == 0:
        upper = lower
    if lower.sum() == 0:
        lower = upper
    return upper.copy(), lower.copy()


@dataclass
class AssociationReport:
    frame: int
    matches: list = field(default_factory=list)  # (track id, detection index)
    births: list = field(default_factory=list)
    deaths: list = field(default_factory=list)
    merges: list = field(default_factory=list)  # {"tracks": [...], "detection": i}
    splits: list = field(default_factory=list)  # {"tracks": [...], "detections": [...]}
    groups: list = field(default_factory=list)  # live occlusion groups after this frame


class TrackSet:
    def __init__(self, max_missed: int = 5):
        self.tracks: list[Track] = []
        self.next_id = 1
        self.max_missed = max_missed
        self._next_group = 1

    def __len__(self):
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    def get(self, track_id: int) -> Track:
        for t in self.tracks:
            if t.id == track_id:
                return t
        raise KeyError(track_id)

    def centroids(self) -> list[tuple[float, float]]:
        return [t.position for t in self.tracks]

    def spawn(self, det: RegionFeatures, frame_index: int) -> Track:
        upper, lower = _reference_pair(det)
        track = Track(self.next_id, det, upper, lower, det.centroid,
                      trajectory=[(frame_index, det.centroid)], last_seen=frame_index)
        self.next_id += 1
        self.tracks.append(track)
        return track

    def new_group(self) -> int:
        g = self._next_group
        self._next_group += 1
        return g


def gate_distance(cp, ci) -> float:
    return math.hypot(cp[0] - ci[0], cp[1] - ci[1])


def build_graph(prev, curr, lam: float) -> MatchGraph:
    """Edges (p, i) for every previous centroid strictly within ``lam`` of detection i."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    edges = set()
    dist = {}
    for p, cp in enumerate(prev):
        for i, det in enumerate(curr):
            d = gate_distance(cp, det.centroid)
            if d < lam:
                edges.add((p, i))
                dist[(p, i)] = d
    return MatchGraph(len(prev), len(curr), frozenset(edges), dist)


def resolve(graph: MatchGraph, tracks: TrackSet, detections: list[RegionFeatures], frame_index: int) -> AssociationReport:
    if graph.m != len(tracks.tracks) or graph.n != len(detections):
        raise GraphMismatch(
            f"graph is {graph.m}x{graph.n}, inputs are {len(tracks.tracks)}x{len(detections)}"
        )
    report = AssociationReport(frame_index)
    members = list(tracks.tracks)

    def dist(p, i):
        d = graph.distances.get((p, i))
        return d if d is not None else gate_distance(members[p].position, detections[i].centroid)

    claimed: set[int] = set()
    group_blob: dict[int, int] = {}  # group id -> detection it now occupies
    done: set[int] = set()  # track positions handled this frame

    # 1. occlusion groups: persist on one blob or split across several
    groups: dict[int, list[int]] = {}
    for p, t in enumerate(members):
        if t.state is TrackState.OCCLUDED:
            groups.setdefault(t.group, []).append(p)
    for gid in sorted(groups):
        ps = groups[gid]
        cands = sorted({i for p in ps for i in graph.track_edges(p)} - claimed)
        if len(cands) == 1:
            i = cands[0]
            claimed.add(i)
            group_blob[gid] = i
            for p in ps:
                _follow_blob(members[p], detections[i], frame_index)
                done.add(p)
        elif len(cands) >= 2:
            pairs = sorted(
                (_ref_distance(members[p], detections[i]), members[p].id, i, p)
                for p in ps for i in cands
            )
            used_t, used_d = set(), set()
            for _, tid, i, p in pairs:
                if p in used_t or i in used_d:
                    continue
                used_t.add(p)
                used_d.add(i)
                members[p].observe(detections[i], frame_index)
                report.matches.append((tid, i))
                done.add(p)
            claimed |= used_d
            report.splits.append({
                "tracks": sorted(members[p].id for p in used_t),
                "detections": sorted(used_d),
            })

    # 2. merges: active tracks converging on the same blob
    nearest: dict[int, int] = {}
    for p, t in enumerate(members):
        if p in done or t.state is not TrackState.ACTIVE:
            continue
        edges = graph.track_edges(p)
        if edges:
            nearest[p] = min(edges, key=lambda i: (dist(p, i), i))
    suitors: dict[int, list[int]] = {}
    for p, i in nearest.items():
        if members[p].bbox.intersects(detections[i].bbox):
            suitors.setdefault(i, []).append(p)
    for i in sorted(suitors):
        ps = suitors[i]
        joining = None
        for gid, blob in group_blob.items():
            if blob == i:
                joining = gid
        if joining is not None:
            for p in ps:
                _occlude(members[p], detections[i], joining, frame_index)
                done.add(p)
            report.merges.append({"tracks": sorted(members[p].id for p in ps), "detection": i})
        elif len(ps) >= 2 and i not in claimed:
            gid = tracks.new_group()
            group_blob[gid] = i
            claimed.add(i)
            for p in ps:
                _occlude(members[p], detections[i], gid, frame_index)
                done.add(p)
            report.merges.append({"tracks": sorted(members[p].id for p in ps), "detection": i})

    # 3. one-to-one by ascending gate distance, ties to the lower track id
    pairs = sorted(
        (dist(p, i), members[p].id, i, p)
        for (p, i) in graph.edges
        if p not in done and i not in claimed
    )
    for _, tid, i, p in pairs:
        if p in done or i in claimed:
            continue
        members[p].observe(detections[i], frame_index)
        report.matches.append((tid, i))
        done.add(p)
        claimed.add(i)

    # 4. births and misses
    for i, det in enumerate(detections):
        if i not in claimed:
            report.births.append(tracks.spawn(det, frame_index).id)
    survivors = []
    for p, t in enumerate(members):
        if p not in done:
            t.missed_frames += 1
            if t.missed_frames > tracks.max_missed:
                t.state = TrackState.LOST
                report.deaths.append(t.id)
                continue
        survivors.append(t)
    survivors.extend(tracks.tracks[len(members):])
    tracks.tracks = survivors
    _dissolve_singleton_groups(tracks)

    live = {}
    for t in tracks.tracks:
        if t.state is TrackState.OCCLUDED:
            live.setdefault(t.group, []).append(t.id)
    report.groups = [
        {"group": gid, "tracks": sorted(ids), "detection": group_blob.get(gid)}
        for gid, ids in sorted(live.items())
    ]
    report.matches.sort()
    return report


def _ref_distance(track: Track, det: RegionFeatures) -> float:
    # d_total against the frozen references rather than the track's latest blob
    return l1_distance(track.ref_hist_upper, det.hist_upper) + l1_distance(track.ref_hist_lower, det.hist_lower)


def _follow_blob(track: Track, det: RegionFeatures, frame_index: int) -> None:
    # references stay frozen at their pre-merge values
    track.features = det
    track.position = det.centroid
    track.missed_frames = 0
    track.last_seen = frame_index


def _occlude(track: Track, det: RegionFeatures, gid: int, frame_index: int) -> None:
    track.state = TrackState.OCCLUDED
    track.group = gid
    _follow_blob(track, det, frame_index)


def _dissolve_singleton_groups(tracks: TrackSet) -> None:
    # a group whose partners all died is just a track again; it keeps its references
    counts: dict[int, int] = {}
    for t in tracks.tracks:
        if t.state is TrackState.OCCLUDED:
            counts[t.group] = counts.get(t.group, 0) + 1
    for t in tracks.tracks:
        if t.state is TrackState.OCCLUDED and counts[t.group] == 1:
            t.state = TrackState.ACTIVE
            t.group = None


def speed_and_direction(track: Track, window: int = 5) -> tuple[float, float]:
    """Mean speed (px/frame) and heading over the last ``window`` frames.

    Heading is measured counter-clockwise from +x with image y pointing
    down, so 90 degrees is "up" on screen.
    """
    traj = track.trajectory
    if len(traj) < 2:
        raise InsufficientHistory("need at least two trajectory points")
    f1, (x1, y1) = traj[-1]
    f0, (x0, y0) = traj[max(0, len(traj) - 1 - window)]
    gap = f1 - f0
    dx, dy = x1 - x0, y1 - y0
    speed = math.hypot(dx, dy) / gap
    direction = math.degrees(math.atan2(-dy, dx)) % 360.0
    if direction >= 360.0:
        direction = 0.0
    return speed, direction

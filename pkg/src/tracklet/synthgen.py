"""Deterministic synthetic scenes with analytic ground truth.

Object positions are the top-left corner of the object's bounding box;
keyframes are linearly interpolated and rounded half-up to whole pixels.
A rectangle of size (w, h) at (x0, y0) covers columns x0..x0+w-1 and rows
y0..y0+h-1, so its centroid is (x0 + (w-1)/2, y0 + (h-1)/2). Ellipses are
inscribed in the same box, symmetric about that centre.

Noise: for frame n the generator is ``numpy.random.Generator(PCG64(seed ^ n))``
and the noise field is ``noise_sigma * standard_normal((H, W, 3))`` added in
float64 after compositing, then rounded half-to-even and clipped to [0, 255].
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame_io import Frame, read_frame, write_frame


class ObjectOutOfBounds(ValueError):
    pass


class ScriptError(ValueError):
    pass


@dataclass
class SceneObject:
    id: int
    shape: str  # "rectangle" | "ellipse"
    size: tuple[int, int]  # (w, h)
    color: tuple[int, int, int]
    keyframes: list  # [(frame, (x, y)), ...]

    def position(self, n: int) -> tuple[int, int]:
        x, y = self.exact_position(n)
        return math.floor(x + 0.5), math.floor(y + 0.5)

    def exact_position(self, n: int) -> tuple[float, float]:
        keys = sorted(self.keyframes)
        if n <= keys[0][0]:
            return tuple(map(float, keys[0][1]))
        for (f0, p0), (f1, p1) in zip(keys, keys[1:]):
            if f0 <= n <= f1:
                t = (n - f0) / (f1 - f0)
                return p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])
        return tuple(map(float, keys[-1][1]))

    def footprint(self) -> np.ndarray:
        """Boolean (h, w) coverage of the shape inside its box."""
        w, h = self.size
        if self.shape == "rectangle":
            return np.ones((h, w), dtype=bool)
        ys, xs = np.mgrid[0:h, 0:w]
        cx, cy = (w - 1) / 2, (h - 1) / 2
        return ((xs - cx) / (w / 2)) ** 2 + ((ys - cy) / (h / 2)) ** 2 <= 1.0


@dataclass
class SceneScript:
    width: int
    height: int
    frame_count: int
    background: object = (0, 0, 0)  # RGB triple or an (H, W, 3) uint8 array
    noise_sigma: float = 0.0
    seed: int = 0
    objects: list = field(default_factory=list)


@dataclass
class TruthObject:
    id: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    visible: bool
    occluding_group: tuple | None

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "centroid": list(self.centroid),
            "bbox": list(self.bbox),
            "visible": self.visible,
            "occluding_group": list(self.occluding_group) if self.occluding_group else None,
        }


GroundTruth = list  # one list of TruthObject per frame


def _background(script: SceneScript) -> np.ndarray:
    bg = np.asarray(script.background)
    if bg.ndim == 1:
        return np.broadcast_to(bg.astype(np.float64), (script.height, script.width, 3)).copy()
    if bg.shape != (script.height, script.width, 3):
        raise ScriptError(f"background image is {bg.shape}, scene is {(script.height, script.width, 3)}")
    return bg.astype(np.float64)


def _truth_box(obj: SceneObject, n: int):
    x0, y0 = obj.position(n)
    fp = obj.footprint()
    rows = np.nonzero(fp.any(axis=1))[0]
    cols = np.nonzero(fp.any(axis=0))[0]
    w, h = obj.size
    centroid = (x0 + (w - 1) / 2, y0 + (h - 1) / 2)
    bbox = (x0 + int(cols[0]), y0 + int(rows[0]), x0 + int(cols[-1]), y0 + int(rows[-1]))
    return centroid, bbox


def _overlap(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def validate(script: SceneScript) -> None:
    ids = [o.id for o in script.objects]
    if len(set(ids)) != len(ids):
        raise ScriptError("object ids must be unique")
    for obj in script.objects:
        if obj.shape not in ("rectangle", "ellipse"):
            raise ScriptError(f"unknown shape {obj.shape!r}")
        if not obj.keyframes:
            raise ScriptError(f"object {obj.id} has no keyframes")
        w, h = obj.size
        for n in range(script.frame_count):
            x0, y0 = obj.position(n)
            if x0 < 0 or y0 < 0 or x0 + w > script.width or y0 + h > script.height:
                raise ObjectOutOfBounds(f"object {obj.id} leaves the frame at frame {n}")


def ground_truth(script: SceneScript) -> GroundTruth:
    truth = []
    for n in range(script.frame_count):
        boxes = {o.id: _truth_box(o, n) for o in script.objects}
        # overlap groups: connected components of the box-overlap relation
        parent = {i: i for i in boxes}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        ids = list(boxes)
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                if _overlap(boxes[ids[a]][1], boxes[ids[b]][1]):
                    parent[find(ids[a])] = find(ids[b])
        members = {}
        for i in ids:
            members.setdefault(find(i), []).append(i)

        cover = np.zeros((script.height, script.width), dtype=np.int64)
        for k, obj in enumerate(script.objects, start=1):
            x0, y0 = obj.position(n)
            w, h = obj.size
            cover[y0:y0 + h, x0:x0 + w][obj.footprint()] = k
        seen = set(np.unique(cover).tolist())

        row = []
        for k, obj in enumerate(script.objects, start=1):
            centroid, bbox = boxes[obj.id]
            group = sorted(members[find(obj.id)])
            row.append(TruthObject(obj.id, centroid, bbox, k in seen,
                                   tuple(group) if len(group) > 1 else None))
        truth.append(row)
    return truth


def render_frame(script: SceneScript, n: int) -> Frame:
    img = _background(script)
    for obj in script.objects:
        x0, y0 = obj.position(n)
        w, h = obj.size
        region = img[y0:y0 + h, x0:x0 + w]
        region[obj.footprint()] = obj.color
    if script.noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(script.seed ^ n))
        img = img + script.noise_sigma * rng.standard_normal(img.shape)
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8), n)


def render(script: SceneScript) -> tuple[list[Frame], GroundTruth]:
    validate(script)
    frames = [render_frame(script, n) for n in range(script.frame_count)]
    return frames, ground_truth(script)


def occlusion_intervals(truth: GroundTruth) -> list[tuple[int, int]]:
    """Inclusive frame ranges during which any objects' boxes overlap."""
    flags = [any(o.occluding_group for o in row) for row in truth]
    spans, start = [], None
    for n, f in enumerate(flags):
        if f and start is None:
            start = n
        if not f and start is not None:
            spans.append((start, n - 1))
            start = None
    if start is not None:
        spans.append((start, len(flags) - 1))
    return spans


def crossing_script(
    color_a=(220, 40, 40),
    color_b=(40, 200, 60),
    speed_a: float = 2.5,
    speed_b: float = 2.5,
    size=(10, 14),
    frame_count: int = 80,
    height: int = 40,
    background=(30, 30, 30),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> SceneScript:
    """Two rectangles on one row moving toward each other, fully overlapping at frame_count // 2.

    A starts on the left moving right, B on the right moving left. The frame
    is just wide enough for both to stay inside for the whole sequence.
    """
    if tuple(color_a) == tuple(color_b):
        raise ScriptError("crossing objects need distinct colours")
    w, h = size
    mid = frame_count // 2
    last = frame_count - 1
    vmax = max(speed_a, speed_b)
    margin = 2
    meet = margin + vmax * mid
    width = math.ceil(meet + vmax * mid + w + margin)
    y = (height - h) // 2
    a = SceneObject(1, "rectangle", (w, h), tuple(color_a), [
        (0, (meet - speed_a * mid, y)), (last, (meet + speed_a * (last - mid), y)),
    ])
    b = SceneObject(2, "rectangle", (w, h), tuple(color_b), [
        (0, (meet + speed_b * mid, y)), (last, (meet - speed_b * (last - mid), y)),
    ])
    return SceneScript(width, height, frame_count, tuple(background), noise_sigma, seed, [a, b])


# --- plain-text script files -------------------------------------------------
#
#   [scene]
#   width = 64
#   height = 64
#   frame_count = 100
#   background = 30,30,30          (or: background = image:bg.ppm)
#   noise_sigma = 0
#   seed = 1
#
#   [object 1]
#   shape = rectangle
#   size = 10,10
#   color = 220,40,40
#   path = 0:5,5; 99:50,40

def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def parse_script(text: str, base_dir=".") -> SceneScript:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScriptError(str(exc)) from exc
    if "scene" not in cp:
        raise ScriptError("missing [scene] section")
    sc = cp["scene"]
    try:
        bg_text = sc.get("background", "0,0,0").strip()
        if bg_text.startswith("image:"):
            background = read_frame(Path(base_dir) / bg_text[len("image:"):]).data
            if background.ndim == 2:
                background = np.repeat(background[:, :, None], 3, axis=2)
        else:
            background = _ints(bg_text)
        script = SceneScript(
            width=sc.getint("width"),
            height=sc.getint("height"),
            frame_count=sc.getint("frame_count"),
            background=background,
            noise_sigma=sc.getfloat("noise_sigma", 0.0),
            seed=sc.getint("seed", 0),
        )
        for name in cp.sections():
            if not name.startswith("object"):
                continue
            sec = cp[name]
            keyframes = []
            for item in sec["path"].split(";"):
                frame_text, pos_text = item.strip().split(":")
                keyframes.append((int(frame_text), _floats(pos_text)))
            script.objects.append(SceneObject(
                id=int(name.split()[1]),
                shape=sec.get("shape", "rectangle").strip(),
                size=_ints(sec["size"]),
                color=_ints(sec["color"]),
                keyframes=keyframes,
            ))
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise ScriptError(f"bad scene script: {exc}") from exc
    return script


def format_script(script: SceneScript) -> str:
    bg = np.asarray(script.background)
    if bg.ndim != 1:
        raise ScriptError("only constant backgrounds can be serialised inline")
    lines = [
        "[scene]",
        f"width = {script.width}",
        f"height = {script.height}",
        f"frame_count = {script.frame_count}",
        "background = " + ",".join(str(int(v)) for v in bg),
        f"noise_sigma = {script.noise_sigma!r}",
        f"seed = {script.seed}",
    ]
    for obj in script.objects:
        path = "; ".join(f"{f}:{x!r},{y!r}" for f, (x, y) in obj.keyframes)
        lines += [
            "",
            f"[object {obj.id}]",
            f"shape = {obj.shape}",
            f"size = {obj.size[0]},{obj.size[1]}",
            "color = " + ",".join(str(int(c)) for c in obj.color),
            f"path = {path}",
        ]
    return "\n".join(lines) + "\n"


def write_sequence(script: SceneScript, out_dir) -> GroundTruth:
    """Render to ``frame_%06d.ppm`` files plus ``truth.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, truth = render(script)
    for frame in frames:
        write_frame(frame, out / f"frame_{frame.index:06d}.ppm")
    with open(out / "truth.jsonl", "w") as fh:
        for n, row in enumerate(truth):
            fh.write(json.dumps({"frame": n, "objects": [o.as_dict() for o in row]}) + "\n")
    return truth

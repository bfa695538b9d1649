#!/usr/bin/env python3
"""Regenerate data/fixture: a small synthetic thermal/visible workspace.

Six thermal frames (640x512) with IDD-style labels, five of them paired with
visible frames (1280x1024) through known homographies. Correspondences are
exact except for pair p04 (sigma 0.5 px). Detection files are built from the
projected boxes of the night pairs with jitter, misses and false positives.

    python3 tools/make_fixture.py [out_dir]
"""

import json
import random
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

THERMAL = (640, 512)
VISIBLE = (1280, 1024)
LABELS = ["Person", "Rider", "Car", "Autorickshaw", "Bicycle", "Motorcycle", "Animal", "Bus", "Truck"]
FLIR_IDS = {"Person": 1, "Bicycle": 2, "Car": 3, "Dog": 18}
TO_FLIR = {"Person": "Person", "Rider": "Person", "Car": "Car", "Autorickshaw": "Car", "Bicycle": "Bicycle",
           "Motorcycle": "Bicycle", "Animal": "Dog"}
NIGHT_PAIRS = {"p01", "p03", "p05"}


def similarity(scale, degrees, tx, ty):
    a = np.deg2rad(degrees)
    return np.array([[scale * np.cos(a), -scale * np.sin(a), tx],
                     [scale * np.sin(a), scale * np.cos(a), ty],
                     [0.0, 0.0, 1.0]])


PAIRS = [
    ("p01", similarity(2.0, 0.0, -120.0, -90.0)),
    ("p02", similarity(1.95, 1.0, 20.0, 10.0)),
    ("p03", similarity(2.0, -0.5, 0.0, 0.0) @ np.array([[1, 0, 0], [0, 1, 0], [1.5e-4, -1e-4, 1.0]])),
    ("p04", similarity(2.02, 0.3, -10.0, 25.0)),
    ("p05", similarity(2.0, 0.0, 400.0, -200.0)),
]


def project(h, x, y):
    v = h @ np.array([x, y, 1.0])
    return v[0] / v[2], v[1] / v[2]


def envelope(h, box):
    x, y, w, hh = box
    pts = [project(h, cx, cy) for cx, cy in ((x, y), (x + w, y), (x + w, y + hh), (x, y + hh))]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    return min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)


def clip(box, width, height):
    x0, y0 = max(box[0], 0.0), max(box[1], 0.0)
    x1, y1 = min(box[0] + box[2], width), min(box[1] + box[3], height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1 - x0, y1 - y0


def r2(v):
    return round(v, 2)


def png(path, size, seed):
    rng = random.Random(seed)
    img = Image.new("L", size, 20)
    draw = ImageDraw.Draw(img)
    for _ in range(6):
        x, y = rng.randrange(size[0]), rng.randrange(size[1])
        draw.ellipse([x, y, x + size[0] // 6, y + size[1] // 6], fill=rng.randrange(80, 255))
    img.save(path, optimize=True)


def dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def main(out):
    rng = random.Random(2019)
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("images", "correspondences", "detections"):
        (out / sub).mkdir(exist_ok=True)

    categories = [{"id": i + 1, "name": n, "supercategory": "idd"} for i, n in enumerate(LABELS)]
    cat_id = {c["name"]: c["id"] for c in categories}
    images, annotations = [], []
    ann_id = 1
    for i in range(1, 7):
        name = f"thermal_{i:04d}.png"
        images.append({"id": i, "file_name": name, "width": THERMAL[0], "height": THERMAL[1]})
        png(out / "images" / name, (64, 51), i)
        for _ in range(rng.randrange(5, 9)):
            w, h = r2(rng.uniform(8, 90)), r2(rng.uniform(8, 70))
            x, y = r2(rng.uniform(0, THERMAL[0] - 10)), r2(rng.uniform(0, THERMAL[1] - 10))
            w, h = r2(min(w, THERMAL[0] - x)), r2(min(h, THERMAL[1] - y))
            label = rng.choice(LABELS)
            annotations.append({"id": ann_id, "image_id": i, "category_id": cat_id[label], "bbox": [x, y, w, h],
                                "area": r2(w * h), "iscrowd": 0})
            ann_id += 1
    dump(out / "annotations.json", {"info": {"description": "synthetic thermal fixture"},
                                    "categories": categories, "images": images, "annotations": annotations})

    pairs, manifest = [], ["image,phase"]
    for k, (pid, h) in enumerate(PAIRS, start=1):
        thermal, visible = f"thermal_{k:04d}.png", f"visible_{k:04d}.png"
        pairs.append({"pair_id": pid, "source_image": thermal, "target_image": visible,
                      "target_width": VISIBLE[0], "target_height": VISIBLE[1]})
        png(out / "images" / visible, (128, 102), 100 + k)
        manifest.append(f"{visible},{'night' if pid in NIGHT_PAIRS else 'day'}")

        points = []
        grid = [(60, 50), (580, 45), (600, 470), (40, 460), (320, 250), (180, 130), (470, 360), (250, 400)]
        for sx, sy in grid:
            sx, sy = sx + rng.uniform(-15, 15), sy + rng.uniform(-15, 15)
            tx, ty = project(h, sx, sy)
            if pid == "p04":
                tx, ty = tx + rng.gauss(0, 0.5), ty + rng.gauss(0, 0.5)
            points.append({"sx": round(sx, 3), "sy": round(sy, 3), "tx": round(tx, 3), "ty": round(ty, 3)})
        dump(out / "correspondences" / f"{pid}.json",
             {"pair_id": pid, "source_image": thermal, "target_image": visible, "points": points})
    dump(out / "pairs.json", pairs)
    (out / "manifest.csv").write_text("\n".join(manifest) + "\n")

    # detections against the remapped night split: image id = pair index + 1
    for tag, hit_rate, jitter, fps in (("thm", 0.7, 6.0, 4), ("mix", 0.9, 3.0, 2)):
        drng = random.Random(tag)
        dets = []
        for k, (pid, h) in enumerate(PAIRS, start=1):
            if pid not in NIGHT_PAIRS:
                continue
            for a in annotations:
                label = LABELS[a["category_id"] - 1]
                if a["image_id"] != k or label not in TO_FLIR:
                    continue
                box = clip(envelope(h, a["bbox"]), *VISIBLE)
                if box is None or drng.random() > hit_rate:
                    continue
                x, y, w, hh = box
                dets.append({"image_id": k, "category_id": FLIR_IDS[TO_FLIR[label]],
                             "bbox": [r2(x + drng.uniform(-jitter, jitter)), r2(y + drng.uniform(-jitter, jitter)),
                                      r2(max(2.0, w + drng.uniform(-jitter, jitter))),
                                      r2(max(2.0, hh + drng.uniform(-jitter, jitter)))],
                             "score": round(drng.uniform(0.3, 1.0), 3)})
            for _ in range(fps):
                dets.append({"image_id": k, "category_id": drng.choice(list(FLIR_IDS.values())),
                             "bbox": [r2(drng.uniform(0, 1100)), r2(drng.uniform(0, 900)),
                                      r2(drng.uniform(20, 150)), r2(drng.uniform(20, 150))],
                             "score": round(drng.uniform(0.05, 0.6), 3)})
        dump(out / "detections" / f"{tag}.json", dets)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "fixture")

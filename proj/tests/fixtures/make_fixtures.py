"""Regenerates the synthetic embedding fixtures in this directory."""
import json
import pathlib

import numpy as np
from PIL import Image

HERE = pathlib.Path(__file__).parent


def record(i, img, txt, label, text=None):
    r = {"id": f"sample-{i:03d}", "label": label, "dim": len(img),
         "e_img": [round(float(v), 6) for v in img], "e_txt": [round(float(v), 6) for v in txt]}
    if text is not None:
        r["text"] = text
    return r


def write(name, records):
    with open(HERE / name, "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def clusters(n, d, seed, spread):
    rng = np.random.default_rng(seed)
    mu = rng.normal(size=(2, 2, d))
    out = []
    for i in range(n):
        c = i % 2
        out.append(record(i, mu[c, 0] + spread * rng.normal(size=d), mu[c, 1] + spread * rng.normal(size=d), c,
                          "harmful caption" if c else "benign caption"))
    return out


def carrier(size=256, seed=11):
    """Smooth multi-scale texture plus mild noise; stands in for a photograph."""
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size, 3))
    for cells in (4, 8, 16, 32, 64):
        grid = rng.uniform(-1, 1, size=(cells + 1, cells + 1, 3))
        up = np.array(Image.fromarray(((grid + 1) * 127.5).astype(np.uint8)).resize((size, size), Image.BICUBIC))
        img += (up.astype(float) / 127.5 - 1) * (64.0 / cells) ** 0.5 * 12
    img = 128 + img + rng.normal(0, 2, size=img.shape)
    Image.fromarray(np.clip(np.rint(img), 0, 255).astype(np.uint8)).save(HERE / "carrier.png")


carrier()
write("embeddings_gating.jsonl", clusters(40, 8, 7, 0.9))
small = clusters(12, 4, 3, 0.3)
small[5]["label"] = None
write("embeddings_small.jsonl", small)
bad = clusters(3, 4, 5, 0.3)
bad[2]["dim"] = 5
bad[2]["e_img"].append(0.5)
bad[2]["e_txt"].append(0.5)
write("embeddings_bad_dim.jsonl", bad)
zero = clusters(2, 4, 9, 0.3)
zero[1]["e_txt"] = [0.0] * 4
write("embeddings_degenerate.jsonl", zero)

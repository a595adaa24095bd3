#!/usr/bin/env python3
"""Generate the bundled desk dataset and train the 2-layer MLP used by the
inference harness.

Writes <out>/model.json + model.bin and <out>/{train,test}.json + .bin.
Blobs are little-endian float32. Everything is seed-fixed.
"""

import argparse
import json
import pathlib

import numpy as np

FEATURES = 64
CLASSES = 10
HIDDEN = 64


def make_dataset(rng, count, prototypes, noise):
    labels = rng.integers(0, CLASSES, size=count)
    x = prototypes[labels] + noise * rng.standard_normal((count, FEATURES))
    # A random per-sample contrast keeps the inputs from saturating one scale.
    x *= rng.uniform(0.7, 1.0, size=(count, 1))
    return np.clip(x, 0.0, 1.0).astype(np.float32), labels.astype(np.int64)


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train(rng, x, y, epochs, lr):
    w1 = rng.standard_normal((HIDDEN, FEATURES)) * np.sqrt(2.0 / FEATURES)
    b1 = np.zeros(HIDDEN)
    w2 = rng.standard_normal((CLASSES, HIDDEN)) * np.sqrt(2.0 / HIDDEN)
    b2 = np.zeros(CLASSES)
    params = [w1, b1, w2, b2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    onehot = np.eye(CLASSES)[y]
    t = 0
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for lo in range(0, len(x), 32):
            idx = order[lo:lo + 32]
            xb, yb = x[idx], onehot[idx]
            h = np.maximum(0.0, xb @ w1.T + b1)
            p = softmax(h @ w2.T + b2)
            dz2 = (p - yb) / len(idx)
            gw2 = dz2.T @ h
            gb2 = dz2.sum(axis=0)
            dh = (dz2 @ w2) * (h > 0)
            gw1 = dh.T @ xb
            gb1 = dh.sum(axis=0)
            t += 1
            for k, g in enumerate([gw1, gb1, gw2, gb2]):
                m[k] = 0.9 * m[k] + 0.1 * g
                v[k] = 0.999 * v[k] + 0.001 * g * g
                params[k] -= lr * (m[k] / (1 - 0.9 ** t)) / (np.sqrt(v[k] / (1 - 0.999 ** t)) + 1e-8)
    return params


def accuracy(params, x, y):
    w1, b1, w2, b2 = params
    h = np.maximum(0.0, x @ w1.T + b1)
    return float(np.mean(np.argmax(h @ w2.T + b2, axis=1) == y))


def write_dataset(out, name, x, y):
    blob = out / f"{name}.bin"
    x.astype("<f4").tofile(blob)
    manifest = {
        "format": "xbar-dataset",
        "version": 1,
        "features": FEATURES,
        "classes": CLASSES,
        "count": int(len(x)),
        "blob": blob.name,
        "blob_dtype": "float32-le",
        "layout": "x[count][features]",
        "labels": [int(v) for v in y],
    }
    (out / f"{name}.json").write_text(json.dumps(manifest, indent=1) + "\n")


def write_model(out, params, acc):
    w1, b1, w2, b2 = [p.astype("<f4") for p in params]
    blob = out / "model.bin"
    np.concatenate([w1.ravel(), b1, w2.ravel(), b2]).astype("<f4").tofile(blob)
    manifest = {
        "format": "xbar-model",
        "version": 1,
        "blob": blob.name,
        "blob_dtype": "float32-le",
        "software_test_accuracy": acc,
        "layers": [
            {"name": "fc1", "in": FEATURES, "out": HIDDEN, "activation": "relu",
             "weight_offset": 0, "bias_offset": HIDDEN * FEATURES},
            {"name": "fc2", "in": HIDDEN, "out": CLASSES, "activation": "none",
             "weight_offset": HIDDEN * FEATURES + HIDDEN,
             "bias_offset": HIDDEN * FEATURES + HIDDEN + CLASSES * HIDDEN},
        ],
    }
    (out / "model.json").write_text(json.dumps(manifest, indent=1) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "desk"))
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--train", type=int, default=1600)
    ap.add_argument("--test", type=int, default=400)
    ap.add_argument("--noise", type=float, default=0.6)
    ap.add_argument("--epochs", type=int, default=40)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prototypes = rng.uniform(0.0, 1.0, size=(CLASSES, FEATURES))
    xtr, ytr = make_dataset(rng, args.train, prototypes, args.noise)
    xte, yte = make_dataset(rng, args.test, prototypes, args.noise)
    params = train(rng, xtr, ytr, args.epochs, 1e-3)
    acc = accuracy([p.astype(np.float32) for p in params], xte, yte)
    print(f"train accuracy {accuracy(params, xtr, ytr):.4f}  test accuracy {acc:.4f}")
    write_dataset(out, "train", xtr, ytr)
    write_dataset(out, "test", xte, yte)
    write_model(out, params, acc)


if __name__ == "__main__":
    main()

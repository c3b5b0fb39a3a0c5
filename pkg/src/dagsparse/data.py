"""Seeded synthetic image classification datasets of graded difficulty.

Three levels form the ladder: level 1 is linearly separable (class-coded
bright bands), level 2 needs local features (oriented gratings with
random phase), level 3 needs global integration (relative arrangement of
two motifs).  Two transforms mirror the colorized-embedding and tear-up
constructions used to reshape external datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    train_images: np.ndarray  # (N, C, H, W) in [0, 1]
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    name: str = ""
    difficulty: int = 0
    seed: int = 0
    transforms: list[str] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return int(self.train_labels.max()) + 1

    @property
    def resolution(self) -> int:
        return self.train_images.shape[2]

    @property
    def channels(self) -> int:
        return self.train_images.shape[1]


def _balanced_labels(size: int, k: int) -> np.ndarray:
    if size % k != 0:
        raise ValueError(f"size {size} not divisible by {k} classes")
    return np.repeat(np.arange(k), size // k)


def _level1(rng, labels, r, k):
    """One bright half/sector of the image encodes the class: a coarse,
    high-contrast layout that a raw-pixel linear template nails."""
    n = len(labels)
    imgs = rng.uniform(0.0, 0.15, size=(n, r, r))
    h = r // 2
    for i, c in enumerate(labels):
        bright = rng.uniform(0.7, 0.95)
        if k <= 4:
            # halves: robust to the small offsets of the embedding transform
            sl = [(slice(None, h), slice(None)), (slice(h, None), slice(None)),
                  (slice(None), slice(None, h)), (slice(None), slice(h, None))][c]
            imgs[i][sl] += bright
        else:
            band = max(r // k, 1)
            top = round(c * (r - band) / (k - 1))
            imgs[i, top:top + band, :] += bright
    return imgs


def _level2(rng, labels, r, k):
    """Sinusoidal grating whose orientation encodes the class; the random
    phase and frequency jitter defeat raw-pixel templates."""
    n = len(labels)
    yy, xx = np.mgrid[0:r, 0:r] / r
    imgs = np.empty((n, r, r))
    for i, c in enumerate(labels):
        theta = np.pi * c / k
        freq = rng.uniform(2.5, 3.5)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy)
                      + phase)
        imgs[i] = 0.5 + 0.45 * wave
    imgs += rng.normal(0, 0.05, imgs.shape)
    return imgs


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=float)
_BOX = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=float)


def _level3(rng, labels, r, k):
    """Two motifs at random positions; the class is the direction from the
    cross to the box (quantized into k sectors), so only the relative
    arrangement matters."""
    n = len(labels)
    imgs = rng.uniform(0.0, 0.2, size=(n, r, r))
    m = 3

    def stamp(img, y, x, motif):
        # toroidal placement keeps every position distribution uniform
        ys = np.arange(y, y + m) % r
        xs = np.arange(x, x + m) % r
        img[np.ix_(ys, xs)] = np.maximum(img[np.ix_(ys, xs)], motif)

    for i, c in enumerate(labels):
        # the class is the undirected orientation of the cross-box axis;
        # uniform toroidal centroid and a random pair flip make all
        # first-order pixel statistics class-independent
        cy, cx = rng.uniform(0, r, 2)
        ang = (np.pi * (c + rng.uniform(0.1, 0.9)) / k
               + np.pi * rng.integers(0, 2))
        dist = rng.uniform(0.28, 0.42) * r
        dy, dx = dist / 2 * np.sin(ang), dist / 2 * np.cos(ang)
        stamp(imgs[i], int(round(cy - dy)), int(round(cx - dx)), _CROSS)
        stamp(imgs[i], int(round(cy + dy)), int(round(cx + dx)), _BOX)
    return imgs


_LEVELS = {1: _level1, 2: _level2, 3: _level3}


def gen_shapes(level: int, size: int, resolution: int, channels: int,
               seed: int, num_classes: int = 4, test_size: int | None = None,
               ) -> Dataset:
    """Generate one rung of the difficulty ladder, train and test splits.

    The two splits come from disjoint seed streams so they never overlap.
    """
    if level not in _LEVELS:
        raise ValueError(f"level must be 1, 2 or 3, got {level}")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if test_size is None:
        test_size = max(num_classes, (size // 4) // num_classes * num_classes)

    def split(n, stream):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(level, stream)))
        labels = _balanced_labels(n, num_classes)
        imgs = _LEVELS[level](rng, labels, resolution, num_classes)
        imgs = np.clip(imgs, 0.0, 1.0)[:, None, :, :]
        if channels > 1:
            imgs = np.repeat(imgs, channels, axis=1)
        perm = rng.permutation(n)
        return imgs[perm].astype(np.float32), labels[perm]

    xtr, ytr = split(size, 0)
    xte, yte = split(test_size, 1)
    return Dataset(xtr, ytr, xte, yte, name=f"level{level}", difficulty=level,
                   seed=seed)


def embed_colorize(d: Dataset, target_resolution: int, seed: int,
                   noise_amplitude: float = 0.1,
                   fixed_offset: tuple[int, int] | None = None,
                   fixed_tint: tuple[float, float, float] | None = None,
                   ) -> Dataset:
    """Embed each grayscale image at a random offset on a larger 3-channel
    canvas, tint it with a random color and add uniform color noise."""
    src = d.resolution
    if target_resolution < src:
        raise ValueError("target resolution smaller than source")
    rng = np.random.default_rng(seed)

    def tx(images):
        n = len(images)
        gray = images.mean(axis=1)  # collapse to grayscale
        out = np.zeros((n, 3, target_resolution, target_resolution),
                       dtype=np.float32)
        span = target_resolution - src
        for i in range(n):
            oy, ox = (fixed_offset if fixed_offset is not None
                      else rng.integers(0, span + 1, 2))
            tint = (np.array(fixed_tint) if fixed_tint is not None
                    else rng.uniform(0.3, 1.0, 3))
            out[i, :, oy:oy + src, ox:ox + src] = tint[:, None, None] * gray[i]
        if noise_amplitude:
            out += rng.uniform(0, noise_amplitude, out.shape).astype(np.float32)
        return np.clip(out, 0.0, 1.0)

    return Dataset(tx(d.train_images), d.train_labels.copy(),
                   tx(d.test_images), d.test_labels.copy(),
                   name=d.name + "_embedded", difficulty=d.difficulty,
                   seed=d.seed, transforms=d.transforms + ["embed_colorize"])


def tear_up(d: Dataset, patch: int, seed: int) -> Dataset:
    """Cut every image into patch x patch pieces, then shuffle the pieces
    and rotate each by a multiple of 90 degrees.  The permutation and
    rotations are drawn once and applied identically to every image."""
    r = d.resolution
    if r % patch != 0:
        raise ValueError(f"resolution {r} not divisible by patch {patch}")
    npp = r // patch
    rng = np.random.default_rng(seed)
    perm = rng.permutation(npp * npp)
    rots = rng.integers(0, 4, npp * npp)

    def tx(images):
        out = np.empty_like(images)
        for slot in range(npp * npp):
            src_idx = perm[slot]
            sy, sx = divmod(src_idx, npp)
            dy, dx = divmod(slot, npp)
            piece = images[:, :, sy * patch:(sy + 1) * patch,
                           sx * patch:(sx + 1) * patch]
            piece = np.rot90(piece, k=int(rots[slot]), axes=(2, 3))
            out[:, :, dy * patch:(dy + 1) * patch,
                dx * patch:(dx + 1) * patch] = piece
        return out

    return Dataset(tx(d.train_images), d.train_labels.copy(),
                   tx(d.test_images), d.test_labels.copy(),
                   name=d.name + f"_t{patch}", difficulty=d.difficulty,
                   seed=d.seed, transforms=d.transforms + [f"tear_up({patch})"])


def linear_probe_accuracy(d: Dataset, epochs: int = 60, lr: float = 0.5,
                          seed: int = 0) -> float:
    """Test accuracy of multinomial logistic regression on raw pixels.

    The reference baseline used to validate the difficulty ladder.
    """
    rng = np.random.default_rng(seed)
    x = d.train_images.reshape(len(d.train_images), -1).astype(np.float64)
    xt = d.test_images.reshape(len(d.test_images), -1).astype(np.float64)
    mu, sd = x.mean(axis=0), x.std(axis=0) + 1e-8
    x = (x - mu) / sd
    xt = (xt - mu) / sd
    k = d.num_classes
    w = np.zeros((x.shape[1], k))
    b = np.zeros(k)
    y = d.train_labels
    n = len(x)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, 128):
            idx = perm[lo:lo + 128]
            z = x[idx] @ w + b
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            p[np.arange(len(idx)), y[idx]] -= 1
            p /= len(idx)
            w -= lr * (x[idx].T @ p + 1e-4 * w)
            b -= lr * p.sum(axis=0)
    return float(((xt @ w + b).argmax(axis=1) == d.test_labels).mean())

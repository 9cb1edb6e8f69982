"""Node-order-invariant subgraph feature extraction.

A layer holds ``c`` learnable k-by-k templates ("kernels").  For every
k-by-k window of the input adjacency matrix, each kernel is matched against
the window under simultaneous row/column relabelings; the matching score is
the squared Frobenius distance at the best relabeling, so a score of zero
means the window contains the template exactly, up to node order.  Scores
are min-pooled over candidate relabelings and softmax-rescaled (small
distance -> large feature) into a channels-by-grid-by-grid feature tensor.

Two matchers are provided:

* ``brute_match`` enumerates all k! permutations — exact, cost grows
  factorially with k.
* ``fast_match`` builds a dense surrogate for the optimal permutation out
  of the eigenvectors of the symmetrized kernel and window.  The true
  optimum over orthogonal relabelings is eigenvector alignment; taking
  entrywise absolute values sidesteps the sign ambiguity at the price of
  the surrogate no longer being a genuine permutation matrix, so its score
  is an approximation (it is NOT guaranteed close to the brute score).
  ``eigen_lower_bound`` gives the spectral floor no relabeling can beat.

``forward_layer`` evaluates a whole layer; in brute mode it uses a
vectorized evaluation over all windows at once that produces the same
values as the per-window composition (``forward_layer_windows``), which is
kept as the reference path and the one benchmarks time.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CapacityError
from .linalg import (
    MAX_BRUTE_K,
    EigenDecomposition,
    enumerate_permutations,
    frobenius_sq,
    invert_permutation,
    permute_conjugate,
    symmetric_eigendecomposition,
)

MODES = ("brute", "fast")
SOFTMAX_AXES = ("per_kernel", "across_kernels")

# Cap on elements of the (permutations x windows x k*k) difference block a
# single vectorized brute chunk may allocate (~32 MB of float64).
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class LayerConfig:
    """Shape and mode of one extraction layer."""

    size_k: int
    channels_c: int
    mode: str = "brute"
    softmax_axis: str = "per_kernel"

    def __post_init__(self):
        if self.size_k < 1:
            raise ValueError(f"size_k must be >= 1, got {self.size_k}")
        if self.channels_c < 1:
            raise ValueError(f"channels_c must be >= 1, got {self.channels_c}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.softmax_axis not in SOFTMAX_AXES:
            raise ValueError(
                f"softmax_axis must be one of {SOFTMAX_AXES}, got {self.softmax_axis!r}"
            )
        if self.mode == "brute" and self.size_k > MAX_BRUTE_K:
            raise CapacityError(
                f"brute mode with size_k={self.size_k} exceeds the enumeration "
                f"limit of {MAX_BRUTE_K}"
            )


class BruteMatch(NamedTuple):
    dist: float
    best_perm: tuple
    all_dists: np.ndarray  # distance per permutation, lexicographic order


class FastMatch(NamedTuple):
    dist: float
    perm_surrogate: np.ndarray  # dense nonnegative stand-in, not a permutation
    degenerate: bool  # spectrum had a near-repeated eigenvalue


@dataclass
class FeatureMap:
    """Per-kernel min-pooled scores; ``argmin_index`` only exists in brute mode."""

    values: np.ndarray
    argmin_index: np.ndarray | None = None


def extract_submatrix(a: np.ndarray, s: int, t: int, k: int) -> np.ndarray:
    """The k-by-k window of ``a`` whose top-left corner sits at (s, t)."""
    n = a.shape[0]
    if s < 0 or t < 0 or s + k > n or t + k > n:
        raise IndexError(f"window ({s}, {t}) of size {k} out of bounds for {n}x{n} matrix")
    return a[s : s + k, t : t + k].copy()


def brute_match(kernel: np.ndarray, m: np.ndarray, limit: int = MAX_BRUTE_K) -> BruteMatch:
    """Exact matching score by enumerating every relabeling of the kernel.

    Returns the minimum squared Frobenius distance, the first permutation
    attaining it (lexicographic order breaks ties), and the full distance
    vector over all k! candidates.
    """
    if kernel.shape != m.shape or kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel {kernel.shape} and window {m.shape} must be equal square shapes")
    perms = enumerate_permutations(kernel.shape[0], limit)
    dists = np.empty(len(perms))
    for j, p in enumerate(perms):
        dists[j] = frobenius_sq(permute_conjugate(p, kernel), m)
    best = int(np.argmin(dists))
    return BruteMatch(float(dists[best]), perms[best], dists)


def _symmetrize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.T)


def fast_match(
    kernel: np.ndarray,
    m: np.ndarray,
    kernel_eigen: EigenDecomposition | None = None,
    gap_tol: float = 1e-10,
) -> FastMatch:
    """Spectral surrogate matching score.

    Both inputs are symmetrized first (the spectral argument needs symmetric
    matrices; learned kernels and off-diagonal windows generally are not).
    ``kernel_eigen`` lets callers hoist the kernel's eigendecomposition out
    of a window loop; it must be the decomposition of the symmetrized
    kernel.  A near-degenerate spectrum on either side is flagged on the
    result rather than raised — zero-padded graphs produce repeated zero
    eigenvalues all the time and the surrogate is still usable.
    """
    if kernel.shape != m.shape or kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel {kernel.shape} and window {m.shape} must be equal square shapes")
    ksym = _symmetrize(kernel)
    msym = _symmetrize(m)
    keig = kernel_eigen if kernel_eigen is not None else symmetric_eigendecomposition(ksym)
    meig = symmetric_eigendecomposition(msym)
    surrogate = np.abs(meig.vectors) @ np.abs(keig.vectors.T)
    dist = frobenius_sq(surrogate @ ksym @ surrogate.T, msym)
    degenerate = min(keig.gap, meig.gap) < gap_tol
    return FastMatch(dist, surrogate, degenerate)


def eigen_lower_bound(kernel: np.ndarray, m: np.ndarray) -> float:
    """Spectral floor: sum of squared gaps between the sorted spectra.

    No simultaneous relabeling of the (symmetrized) kernel can bring it
    closer to the window than this, since relabeling preserves eigenvalues.
    """
    keig = symmetric_eigendecomposition(_symmetrize(kernel))
    meig = symmetric_eigendecomposition(_symmetrize(m))
    d = keig.values - meig.values
    return float(np.dot(d, d))


def min_pool(raw: np.ndarray) -> FeatureMap:
    """Minimum over the permutation axis of a (perms, grid, grid) tensor.

    ``argmin_index`` records the smallest attaining index per cell, which
    the backward pass reuses to route gradients.
    """
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[0] < 1:
        raise ValueError(f"expected a (perms, grid, grid) tensor with perms >= 1, got {raw.shape}")
    return FeatureMap(raw.min(axis=0), raw.argmin(axis=0))


def softmax_normalize(maps, softmax_axis: str = "per_kernel") -> np.ndarray:
    """Rescale min-pooled distances into features in (0, 1).

    Distances are negated (smaller distance -> stronger feature) and pushed
    through a max-subtracted softmax.  ``per_kernel`` normalizes each
    channel over its whole grid; ``across_kernels`` normalizes each grid
    cell over the channels.
    """
    if isinstance(maps, np.ndarray):
        z = maps
    else:
        shapes = {m.values.shape for m in maps}
        if len(shapes) > 1:
            raise ValueError(f"feature maps disagree on grid size: {sorted(shapes)}")
        z = np.stack([m.values for m in maps])
    if z.ndim != 3 or z.shape[0] < 1:
        raise ValueError(f"expected (channels, grid, grid) values, got shape {z.shape}")
    x = -z
    if softmax_axis == "per_kernel":
        flat = x.reshape(x.shape[0], -1)
        flat = flat - flat.max(axis=1, keepdims=True)
        e = np.exp(flat)
        return (e / e.sum(axis=1, keepdims=True)).reshape(x.shape)
    if softmax_axis == "across_kernels":
        x = x - x.max(axis=0, keepdims=True)
        e = np.exp(x)
        return e / e.sum(axis=0, keepdims=True)
    raise ValueError(f"softmax_axis must be one of {SOFTMAX_AXES}, got {softmax_axis!r}")


@dataclass
class LayerCache:
    """Forward byproducts the backward pass needs."""

    a: np.ndarray
    config: LayerConfig
    values: np.ndarray  # (c, g, g) min-pooled distances
    features: np.ndarray  # (c, g, g) softmax output
    argmin: np.ndarray | None  # (c, g, g) int, brute mode
    surrogates: np.ndarray | None  # (c, g, g, k, k), fast mode


def _check_layer_inputs(a: np.ndarray, kernels: np.ndarray, config: LayerConfig) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"layer input must be square, got shape {a.shape}")
    kernels = np.asarray(kernels, dtype=float)
    if kernels.ndim == 2:
        kernels = kernels[None]
    k, c = config.size_k, config.channels_c
    if kernels.shape != (c, k, k):
        raise ValueError(f"kernels have shape {kernels.shape}, config expects {(c, k, k)}")
    if a.shape[0] < k:
        raise ValueError(f"input of size {a.shape[0]} is smaller than kernel size {k}")
    return a, kernels


def _map_rows(fill, grid: int, threads: int) -> None:
    """Run ``fill(rows)`` over disjoint row blocks, optionally on a thread pool."""
    if threads <= 1:
        fill(range(grid))
        return
    blocks = [b.tolist() for b in np.array_split(np.arange(grid), threads) if b.size]
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        list(pool.map(fill, blocks))


def _brute_maps_per_window(a, kernels, config, threads) -> list[FeatureMap]:
    k = config.size_k
    g = a.shape[0] - k + 1
    nperm = len(enumerate_permutations(k))
    maps = []
    for kernel in kernels:
        raw = np.empty((nperm, g, g))

        def fill(rows, kernel=kernel, raw=raw):
            for s in rows:
                for t in range(g):
                    raw[:, s, t] = brute_match(kernel, a[s : s + k, t : t + k]).all_dists

        _map_rows(fill, g, threads)
        maps.append(min_pool(raw))
    return maps


def _fast_maps_per_window(a, kernels, config, threads):
    k = config.size_k
    g = a.shape[0] - k + 1
    c = config.channels_c
    maps = []
    surrogates = np.empty((c, g, g, k, k))
    for i, kernel in enumerate(kernels):
        keig = symmetric_eigendecomposition(_symmetrize(kernel))
        vals = np.empty((g, g))
        sur = surrogates[i]

        def fill(rows, kernel=kernel, keig=keig, vals=vals, sur=sur):
            for s in rows:
                for t in range(g):
                    res = fast_match(kernel, a[s : s + k, t : t + k], kernel_eigen=keig)
                    vals[s, t] = res.dist
                    sur[s, t] = res.perm_surrogate

        _map_rows(fill, g, threads)
        maps.append(FeatureMap(vals, None))
    return maps, surrogates


def _brute_maps_batched(a, kernels, config) -> list[FeatureMap]:
    """Same values as the per-window composition, evaluated in bulk.

    Permuted kernels are materialized once per layer call and compared to
    all windows with array arithmetic, chunked over permutations to bound
    memory.  On exact score ties the selected permutation index may differ
    from the per-window path by one rounding ulp's worth of argmin — the
    pooled values still agree to ~1e-15.
    """
    k = config.size_k
    n = a.shape[0]
    g = n - k + 1
    wins = sliding_window_view(a, (k, k)).reshape(g * g, k * k)
    perms = enumerate_permutations(k)
    nperm = len(perms)
    chunk = max(1, _CHUNK_ELEMS // max(1, g * g * k * k))
    maps = []
    for kernel in kernels:
        stack = np.stack([permute_conjugate(p, kernel) for p in perms]).reshape(nperm, k * k)
        best = np.full(g * g, np.inf)
        best_j = np.zeros(g * g, dtype=np.int64)
        for j0 in range(0, nperm, chunk):
            d = stack[j0 : j0 + chunk, None, :] - wins[None, :, :]
            dist = np.einsum("pwe,pwe->pw", d, d)
            rel = dist.argmin(axis=0)
            cols = np.arange(dist.shape[1])
            dmin = dist[rel, cols]
            upd = dmin < best  # strict: earlier chunks keep ties -> smallest index
            best[upd] = dmin[upd]
            best_j[upd] = j0 + rel[upd]
        maps.append(FeatureMap(best.reshape(g, g), best_j.reshape(g, g)))
    return maps


def _assemble(a, config, maps, surrogates) -> tuple[np.ndarray, LayerCache]:
    values = np.stack([m.values for m in maps])
    features = softmax_normalize(maps, config.softmax_axis)
    argmin = None
    if maps[0].argmin_index is not None:
        argmin = np.stack([m.argmin_index for m in maps])
    return features, LayerCache(a, config, values, features, argmin, surrogates)


def forward_layer(
    a: np.ndarray,
    kernels: Sequence[np.ndarray] | np.ndarray,
    config: LayerConfig,
    threads: int = 1,
) -> tuple[np.ndarray, LayerCache]:
    """Match every kernel against every window, min-pool, softmax-rescale.

    Returns the (c, grid, grid) feature tensor together with the cache the
    backward pass consumes.  Brute mode runs the batched evaluation; fast
    mode walks windows (optionally across ``threads``).
    """
    a, kernels = _check_layer_inputs(a, kernels, config)
    if config.mode == "brute":
        maps = _brute_maps_batched(a, kernels, config)
        return _assemble(a, config, maps, None)
    maps, surrogates = _fast_maps_per_window(a, kernels, config, threads)
    return _assemble(a, config, maps, surrogates)


def forward_layer_windows(
    a: np.ndarray,
    kernels: Sequence[np.ndarray] | np.ndarray,
    config: LayerConfig,
    threads: int = 1,
) -> tuple[np.ndarray, LayerCache]:
    """Reference layer forward composed window-by-window from the match ops.

    Produces the same outputs as ``forward_layer``; benchmarks time this
    path because its cost reflects the per-window algorithms (permutation
    enumeration vs. eigendecomposition) rather than bulk-array tricks.
    """
    a, kernels = _check_layer_inputs(a, kernels, config)
    if config.mode == "brute":
        maps = _brute_maps_per_window(a, kernels, config, threads)
        return _assemble(a, config, maps, None)
    maps, surrogates = _fast_maps_per_window(a, kernels, config, threads)
    return _assemble(a, config, maps, surrogates)


def _softmax_backward(grad_features: np.ndarray, cache: LayerCache) -> np.ndarray:
    """Gradient w.r.t. the min-pooled distances through the softmax rescale."""
    y = cache.features
    if cache.config.softmax_axis == "per_kernel":
        c = y.shape[0]
        yf = y.reshape(c, -1)
        gf = grad_features.reshape(c, -1)
        dot = (yf * gf).sum(axis=1, keepdims=True)
        return (-(yf * (gf - dot))).reshape(y.shape)
    dot = (y * grad_features).sum(axis=0, keepdims=True)
    return -(y * (grad_features - dot))


def backward_layer(
    grad_features: np.ndarray,
    cache: LayerCache,
    kernels: Sequence[np.ndarray] | np.ndarray,
    config: LayerConfig,
    need_input_grad: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Gradients of a scalar loss w.r.t. the kernels and the layer input.

    The matching step is differentiated straight-through: the permutation
    (brute) or surrogate (fast) selected in the forward pass is held
    constant, in the spirit of max-pool subgradients.  The softmax backward
    is the exact Jacobian-vector product per normalization group.
    """
    kernels = np.asarray(kernels, dtype=float)
    if kernels.ndim == 2:
        kernels = kernels[None]
    if config != cache.config:
        raise RuntimeError("backward_layer called with a config that does not match the cache")
    k, c = config.size_k, config.channels_c
    if kernels.shape != (c, k, k):
        raise RuntimeError(f"kernels {kernels.shape} do not match the cached config {(c, k, k)}")
    if grad_features.shape != cache.features.shape:
        raise RuntimeError(
            f"upstream gradient {grad_features.shape} does not match features "
            f"{cache.features.shape}"
        )
    if (cache.argmin is None) == (config.mode == "brute"):
        raise RuntimeError("cache contents do not match the config mode")

    grad_vals = _softmax_backward(grad_features, cache)
    a = cache.a
    g = a.shape[0] - k + 1
    wins = sliding_window_view(a, (k, k))
    grad_kernels = np.zeros_like(kernels)
    grad_input = np.zeros_like(a) if need_input_grad else None

    if config.mode == "brute":
        perms = enumerate_permutations(k)
        for i in range(c):
            gz = grad_vals[i]
            used = np.unique(cache.argmin[i])
            acc = np.zeros((k, k))
            for j in used:
                mask = cache.argmin[i] == j
                weighted = (gz[mask][:, None, None] * wins[mask]).sum(axis=0)
                acc += permute_conjugate(invert_permutation(perms[j]), weighted)
            grad_kernels[i] = 2.0 * (gz.sum() * kernels[i] - acc)
            if need_input_grad:
                conj = {j: permute_conjugate(perms[j], kernels[i]) for j in used}
                for s in range(g):
                    for t in range(g):
                        w = gz[s, t]
                        if w == 0.0:
                            continue
                        grad_input[s : s + k, t : t + k] += (2.0 * w) * (
                            wins[s, t] - conj[cache.argmin[i][s, t]]
                        )
        return grad_kernels, grad_input

    for i in range(c):
        ksym = _symmetrize(kernels[i])
        gz = grad_vals[i]
        for s in range(g):
            for t in range(g):
                w = gz[s, t]
                if w == 0.0:
                    continue
                sur = cache.surrogates[i, s, t]
                diff = sur @ ksym @ sur.T - _symmetrize(wins[s, t])
                gk = (2.0 * w) * (sur.T @ diff @ sur)
                grad_kernels[i] += _symmetrize(gk)
                if need_input_grad:
                    # diff is symmetric, so the symmetrization chain rule
                    # for the window is the identity here.
                    grad_input[s : s + k, t : t + k] += (-2.0 * w) * diff
    return grad_kernels, grad_input


@dataclass
class StackCache:
    layer_caches: list  # per layer: one LayerCache per input slice


def forward_stack(
    a: np.ndarray,
    layers: Sequence[tuple[np.ndarray, LayerConfig]],
    threads: int = 1,
) -> tuple[np.ndarray, StackCache]:
    """Chain extraction layers; each layer treats every incoming channel as a matrix.

    Channel counts multiply layer over layer (slice-major, kernel-minor
    ordering) and the grid shrinks by k-1 per layer.
    """
    if not layers:
        raise ValueError("forward_stack needs at least one layer")
    slices = [np.asarray(a, dtype=float)]
    all_caches = []
    for li, (kernels, config) in enumerate(layers):
        size = slices[0].shape[0]
        if config.size_k > size:
            raise ValueError(
                f"layer {li}: kernel size {config.size_k} exceeds the remaining grid {size}"
            )
        caches = []
        new_slices = []
        for sl in slices:
            q, cache = forward_layer(sl, kernels, config, threads=threads)
            caches.append(cache)
            new_slices.extend(q[ch] for ch in range(config.channels_c))
        all_caches.append(caches)
        slices = new_slices
    return np.stack(slices), StackCache(all_caches)


def backward_stack(
    grad_features: np.ndarray,
    cache: StackCache,
    layers: Sequence[tuple[np.ndarray, LayerConfig]],
) -> list[np.ndarray]:
    """Kernel gradients for every layer of a stack, deepest first in input order."""
    if len(cache.layer_caches) != len(layers):
        raise RuntimeError("stack cache does not match the layer list")
    grads = [np.zeros_like(np.asarray(kers, dtype=float)) for kers, _ in layers]
    slice_grads = [grad_features[ch] for ch in range(grad_features.shape[0])]
    for li in range(len(layers) - 1, -1, -1):
        kernels, config = layers[li]
        caches = cache.layer_caches[li]
        c = config.channels_c
        if len(slice_grads) != len(caches) * c:
            raise RuntimeError(f"layer {li}: gradient slices do not match the cached forward")
        prev = []
        for si, lc in enumerate(caches):
            gq = np.stack(slice_grads[si * c : (si + 1) * c])
            gk, ga = backward_layer(gq, lc, kernels, config, need_input_grad=li > 0)
            grads[li] += gk
            if li > 0:
                prev.append(ga)
        slice_grads = prev
    return grads

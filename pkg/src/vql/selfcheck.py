"""Independent oracles for every derived expectation, runnable as a suite.

Each check pairs a production code path with a second, deliberately naive
route to the same number: direct summation loops for convolutions, central
finite differences for gradients, dense normal equations for optimizer
targets, exhaustive line scans for step sizes, union-find labeling for
components, and hand-built replay streams for the memory policies. A check
returns (passed, detail) and never raises on a mere mismatch.

The registry maps check names to zero-argument callables; the CLI runs the
whole table (optionally filtered) and the acceptance tests re-run the
heavier parametrizations through the same helpers.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import amm, fusion, geo3d, glm, metrics, scenario as scen
from .core import (
    conv2d,
    conv2d_transpose,
    connected_components,
    gaussian_label,
    kernel_gradient,
    median_filter_1d,
    min_bounding_rect,
)
from .pipeline import Pipeline, PipelineConfig, TrackOutput, finalize_3d

__all__ = ["CHECKS", "run_checks"]


# -- naive reference implementations -----------------------------------------


def conv2d_naive(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Direct quadruple-loop cross-correlation with zero padding."""
    h, w, c_in = x.shape
    ksz = k.shape[0]
    c_out = k.shape[3]
    r = ksz // 2
    out = np.zeros((h, w, c_out))
    for i in range(h):
        for j in range(w):
            for dy in range(ksz):
                for dx in range(ksz):
                    yy, xx = i + dy - r, j + dx - r
                    if 0 <= yy < h and 0 <= xx < w:
                        for c in range(c_in):
                            for d in range(c_out):
                                out[i, j, d] += x[yy, xx, c] * k[dy, dx, c, d]
    return out


def conv_matrix_naive(feature: np.ndarray, kernel_shape: tuple) -> np.ndarray:
    """Dense matrix A with A @ vec(k) == vec(conv2d(feature, k))."""
    n = int(np.prod(kernel_shape))
    columns = []
    for idx in range(n):
        basis = np.zeros(n)
        basis[idx] = 1.0
        columns.append(conv2d_naive(feature, basis.reshape(kernel_shape)).ravel())
    return np.column_stack(columns)


def fd_gradient(loss_fn, kernel: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss over every kernel entry."""
    grad = np.zeros_like(kernel)
    it = np.nditer(kernel, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = kernel.copy()
        plus[idx] += step
        minus = kernel.copy()
        minus[idx] -= step
        grad[idx] = (loss_fn(plus) - loss_fn(minus)) / (2.0 * step)
        it.iternext()
    return grad


def components_union_find(mask: np.ndarray) -> list[frozenset]:
    """4-connected labeling via union-find, independent of the BFS path."""
    h, w = mask.shape
    parent: dict[tuple[int, int], tuple[int, int]] = {}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                parent[(r, c)] = (r, c)
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            for rr, cc in ((r + 1, c), (r, c + 1)):
                if rr < h and cc < w and mask[rr, cc]:
                    ra, rb = find((r, c)), find((rr, cc))
                    if ra != rb:
                        parent[ra] = rb
    groups: dict[tuple[int, int], set] = {}
    for p in parent:
        groups.setdefault(find(p), set()).add(p)
    return [frozenset(g) for g in groups.values()]


def gaussian_blur_dense(img: np.ndarray, sigma: float) -> np.ndarray:
    """Direct 2D convolution with the full truncated Gaussian kernel."""
    if sigma == 0:
        return np.asarray(img, dtype=np.float64)
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(xs**2) / (2.0 * sigma**2))
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    h, w = img.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = i + dy, j + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        acc += k2[dy + radius, dx + radius] * img[yy, xx]
            out[i, j] = acc
    return out


def _random_amm_instance(rng, n_samples=None, ksz=None, channels=None, size=6):
    n_samples = n_samples or int(rng.integers(1, 4))
    ksz = ksz or int(rng.choice([1, 3]))
    channels = channels or int(rng.integers(1, 4))
    d = int(rng.integers(1, 4))
    samples = []
    for _ in range(n_samples):
        feature = rng.uniform(-1.0, 1.0, size=(size, size, channels))
        mask = (rng.random((size, size)) > 0.5).astype(np.uint8)
        samples.append(amm.AmmSample(feature, mask))
    kernel = rng.uniform(-1.0, 1.0, size=(ksz, ksz, channels, d))
    return samples, kernel


def _random_glm_instance(rng, ksz=None, channels=None, size=6, region="mixed"):
    ksz = ksz or int(rng.choice([1, 3]))
    channels = channels or int(rng.integers(1, 4))
    n_samples = int(rng.integers(1, 4))
    samples = []
    for _ in range(n_samples):
        feature = rng.uniform(-1.0, 1.0, size=(size, size, channels))
        label = gaussian_label(rng.uniform(1, size - 2, size=2), rng.uniform(1.0, 2.0), (size, size))
        if region == "ones":
            s = np.ones((size, size))
        else:
            s = rng.random((size, size))
        samples.append(glm.GlmSample(feature, label, s))
    kernel = rng.uniform(-1.0, 1.0, size=(ksz, ksz, channels, 1))
    return samples, kernel


def solve_seg_normal_equations(samples, enc, rw, kernel_shape, delta):
    """Closed-form ridge optimum via dense normal equations (naive matrices)."""
    n = int(np.prod(kernel_shape))
    lhs = delta * np.eye(n)
    rhs = np.zeros(n)
    for sample in samples:
        a = conv_matrix_naive(sample.feature, kernel_shape)
        w2 = np.repeat(amm.reweight(sample.mask, rw).ravel(), kernel_shape[3]) ** 2
        lhs += a.T @ (w2[:, None] * a)
        rhs += a.T @ (w2 * enc.encode(sample.mask).ravel())
    return np.linalg.solve(lhs, rhs).reshape(kernel_shape)


def solve_track_normal_equations(samples, fn, kernel_shape, lam):
    """Weighted-least-squares ridge optimum for the pure quadratic (S == 1) case."""
    n = int(np.prod(kernel_shape))
    lhs = lam**2 * np.eye(n)
    rhs = np.zeros(n)
    count = len(samples)
    for sample in samples:
        a = conv_matrix_naive(sample.feature, kernel_shape)
        sw2 = glm.spatial_weight(sample.label, fn).ravel() ** 2
        lhs += a.T @ (sw2[:, None] * a) / count
        rhs += a.T @ (sw2 * sample.label.ravel()) / count
    return np.linalg.solve(lhs, rhs).reshape(kernel_shape)


# -- parametrized check bodies ------------------------------------------------


def check_conv_naive(n_instances=10, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        x = rng.uniform(-1, 1, size=(5, 5, 2))
        k = rng.uniform(-1, 1, size=(3, 3, 2, 3))
        got = conv2d(x, k)
        want = conv2d_naive(x, k)
        worst = max(worst, float(np.abs(got - want).max() / (np.abs(want).max() + 1e-30)))
    return worst < 1e-12, f"max relative deviation {worst:.3e}"


def check_adjoint_identity(n_instances=20, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        ksz = int(rng.choice([1, 3, 5]))
        a = rng.uniform(-1, 1, size=(6, 7, c_in))
        b = rng.uniform(-1, 1, size=(6, 7, c_out))
        k = rng.uniform(-1, 1, size=(ksz, ksz, c_in, c_out))
        lhs = float(np.sum(conv2d(a, k) * b))
        rhs = float(np.sum(a * conv2d_transpose(b, k)))
        worst = max(worst, abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30))
    return worst < 1e-10, f"max relative asymmetry {worst:.3e}"


def check_kernel_gradient_fd(n_instances=10, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        c_in, c_out = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        ksz = int(rng.choice([1, 3]))
        x = rng.uniform(-1, 1, size=(5, 5, c_in))
        y = rng.uniform(-1, 1, size=(5, 5, c_out))
        k = rng.uniform(-1, 1, size=(ksz, ksz, c_in, c_out))
        residual = conv2d(x, k) - y
        got = kernel_gradient(x, residual, k.shape)
        want = fd_gradient(lambda kk: 0.5 * float(np.sum((conv2d(x, kk) - y) ** 2)), k)
        worst = max(worst, float(np.abs(got - want).max() / (np.abs(want).max() + 1e-30)))
    return worst < 1e-5, f"max relative deviation {worst:.3e}"


def check_connected_components(n_instances=20, seed=3):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        mask = (rng.random((16, 16)) > 0.6).astype(np.uint8)
        got = {frozenset(c) for c in connected_components(mask)}
        want = set(components_union_find(mask))
        if got != want:
            return False, "component partition disagrees with union-find labeling"
        covered = set().union(*got) if got else set()
        if covered != {(r, c) for r, c in zip(*np.nonzero(mask))}:
            return False, "components do not cover the foreground"
    return True, f"{n_instances} random masks matched"


def check_min_bounding_rect(n_instances=20, seed=4):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        pts = {(int(rng.integers(0, 12)), int(rng.integers(0, 12))) for _ in range(8)}
        got = min_bounding_rect(pts)
        rows = [p[0] for p in pts]
        cols = [p[1] for p in pts]
        if got != (min(cols), min(rows), max(cols), max(rows)):
            return False, f"bbox {got} wrong for {sorted(pts)}"
    return True, f"{n_instances} random sets matched"


def check_median_filter(n_instances=20, seed=5):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        n = int(rng.integers(1, 40))
        window = int(rng.choice([1, 3, 5, 7]))
        seq = rng.uniform(-5, 5, size=n)
        got = median_filter_1d(seq, window)
        for i in range(n):
            lo, hi = max(0, i - window // 2), min(n, i + window // 2 + 1)
            chunk = sorted(seq[lo:hi])
            m = len(chunk)
            want = chunk[m // 2] if m % 2 else 0.5 * (chunk[m // 2 - 1] + chunk[m // 2])
            if abs(got[i] - want) > 1e-12:
                return False, f"position {i}: {got[i]} != {want}"
    return True, f"{n_instances} random sequences matched"


def check_pseudo_label_boundary(seed=6):
    mask = np.zeros((7, 7), dtype=np.uint8)
    mask[2:5, 2:5] = 1
    enc = amm.encode_pseudo_label(mask)
    want = np.zeros((7, 7))
    for r in range(7):
        for c in range(7):
            if not mask[r, c]:
                continue
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                neighbor_bg = not (0 <= rr < 7 and 0 <= cc < 7) or mask[rr, cc] == 0
                if neighbor_bg:
                    want[r, c] = 1
                    break
    if not np.array_equal(enc[:, :, 1], want):
        return False, "boundary channel disagrees with neighbor scan"
    if want.sum() != 8 or enc[3, 3, 1] != 0:
        return False, "3x3 square should have an 8-pixel ring"
    return True, "boundary ring matches neighbor-scan oracle"


def check_reweight_blur(seed=7):
    mask = np.zeros((12, 12))
    mask[:, 5:] = 1.0
    rw = amm.TargetReweighter()
    got = amm.reweight(mask, rw)
    want = rw.background_weight + (rw.foreground_weight - rw.background_weight) * gaussian_blur_dense(
        mask, rw.blur_sigma
    )
    err = float(np.abs(got - want).max())
    # monotone across the half-plane boundary, away from the padded right edge
    radius = max(1, int(np.ceil(3.0 * rw.blur_sigma)))
    monotone = bool(np.all(np.diff(got[:, : 12 - radius], axis=1) >= -1e-12))
    return err < 1e-12 and monotone, f"max deviation {err:.3e}, monotone across boundary: {monotone}"


def check_seg_loss_naive(n_instances=10, seed=8):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    worst = 0.0
    for _ in range(n_instances):
        samples, kernel = _random_amm_instance(rng)
        kernel = rng.uniform(-1, 1, size=kernel.shape[:3] + (3,))
        filt = amm.SegFilter(kernel, 0.05)
        got = amm.seg_loss(filt, samples, enc, rw)
        want = 0.5 * 0.05 * float(np.sum(kernel**2))
        for s in samples:
            weights = amm.reweight(s.mask, rw)
            target = enc.encode(s.mask)
            pred = conv2d_naive(s.feature, kernel)
            for i in range(pred.shape[0]):
                for j in range(pred.shape[1]):
                    for d in range(pred.shape[2]):
                        want += 0.5 * (weights[i, j] * (pred[i, j, d] - target[i, j, d])) ** 2
        worst = max(worst, abs(got - want) / (abs(want) + 1e-30))
    return worst < 1e-12, f"max relative deviation {worst:.3e}"


def check_seg_gradient_fd(n_instances=30, seed=9):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    worst = 0.0
    for _ in range(n_instances):
        n_samples = int(rng.integers(1, 6))
        ksz = int(rng.choice([1, 3]))
        channels = int(rng.choice([1, 2, 4]))
        size = int(rng.integers(4, 9))
        samples = []
        for _ in range(n_samples):
            feature = rng.uniform(-1, 1, size=(size, size, channels))
            mask = (rng.random((size, size)) > 0.5).astype(np.uint8)
            samples.append(amm.AmmSample(feature, mask))
        kernel = rng.uniform(-1, 1, size=(ksz, ksz, channels, 3))
        delta = float(rng.uniform(0.01, 0.2))
        filt = amm.SegFilter(kernel, delta)
        got = amm.seg_gradient(filt, samples, enc, rw)
        want = fd_gradient(
            lambda kk: amm.seg_loss(amm.SegFilter(kk, delta), samples, enc, rw), kernel
        )
        worst = max(worst, float(np.abs(got - want).max() / (np.abs(want).max() + 1e-30)))
    return worst < 1e-5, f"max relative deviation {worst:.3e} over {n_instances} instances"


def check_seg_stationarity(seed=10):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    samples, _ = _random_amm_instance(rng, n_samples=2, ksz=3, channels=2, size=4)
    shape = (3, 3, 2, 3)
    optimum = solve_seg_normal_equations(samples, enc, rw, shape, delta=0.1)
    g = amm.seg_gradient(amm.SegFilter(optimum, 0.1), samples, enc, rw)
    norm = float(np.sqrt(np.sum(g**2)))
    return norm < 1e-8, f"gradient norm at closed-form optimum: {norm:.3e}"


def check_steepest_step_scan(n_instances=5, seed=11, scan_points=10_000):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    for _ in range(n_instances):
        samples, _ = _random_amm_instance(rng, n_samples=1, ksz=1, channels=1, size=4)
        kernel = rng.uniform(-1, 1, size=(1, 1, 1, 3))
        delta = float(rng.uniform(0.05, 0.5))
        filt = amm.SegFilter(kernel, delta)
        g = amm.seg_gradient(filt, samples, enc, rw)
        alpha = amm.steepest_step_size(g, samples, rw, delta)
        lambdas = np.linspace(0.0, 2.0 * alpha, scan_points)
        losses = [
            amm.seg_loss(amm.SegFilter(kernel - lam * g, delta), samples, enc, rw)
            for lam in lambdas
        ]
        at_alpha = amm.seg_loss(amm.SegFilter(kernel - alpha * g, delta), samples, enc, rw)
        best = min(losses)
        if at_alpha > best * (1 + 1e-12) + 1e-15:
            return False, f"alpha loses to scan: {at_alpha} > {best}"
        gap = abs(lambdas[int(np.argmin(losses))] - alpha)
        if gap > lambdas[1] - lambdas[0] + 1e-15:
            return False, f"alpha {alpha} off scan argmin by {gap}"
    return True, f"alpha at or below all {scan_points} scanned points on {n_instances} instances"


def check_steepest_special_cases():
    # identity feature, unit weights, no ridge: denominator collapses to ||g||^2
    ones_feature = np.ones((1, 1, 1))
    sample = amm.AmmSample(ones_feature, np.ones((1, 1), dtype=np.uint8))
    rw_unit = amm.TargetReweighter(1.0, 1.0, 0.0)
    g = np.array([[[[0.7, -0.3, 0.2]]]])
    alpha = amm.steepest_step_size(g, [sample], rw_unit, delta=0.0)
    if abs(alpha - 1.0) > 1e-12:
        return False, f"identity case alpha {alpha} != 1"
    # zero weights, pure ridge: alpha = 1 / delta
    rw_zero = amm.TargetReweighter(0.0, 0.0, 0.0)
    alpha = amm.steepest_step_size(g, [sample], rw_zero, delta=0.25)
    if abs(alpha - 4.0) > 1e-12:
        return False, f"pure ridge alpha {alpha} != 4"
    return True, "alpha = 1 (identity) and alpha = 1/delta (ridge) exact"


def check_steepest_convergence(n_instances=3, seed=12, n_iter=200, tol=1e-6):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    for _ in range(n_instances):
        samples, _ = _random_amm_instance(rng, n_samples=2, ksz=1, channels=2, size=4)
        shape = (1, 1, 2, 3)
        delta = 0.3
        optimum = solve_seg_normal_equations(samples, enc, rw, shape, delta)
        best = amm.seg_loss(amm.SegFilter(optimum, delta), samples, enc, rw)
        filt = amm.SegFilter(np.zeros(shape), delta)
        losses = [amm.seg_loss(filt, samples, enc, rw)]
        for _ in range(n_iter):
            g = amm.seg_gradient(filt, samples, enc, rw)
            if float(np.sqrt(np.sum(g**2))) < 1e-12:
                break
            alpha = amm.steepest_step_size(g, samples, rw, delta)
            filt = amm.SegFilter(filt.kernel - alpha * g, delta)
            losses.append(amm.seg_loss(filt, samples, enc, rw))
        if any(b > a + 1e-12 for a, b in zip(losses, losses[1:])):
            return False, "loss increased during descent"
        gap = losses[-1] - best
        if gap > tol:
            return False, f"loss gap to closed form {gap:.3e} > {tol}"
    return True, f"reached closed-form ridge optimum within {tol} on {n_instances} instances"


def check_steepest_monotone(n_instances=100, seed=13, n_iter=10):
    rng = np.random.default_rng(seed)
    enc, rw = amm.PseudoLabelEncoder(), amm.TargetReweighter()
    for _ in range(n_instances):
        samples, kernel = _random_amm_instance(rng)
        kernel = rng.uniform(-1, 1, size=kernel.shape[:3] + (3,))
        delta = float(rng.uniform(0.01, 0.5))
        filt = amm.SegFilter(kernel, delta)
        prev = amm.seg_loss(filt, samples, enc, rw)
        for _ in range(n_iter):
            filt = amm.steepest_descent(filt, samples, 1, enc, rw)
            cur = amm.seg_loss(filt, samples, enc, rw)
            if cur > prev + 1e-12:
                return False, f"loss increased {prev} -> {cur}"
            prev = cur
    return True, f"loss non-increasing over {n_instances} random instances"


def check_crop_ladder():
    # sparse corner mask engineered to pad more than half at 1.5x
    mask = np.zeros((64, 64), dtype=np.uint8)
    for r, c in ((0, 0), (0, 1), (1, 0), (19, 19)):
        mask[r, c] = 1
    feature = np.random.default_rng(0).uniform(size=(64, 64, 2))
    rows, cols = np.nonzero(mask)
    center = (rows.mean(), cols.mean())
    fractions = {}
    for scale in amm.CROP_AREA_LADDER:
        side = max(1, int(round(np.sqrt(scale) * 20)))
        _, frac = amm.extract_square_crop(feature, center, side)
        # area oracle: intersection of the crop window with the frame
        r0 = int(np.floor(center[0] - (side - 1) / 2.0 + 0.5))
        c0 = int(np.floor(center[1] - (side - 1) / 2.0 + 0.5))
        inter_r = max(0, min(r0 + side, 64) - max(r0, 0))
        inter_c = max(0, min(c0 + side, 64) - max(c0, 0))
        want = 1.0 - inter_r * inter_c / float(side * side)
        if abs(frac - want) > 1e-12:
            return False, f"padded fraction {frac} disagrees with area oracle {want}"
        fractions[scale] = frac
    if not (fractions[2.25] > 0.5 >= fractions[1.44]):
        return False, f"expected fallback from 2.25 to 1.44, fractions {fractions}"
    sample = amm.crop_sample(feature, mask, resolution=16)
    if sample.feature.shape != (16, 16, 2):
        return False, f"sample resolution wrong: {sample.feature.shape}"
    # full-frame mask: both larger scales overflow, the ladder settles at 1.44
    full = np.ones((32, 32), dtype=np.uint8)
    _, frac_15 = amm.extract_square_crop(np.ones((32, 32, 1)), (15.5, 15.5), 48)
    want = 1.0 - 32 * 32 / float(48 * 48)
    if abs(frac_15 - want) > 1e-12:
        return False, f"whole-frame padded fraction {frac_15} != {want}"
    amm.crop_sample(np.ones((32, 32, 1)), full, resolution=16)
    return True, "ladder fallback and padded fractions match the area oracle"


def check_amm_fifo_replay(seed=14):
    rng = np.random.default_rng(seed)
    mem = amm.AmmMemory(capacity=5, resolution=4)
    admitted = []
    for i in range(40):
        prob = np.full((4, 4), rng.uniform(0.3, 0.9))
        mask = np.ones((4, 4), dtype=np.uint8)
        sample = amm.AmmSample(np.full((4, 4, 1), float(i)), mask, float(prob[0, 0]))
        if amm.amm_admit(prob, mask, 0.6):
            amm.amm_update(mem, sample)
            admitted.append(i)
    want = admitted[-5:]
    got = [int(s.feature[0, 0, 0]) for s in mem.entries]
    return got == want, f"bank holds {got}, expected admitted suffix {want}"


def check_track_loss_naive(n_instances=10, seed=15):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    worst = 0.0
    for _ in range(n_instances):
        samples, kernel = _random_glm_instance(rng)
        lam = float(rng.uniform(0.05, 0.5))
        got = glm.track_loss(glm.TrackFilter(kernel, lam), samples, fn)
        want = lam**2 * float(np.sum(kernel**2))
        acc = 0.0
        for s in samples:
            score = conv2d_naive(s.feature, kernel)[:, :, 0]
            for i in range(score.shape[0]):
                for j in range(score.shape[1]):
                    sw = fn.w_bg + (fn.w_fg - fn.w_bg) * s.label[i, j]
                    blended = s.target_region[i, j] * score[i, j] + (
                        1 - s.target_region[i, j]
                    ) * max(0.0, score[i, j])
                    acc += (sw * (blended - s.label[i, j])) ** 2
        want += acc / len(samples)
        worst = max(worst, abs(got - want) / (abs(want) + 1e-30))
    return worst < 1e-12, f"max relative deviation {worst:.3e}"


def check_track_gradient_fd(n_instances=30, seed=16):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    worst = 0.0
    tried = 0
    while tried < n_instances:
        samples, kernel = _random_glm_instance(rng)
        lam = float(rng.uniform(0.05, 0.5))
        filt = glm.TrackFilter(kernel, lam)
        # keep scores away from the hinge kink so the loss is smooth locally
        if min(
            float(np.abs(glm.track_score(s.feature, filt)).min()) for s in samples
        ) < 0.01:
            continue
        tried += 1
        got = glm.track_gradient(filt, samples, fn)
        want = fd_gradient(
            lambda kk: glm.track_loss(glm.TrackFilter(kk, lam), samples, fn), kernel
        )
        worst = max(worst, float(np.abs(got - want).max() / (np.abs(want).max() + 1e-30)))
    return worst < 1e-5, f"max relative deviation {worst:.3e} over {n_instances} instances"


def check_track_gradient_wls(n_instances=10, seed=17):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    worst = 0.0
    for _ in range(n_instances):
        samples, kernel = _random_glm_instance(rng, region="ones")
        lam = float(rng.uniform(0.05, 0.5))
        got = glm.track_gradient(glm.TrackFilter(kernel, lam), samples, fn)
        # independent weighted-least-squares gradient via dense matrices
        n = kernel.size
        want = 2.0 * lam**2 * kernel.ravel()
        for s in samples:
            a = conv_matrix_naive(s.feature, kernel.shape)
            sw2 = glm.spatial_weight(s.label, fn).ravel() ** 2
            want = want + (2.0 / len(samples)) * a.T @ (sw2 * (a @ kernel.ravel() - s.label.ravel()))
        worst = max(
            worst, float(np.abs(got.ravel() - want).max() / (np.abs(want).max() + 1e-30))
        )
    return worst < 1e-10, f"max relative deviation {worst:.3e}"


def check_gauss_newton_beta_scan(n_instances=5, seed=18, scan_points=20_001):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    for _ in range(n_instances):
        samples, kernel = _random_glm_instance(rng, ksz=1, channels=1, size=5)
        lam = float(rng.uniform(0.1, 0.5))
        filt = glm.TrackFilter(kernel, lam)
        g, beta = glm.gauss_newton_step(filt, samples, fn)

        # frozen quadratic model: residuals linearized at the current filter
        frozen_q = [glm._q_map(glm.track_score(s.feature, filt), s, fn) for s in samples]
        base_residuals = [
            glm.track_residual(glm.track_score(s.feature, filt), s, fn) for s in samples
        ]
        directions = [q * conv2d(s.feature, g)[:, :, 0] for q, s in zip(frozen_q, samples)]

        def model(b):
            acc = 0.0
            for r0, dr in zip(base_residuals, directions):
                acc += float(np.sum((r0 - b * dr) ** 2))
            acc /= len(samples)
            return acc + lam**2 * float(np.sum((kernel - b * g) ** 2))

        grid = np.linspace(0.0, 2.0 * beta, scan_points)
        values = [model(b) for b in grid]
        best = grid[int(np.argmin(values))]
        step = grid[1] - grid[0]
        if abs(best - beta) > step + 1e-15:
            return False, f"beta {beta} off frozen-model argmin {best} by more than one step"
    return True, f"beta matches the frozen-quadratic scan on {n_instances} instances"


def check_gauss_newton_ridge_case():
    fn = glm.SpatialWeightFn(0.0, 0.0)
    rng = np.random.default_rng(19)
    samples, kernel = _random_glm_instance(rng, ksz=1, channels=2, size=4)
    samples = [glm.GlmSample(s.feature, s.label, s.target_region) for s in samples]
    lam = 0.35
    filt = glm.TrackFilter(kernel, lam)
    _, beta = glm.gauss_newton_step(filt, samples, fn)
    want = 1.0 / (2.0 * lam**2)
    return abs(beta - want) < 1e-12, f"ridge-only beta {beta}, expected {want}"


def check_gauss_newton_convergence(n_instances=3, seed=20, n_iter=50, tol=1e-6):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    for _ in range(n_instances):
        samples, _ = _random_glm_instance(rng, ksz=1, channels=2, size=4, region="ones")
        shape = (1, 1, 2, 1)
        lam = 1.0
        optimum = solve_track_normal_equations(samples, fn, shape, lam)
        best = glm.track_loss(glm.TrackFilter(optimum, lam), samples, fn)
        filt = glm.optimize_filter(glm.TrackFilter(np.zeros(shape), lam), samples, n_iter, fn)
        gap = glm.track_loss(filt, samples, fn) - best
        if gap > tol:
            return False, f"loss gap to WLS-ridge optimum {gap:.3e} > {tol}"
    return True, f"converged to the WLS-ridge optimum within {tol}"


def check_optimize_filter_monotone(n_instances=100, seed=21, n_iter=8):
    rng = np.random.default_rng(seed)
    fn = glm.SpatialWeightFn()
    for _ in range(n_instances):
        samples, kernel = _random_glm_instance(rng)
        lam = float(rng.uniform(0.05, 0.5))
        start = glm.TrackFilter(kernel, lam)
        before = glm.track_loss(start, samples, fn)
        after = glm.track_loss(glm.optimize_filter(start, samples, n_iter, fn), samples, fn)
        if after > before + 1e-12:
            return False, f"loss increased {before} -> {after}"
    return True, f"final loss <= initial loss on {n_instances} random instances"


def check_glm_crop_geometry(seed=22):
    rng = np.random.default_rng(seed)
    feature = rng.uniform(-1, 1, size=(40, 40, 2))
    mask = np.zeros((40, 40), dtype=np.uint8)
    mask[10:21, 14:25] = 1
    bbox = (14, 10, 24, 20)
    prob = mask.astype(np.float64) * 0.9
    amm_side = amm.crop_sample(feature, mask, resolution=16)
    glm_side = glm.glm_make_dynamic_sample(feature, bbox, prob, resolution=16)
    if not np.allclose(amm_side.feature, glm_side.feature, atol=1e-12):
        return False, "feature crops from the two banks disagree on the same box"
    # sigma rule: crop side of 30 pixels gives a label sigma of 5
    if abs(glm.label_sigma(30) - 5.0) > 1e-15:
        return False, "label sigma rule broken"
    return True, "shared crop geometry and sigma rule hold"


def check_glm_update_source():
    base = [1.0] * 30
    if glm.glm_update_source(base) != "dynamic":
        return False, "all-equal peaks should trust dynamic snapshots"
    dead = [1.0] + [0.0] * 30
    if glm.glm_update_source(dead) != "static":
        return False, "collapsed responses should revert to the static snapshot"
    # exactly 15 high frames of 25 gives 0.6, not > 0.6
    history = [1.0] * 30 + [0.0] * 10 + [1.0] * 15
    running = np.maximum.accumulate(history)
    high = [h >= 0.5 * m for h, m in zip(history, running)][-25:]
    if sum(high) != 15:
        return False, f"replay setup broken: {sum(high)} high frames, wanted 15"
    if glm.glm_update_source(history) != "static":
        return False, "fraction exactly 0.6 must not count as consistent"
    if glm.glm_update_source([1.0] * 30 + [0.0] * 9 + [1.0] * 16) != "dynamic":
        return False, "16 of 25 high frames should trust dynamic snapshots"
    return True, "source selection matches the replayed threshold rule"


def check_fusion_elementwise(seed=23):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-2, 2, size=(5, 6, 3))
    b = rng.uniform(-2, 2, size=(5, 6, 3))
    fused = fusion.fuse(a, b)
    for i in range(5):
        for j in range(6):
            for c in range(3):
                if fused[i, j, c] != a[i, j, c] + b[i, j, c]:
                    return False, "fuse disagrees with elementwise sum"
    if not np.array_equal(fusion.fuse(a, b), fusion.fuse(b, a)):
        return False, "fuse is not bitwise commutative"
    prob = fusion.decode(fused)
    for i in range(5):
        for j in range(6):
            mean = sum(fused[i, j, c] for c in range(3)) / 3.0
            want = 1.0 / (1.0 + np.exp(-mean))
            if abs(prob[i, j] - want) > 1e-15:
                return False, "decode disagrees with the channel-mean reduction"
    return True, "fuse and decode match their elementwise oracles"


def check_extract_result_components():
    prob = np.full((8, 8), 0.1)
    prob[1, 1:6] = 0.9      # 5-pixel row component
    prob[5:6, 1:4] = 0.9    # 3-pixel row component
    res = fusion.extract_result(prob, 0)
    if res.bbox != (1, 1, 5, 1):
        return False, f"largest-component bbox wrong: {res.bbox}"
    # tie: two 2x1 components, the row-major first one wins
    prob = np.full((6, 6), 0.1)
    prob[0, 4:6] = 0.9
    prob[3, 0:2] = 0.9
    res = fusion.extract_result(prob, 0)
    if res.bbox != (4, 0, 5, 0):
        return False, f"tie-break bbox wrong: {res.bbox}"
    return True, "largest component and row-major tie-break verified"


def check_temporal_localize():
    # two plateaus: the later one is the answer
    seq = [0.0] * 10 + [1.0] * 11 + [0.0] * 19 + [1.0] * 11 + [0.0] * 5
    got = fusion.temporal_localize(seq)
    if (got.start_frame, got.end_frame) != (40, 50):
        return False, f"expected the last plateau (40, 50), got {got}"
    # plateau of width 3 survives the width-5 median
    spike = [0.0] * 20 + [1.0] * 3 + [0.0] * 20
    got = fusion.temporal_localize(spike)
    if got is None or not (20 <= got.start_frame <= got.end_frame <= 22):
        return False, f"3-wide plateau lost: {got}"
    # scale invariance
    rng = np.random.default_rng(24)
    seq = np.abs(rng.normal(size=60))
    a = fusion.temporal_localize(seq)
    b = fusion.temporal_localize(7.3 * seq)
    if a != b:
        return False, "interval changed under positive rescaling"
    if fusion.temporal_localize([0.0] * 10) is not None:
        return False, "all-zero sequence must yield no interval"
    return True, "last-plateau, median-filter, and scale-invariance checks hold"


def check_sim3_recovery(n_instances=20, seed=25):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        rot = scen._random_rotation(rng)
        scale = float(rng.uniform(0.3, 3.0))
        t = rng.uniform(-5, 5, size=3)
        want = geo3d.Sim3Transform(scale, rot, t)
        src = rng.uniform(-2, 2, size=(20, 3))
        got = geo3d.align_sim3(src, want.apply(src))
        err = max(
            abs(got.scale - scale),
            float(np.abs(got.rotation - rot).max()),
            float(np.abs(got.translation - t).max()),
        )
        if err > 1e-9:
            return False, f"noiseless recovery error {err:.3e}"
    return True, f"recovered {n_instances} random similarity transforms to 1e-9"


def check_sim3_noisy(n_seeds=50, sigma=0.01):
    for seed in range(n_seeds):
        rng = np.random.default_rng(1000 + seed)
        rot = scen._random_rotation(rng)
        scale = float(rng.uniform(0.5, 2.0))
        t = rng.uniform(-5, 5, size=3)
        want = geo3d.Sim3Transform(scale, rot, t)
        src = rng.uniform(-2, 2, size=(100, 3))
        dst = want.apply(src) + rng.normal(0.0, sigma, size=(100, 3))
        got = geo3d.align_sim3(src, dst)
        residual = got.apply(src) - dst
        rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
        if rms > 0.02:
            return False, f"seed {seed}: RMS residual {rms:.4f} > 0.02"
        if abs(got.scale - scale) / scale > 0.01:
            return False, f"seed {seed}: scale off by {abs(got.scale - scale) / scale:.4f}"
    return True, f"noisy recovery within gates across {n_seeds} seeds"


def _random_camera(rng, h=12, w=12):
    rot = scen._random_rotation(rng)
    pose = np.eye(4)
    pose[:3, :3] = rot
    pose[:3, 3] = rng.uniform(-3, 3, size=3)
    f = float(rng.uniform(100, 1000))
    intrinsics = np.array([[f, 0, w / 2.0], [0, f, h / 2.0], [0, 0, 1.0]])
    depth = rng.uniform(0.5, 5.0, size=(h, w))
    return geo3d.CameraFrame(pose, intrinsics, depth, np.zeros((h, w)))


def check_projection_round_trip(n_instances=100, seed=26):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        cam = _random_camera(rng)
        t_eta = geo3d.Sim3Transform(
            float(rng.uniform(0.5, 2.0)), scen._random_rotation(rng), rng.uniform(-2, 2, size=3)
        )
        u, v = int(rng.integers(0, 12)), int(rng.integers(0, 12))
        world = geo3d.backproject(cam, u, v, t_eta)
        # forward projection oracle: camera coords, then perspective divide
        back = t_eta.inverse().apply(world)
        cam_pt = cam.pose[:3, :3].T @ (back - cam.pose[:3, 3])
        uv = cam.intrinsics @ cam_pt
        uv = uv[:2] / uv[2]
        worst = max(worst, float(np.abs(uv - [u, v]).max()))
        worst = max(worst, abs(cam_pt[2] - cam.depth[v, u]))
        # displacement round trip: delta of a lifted pixel equals its camera ray
        delta = geo3d.relative_displacement(cam, world, t_eta)
        ray = cam.depth[v, u] * np.linalg.solve(cam.intrinsics, np.array([u, v, 1.0]))
        worst = max(worst, float(np.abs(delta - ray).max()))
    return worst < 1e-9, f"worst round-trip error {worst:.3e} over {n_instances} cameras"


def check_aggregate_oracle(seed=27):
    rng = np.random.default_rng(seed)
    contribs = [
        geo3d.ViewContribution(rng.uniform(-3, 3, size=3), float(rng.uniform(0.1, 1)), float(rng.uniform(0.1, 1)), i)
        for i in range(6)
    ]
    got = geo3d.aggregate(contribs)
    num = np.zeros(3)
    den = 0.0
    for c in contribs:
        weight = c.s_conf * c.g_conf
        num += weight * c.world_point
        den += weight
    want = num / den
    err = float(np.abs(got - want).max())
    lo = np.min([c.world_point for c in contribs], axis=0)
    hi = np.max([c.world_point for c in contribs], axis=0)
    inside = bool(np.all(got >= lo - 1e-12) and np.all(got <= hi + 1e-12))
    return err < 1e-12 and inside, f"deviation {err:.3e}, inside convex hull: {inside}"


def check_semantic_confidence_hand_case():
    prob = np.array([[0.9, 0.3], [0.0, 0.0]])
    mask = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    got = geo3d.semantic_confidence(prob, mask, 0.5)
    want = (0.6 + 0.9 + 0.9) / 3.0
    return abs(got - want) < 1e-12, f"got {got}, expected {want}"


# -- pipeline and harness checks ----------------------------------------------


def _small_identity_params(n_frames=8):
    return scen.ScenarioParams("identity", n_frames=n_frames, canvas=(32, 32), object_size=13)


def _unit_kernel_config():
    return PipelineConfig(seg_kernel_size=1, track_kernel_size=1)


def check_pipeline_identity():
    scenario = scen.gen_scenario(7, _small_identity_params())
    pipe = Pipeline(scenario.query, _unit_kernel_config())
    result = pipe.step_frame(scenario.frames[0].feature, 0)
    if result.bbox is None:
        return False, "no detection on the query frame itself"
    iou = metrics.box_iou(result.bbox, scenario.frames[0].gt_bbox)
    if result.s_conf <= 0.6:
        return False, f"confidence {result.s_conf:.3f} not above the admit threshold"
    if iou != 1.0:
        return False, f"IoU on the identity frame is {iou:.3f}, not 1.0"
    return True, f"s_conf {result.s_conf:.3f}, IoU 1.0 on the identity frame"


def check_pipeline_null_frame():
    scenario = scen.gen_scenario(7, _small_identity_params())
    pipe = Pipeline(scenario.query, _unit_kernel_config())
    size_before = len(pipe.amm_memory)
    background = scenario.frames[0].feature.copy()
    background[:, :, :] = background[0, 0, :]  # ambient texture only, no target
    result = pipe.step_frame(background, 0)
    grew = len(pipe.amm_memory) != size_before or pipe.glm_memory.dynamic_entries
    if result.mask.any() or result.s_conf != 0.0 or result.bbox is not None:
        return False, f"background frame produced a detection: s_conf {result.s_conf}"
    if grew:
        return False, "banks grew on a background frame"
    return True, "background frame: empty mask, zero confidence, no bank growth"


def check_pipeline_initialization():
    scenario = scen.gen_scenario(3, _small_identity_params())
    pipe = Pipeline(scenario.query, _unit_kernel_config())
    if len(pipe.amm_memory) != 4:
        return False, f"bank holds {len(pipe.amm_memory)} entries, expected query + 3 augmentations"
    static = pipe.glm_memory.static_entry
    rebuilt = glm.glm_make_dynamic_sample(
        scenario.query.feature,
        min_bounding_rect(zip(*np.nonzero(scenario.query.mask))),
        (scenario.query.mask != 0).astype(np.float64),
        pipe.cfg.sample_resolution,
        kind="static",
    )
    if not np.array_equal(static.feature, rebuilt.feature):
        return False, "static snapshot does not equal the un-augmented query sample"
    finite = np.isfinite(pipe.seg_filter.kernel).all() and np.isfinite(pipe.track_filter.kernel).all()
    return bool(finite), "bank seeded with 4 samples; filters finite"


def check_update_cadence():
    cfg = PipelineConfig()
    scenario = scen.gen_scenario(5, _small_identity_params())
    pipe = Pipeline(scenario.query, cfg)
    want = [t for t in range(201) if t < 100 or t % 25 == 0]
    got = [t for t in range(201) if pipe._is_update_frame(t)]
    return got == want, f"update frames over 0..200: {len(got)} events, expected {len(want)}"


def check_halt_revert():
    scenario = scen.gen_scenario(11, _small_identity_params(n_frames=4))
    cfg = PipelineConfig(seg_kernel_size=1, track_kernel_size=1, halt_window=6)
    pipe = Pipeline(scenario.query, cfg)
    initial_amm = [s.feature.copy() for s in pipe.amm_memory.entries]
    target = scenario.frames[0].feature
    background = target.copy()
    background[:, :, :] = background[0, 0, :]
    for t in range(3):
        pipe.step_frame(target, t)
    if len(pipe.amm_memory) <= len(initial_amm):
        return False, "bank did not grow on confident frames"
    for t in range(3, 3 + cfg.halt_window):
        pipe.step_frame(background, t)
    if not pipe.halted:
        return False, "halt did not trigger on sustained low confidence"
    if len(pipe.amm_memory) != len(initial_amm) or pipe.glm_memory.dynamic_entries:
        return False, "banks were not reverted to their initial contents"
    for got, want in zip(pipe.amm_memory.entries, initial_amm):
        if not np.array_equal(got.feature, want):
            return False, "reverted bank entries are not bit-identical"
    pipe.step_frame(target, 40)
    if len(pipe.amm_memory) != len(initial_amm):
        return False, "bank grew after the halt"
    return True, "halt reverts banks bit-identically and freezes them"


def check_glm_static_immutable(seed=28):
    rng = np.random.default_rng(seed)
    static = glm.GlmSample(
        rng.uniform(-1, 1, size=(6, 6, 2)),
        gaussian_label((2.5, 2.5), 1.0, (6, 6)),
        np.ones((6, 6)),
        kind="static",
    )
    frozen = (static.feature.copy(), static.label.copy(), static.target_region.copy())
    mem = glm.GlmMemory(static, capacity=4)
    for i in range(10):
        mem.add_dynamic(
            glm.GlmSample(
                rng.uniform(-1, 1, size=(6, 6, 2)),
                gaussian_label((2.5, 2.5), 1.0, (6, 6)),
                rng.random((6, 6)),
            )
        )
        glm.optimize_filter(glm.TrackFilter.zeros(1, 2), mem, 2, glm.SpatialWeightFn())
        if len(mem) > 4:
            return False, f"bank size {len(mem)} exceeded capacity"
    same = all(np.array_equal(a, b) for a, b in zip(frozen, (static.feature, static.label, static.target_region)))
    if not same:
        return False, "static snapshot mutated"
    if len(mem.dynamic_entries) != 3:
        return False, f"dynamic FIFO holds {len(mem.dynamic_entries)}, expected capacity - 1"
    return True, "static snapshot bit-identical, FIFO capped at capacity - 1"


def check_scenario_determinism():
    a = scen.gen_scenario(9, scen.preset_params("identity"))
    b = scen.gen_scenario(9, scen.preset_params("identity"))
    same = all(
        np.array_equal(fa.feature, fb.feature) and np.array_equal(fa.gt_mask, fb.gt_mask)
        for fa, fb in zip(a.frames, b.frames)
    )
    return same, "same seed reproduces identical frames"


def check_drift_similarity_decay():
    scenario = scen.gen_scenario(5, scen.preset_params("drift"))
    q = scenario.query.feature[24, 24, :]
    sims = []
    for frame in scenario.frames:
        sig = frame.feature[24, 24, :]
        sims.append(float(q @ sig / (np.linalg.norm(q) * np.linalg.norm(sig))))
    diffs = np.diff(sims)
    monotone = bool(np.all(diffs <= 1e-12))
    span = sims[0] - sims[-1]
    return monotone and span > 0.5, f"cosine decays monotonically by {span:.3f}"


def check_eval2d_hand_cases():
    scenario = scen.gen_scenario(13, scen.preset_params("identity"))
    gt = scen.ground_truth_track(scenario)
    report = metrics.eval_2d(gt, scenario)
    if (report.t_ap25, report.st_ap25, report.recovery_pct, report.success_pct) != (1.0, 1.0, 100.0, 100.0):
        return False, f"ground-truth track does not score perfectly: {report}"
    # prediction shifted left by half the annotated length: tIoU 1/3, and with
    # perfect boxes only inside the claimed interval, recovery is 50%
    shifted = scen.Scenario(
        seed=scenario.seed,
        params=scenario.params,
        frames=scenario.frames,
        query=scenario.query,
        gt_interval=(24, 47),
    )
    base = scen.ground_truth_track(scenario)
    results = [
        fusion.SegmentationResult(
            r.prob, r.mask, r.bbox if 12 <= r.frame_index <= 35 else None, r.s_conf, r.frame_index
        )
        for r in base.results
    ]
    pred = TrackOutput(results, fusion.TemporalInterval(12, 35), base.peaks)
    t_iou = metrics.temporal_iou((12, 35), (24, 47))
    if abs(t_iou - 1.0 / 3.0) > 1e-12:
        return False, f"temporal IoU {t_iou} != 1/3"
    report = metrics.eval_2d(pred, shifted)
    if report.t_ap25 != 1.0 or abs(report.recovery_pct - 50.0) > 1e-9:
        return False, f"half-overlap case wrong: {report}"
    return True, "perfect and half-overlap hand cases hold"


def check_geo_aggregation():
    scenario = scen.gen_scenario(21, scen.preset_params("geo"))
    track = finalize_3d(
        scen.ground_truth_track(scenario),
        scenario.cameras,
        (scenario.alignment_src, scenario.alignment_dst),
    )
    err = float(np.abs(track.world_point - scenario.gt_point).max())
    if err > 1e-6:
        return False, f"aggregated point off ground truth by {err:.3e}"
    report = metrics.eval_3d(track, scenario)
    if report.l2 is None or report.l2 > 1e-5 or report.angle > 1e-5:
        return False, f"3D report out of tolerance: {report}"
    return True, f"aggregate within {err:.1e} of ground truth; L2 {report.l2:.1e}"


def check_geo_weight_suppression():
    params = scen.preset_params("geo")
    corrupted = scen.gen_scenario(21, replace(params, corrupt_views=(4,)))
    clean_subset = scen.gen_scenario(21, params)
    full = finalize_3d(
        scen.ground_truth_track(corrupted),
        corrupted.cameras,
        (corrupted.alignment_src, corrupted.alignment_dst),
    )
    pruned_track = scen.ground_truth_track(clean_subset)
    pruned_track.results = pruned_track.results[:4]
    pruned_track.interval = fusion.TemporalInterval(0, 3)
    pruned = finalize_3d(
        pruned_track, clean_subset.cameras, (clean_subset.alignment_src, clean_subset.alignment_dst)
    )
    shift = float(np.abs(full.world_point - pruned.world_point).max())
    weight = geo3d.geometric_confidence(20.0, 1.0)
    return shift < 1e-6 and weight < 1e-8, f"aggregate shift {shift:.2e}, corrupted weight {weight:.2e}"


def check_scenario_roundtrip(tmp_dir=None):
    import os
    import tempfile

    from . import fileio

    scenario = scen.gen_scenario(31, _small_identity_params(n_frames=3))
    with tempfile.TemporaryDirectory(dir=tmp_dir) as work:
        path_a = os.path.join(work, "a.json")
        path_b = os.path.join(work, "b.json")
        fileio.save_scenario(scenario, path_a)
        fileio.save_scenario(fileio.load_scenario(path_a), path_b)
        with open(path_a, "rb") as fha, open(path_b, "rb") as fhb:
            same = fha.read() == fhb.read()
    return same, "serialize -> parse -> serialize is byte-identical"


CHECKS = {
    "core.conv2d_vs_naive_loop": check_conv_naive,
    "core.transpose_adjoint_identity": check_adjoint_identity,
    "core.kernel_gradient_finite_difference": check_kernel_gradient_fd,
    "core.connected_components_vs_union_find": check_connected_components,
    "core.min_bounding_rect_reduction": check_min_bounding_rect,
    "core.median_filter_sort_oracle": check_median_filter,
    "amm.pseudo_label_boundary_scan": check_pseudo_label_boundary,
    "amm.reweight_gaussian_oracle": check_reweight_blur,
    "amm.seg_loss_scalar_loop": check_seg_loss_naive,
    "amm.seg_gradient_finite_difference": check_seg_gradient_fd,
    "amm.gradient_stationary_at_optimum": check_seg_stationarity,
    "amm.step_size_line_scan": check_steepest_step_scan,
    "amm.step_size_special_cases": check_steepest_special_cases,
    "amm.descent_reaches_closed_form": check_steepest_convergence,
    "amm.descent_monotone": check_steepest_monotone,
    "amm.crop_ladder_area_oracle": check_crop_ladder,
    "amm.fifo_replay": check_amm_fifo_replay,
    "glm.track_loss_scalar_loop": check_track_loss_naive,
    "glm.track_gradient_finite_difference": check_track_gradient_fd,
    "glm.track_gradient_wls_case": check_track_gradient_wls,
    "glm.beta_frozen_quadratic_scan": check_gauss_newton_beta_scan,
    "glm.beta_ridge_case": check_gauss_newton_ridge_case,
    "glm.gauss_newton_reaches_wls_ridge": check_gauss_newton_convergence,
    "glm.optimizer_never_increases_loss": check_optimize_filter_monotone,
    "glm.crop_geometry_shared": check_glm_crop_geometry,
    "glm.update_source_replay": check_glm_update_source,
    "fusion.fuse_decode_elementwise": check_fusion_elementwise,
    "fusion.largest_component_bbox": check_extract_result_components,
    "fusion.temporal_localization": check_temporal_localize,
    "geo3d.sim3_noiseless_recovery": check_sim3_recovery,
    "geo3d.sim3_noisy_recovery": check_sim3_noisy,
    "geo3d.projection_round_trips": check_projection_round_trip,
    "geo3d.aggregate_scalar_loop": check_aggregate_oracle,
    "geo3d.semantic_confidence_hand_case": check_semantic_confidence_hand_case,
    "pipeline.identity_frame_exact": check_pipeline_identity,
    "pipeline.null_frame_empty": check_pipeline_null_frame,
    "pipeline.initialization": check_pipeline_initialization,
    "pipeline.update_cadence": check_update_cadence,
    "pipeline.halt_reverts_banks": check_halt_revert,
    "pipeline.glm_static_immutable": check_glm_static_immutable,
    "harness.scenario_determinism": check_scenario_determinism,
    "harness.drift_similarity_decay": check_drift_similarity_decay,
    "harness.eval2d_hand_cases": check_eval2d_hand_cases,
    "harness.geo_aggregation_exact": check_geo_aggregation,
    "harness.geo_weight_suppression": check_geo_weight_suppression,
    "harness.scenario_file_roundtrip": check_scenario_roundtrip,
}


def run_checks(name_filter: str | None = None, max_workers: int | None = None):
    """Run (a filtered subset of) the registry, optionally in parallel.

    Returns a list of (name, passed, detail) in registry order.
    """
    from concurrent.futures import ThreadPoolExecutor

    names = [n for n in CHECKS if name_filter is None or name_filter in n]
    if max_workers is None or max_workers <= 1 or len(names) <= 1:
        return [(name, *_run_one(name)) for name in names]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {name: pool.submit(_run_one, name) for name in names}
        return [(name, *futures[name].result()) for name in names]


def _run_one(name: str) -> tuple[bool, str]:
    try:
        return CHECKS[name]()
    except Exception as exc:  # a crash is a failure, not an abort
        return False, f"raised {type(exc).__name__}: {exc}"

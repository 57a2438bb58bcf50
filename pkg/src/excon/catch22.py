"""The 22 canonical catch22 time-series features.

Each evaluator takes a raw 1-D series, z-scores it with the sample standard
deviation, and returns a float; this mirrors the reference C implementation
feature by feature (bin edges, tie handling, integer truncations). Outputs are
not sanitized here; ``features`` does that.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels

FEATURE_NAMES = (
    "DN_HistogramMode_5",
    "DN_HistogramMode_10",
    "CO_f1ecac",
    "CO_FirstMin_ac",
    "CO_HistogramAMI_even_2_5",
    "CO_trev_1_num",
    "MD_hrv_classic_pnn40",
    "SB_BinaryStats_mean_longstretch1",
    "SB_TransitionMatrix_3ac_sumdiagcov",
    "PD_PeriodicityWang_th0_01",
    "CO_Embed2_Dist_tau_d_expfit_meandiff",
    "IN_AutoMutualInfoStats_40_gaussian_fmmi",
    "FC_LocalSimple_mean1_tauresrat",
    "DN_OutlierInclude_p_001_mdrmd",
    "DN_OutlierInclude_n_001_mdrmd",
    "SP_Summaries_welch_rect_area_5_1",
    "SB_BinaryStats_diff_longstretch0",
    "SB_MotifThree_quantile_hh",
    "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
    "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
    "SP_Summaries_welch_rect_centroid",
    "FC_LocalSimple_mean3_stderr",
)

# The reference hard-codes this truncated value in the spectral features.
_PI = 3.14159265359


def zscore(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return (y - y.mean()) / y.std(ddof=1)


# ---------------------------------------------------------------- helpers


def _nextpow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def autocorr(y: np.ndarray) -> np.ndarray:
    """Biased autocorrelation ``sum(x_t x_{t+k}) / sum(x_t^2)`` for all lags, via FFT."""
    x = y - y.mean()
    nfft = 2 * _nextpow2(y.size)
    f = np.fft.rfft(x, nfft)
    ac = np.fft.irfft(f.real**2 + f.imag**2, nfft)[: y.size]
    return ac / ac[0]


def first_zero_ac(y: np.ndarray, maxtau: int) -> int:
    ac = autocorr(y)
    tau = 0
    while tau < maxtau and tau < y.size and ac[tau] > 0:
        tau += 1
    return tau


def _histcounts(y: np.ndarray, n_bins: int):
    lo, hi = y.min(), y.max()
    step = (hi - lo) / n_bins
    idx = ((y - lo) / step).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    edges = np.arange(n_bins + 1) * step + lo
    return counts, edges


def _quantile(sorted_y: np.ndarray, quant: float) -> float:
    size = sorted_y.size
    q = 0.5 / size
    if quant < q:
        return float(sorted_y[0])
    if quant > 1 - q:
        return float(sorted_y[-1])
    qi = size * quant - 0.5
    left, right = int(math.floor(qi)), int(math.ceil(qi))
    if left == right:
        return float(sorted_y[left])
    return float(sorted_y[left] + (qi - left) * (sorted_y[right] - sorted_y[left]) / (right - left))


def _coarsegrain_quantile(y: np.ndarray, n_groups: int) -> np.ndarray:
    """Labels 1..n_groups by equiprobable quantile bins (reference semantics)."""
    s = np.sort(y)
    # the reference builds its linspace by repeated addition
    ls, acc, step = [], 0.0, 1.0 / n_groups
    for _ in range(n_groups + 1):
        ls.append(acc)
        acc += step
    th = [_quantile(s, q) for q in ls]
    th[0] -= 1
    labels = np.zeros(y.size, dtype=np.int64)
    for i in range(n_groups):
        labels[(y > th[i]) & (y <= th[i + 1])] = i + 1
    return labels


def _linreg(x: np.ndarray, y: np.ndarray):
    n = x.size
    sumx, sumx2, sumxy, sumy = x.sum(), (x * x).sum(), (x * y).sum(), y.sum()
    denom = n * sumx2 - sumx * sumx
    if denom == 0:
        return 0.0, 0.0
    return (n * sumxy - sumx * sumy) / denom, (sumy * sumx2 - sumx * sumxy) / denom


# ---------------------------------------------------------------- features


def histogram_mode(y: np.ndarray, n_bins: int) -> float:
    counts, edges = _histcounts(y, n_bins)
    best = counts.max()
    centres = (edges[:-1] + edges[1:]) / 2
    return float(centres[counts == best].mean())


def f1ecac(y: np.ndarray) -> float:
    ac = autocorr(y)
    thresh = 1.0 / math.e
    for i in range(y.size - 2):
        if ac[i + 1] < thresh:
            m = ac[i + 1] - ac[i]
            return float(i + (thresh - ac[i]) / m)
    return float(y.size)


def first_min_ac(y: np.ndarray) -> float:
    ac = autocorr(y)
    for i in range(1, y.size - 1):
        if ac[i] < ac[i - 1] and ac[i] < ac[i + 1]:
            return float(i)
    return float(y.size)


def histogram_ami_even(y: np.ndarray, tau: int = 2, n_bins: int = 5) -> float:
    lo, hi = y.min(), y.max()
    step = (hi - lo + 0.2) / n_bins
    edges = lo + step * np.arange(n_bins + 1) - 0.1
    b1 = np.searchsorted(edges, y[:-tau], side="right")
    b2 = np.searchsorted(edges, y[tau:], side="right")
    ok = (b1 >= 1) & (b1 <= n_bins) & (b2 >= 1) & (b2 <= n_bins)
    joint = np.zeros((n_bins, n_bins))
    np.add.at(joint, (b1[ok] - 1, b2[ok] - 1), 1.0)
    joint /= ok.sum()
    p1, p2 = joint.sum(axis=1), joint.sum(axis=0)
    ami = 0.0
    for i in range(n_bins):
        for j in range(n_bins):
            if joint[i, j] > 0:
                ami += joint[i, j] * math.log(joint[i, j] / p1[i] / p2[j])
    return ami


def trev_1_num(y: np.ndarray) -> float:
    d = np.diff(y)
    return float(np.mean(d * d * d))


def hrv_pnn40(y: np.ndarray) -> float:
    return float(np.mean(np.abs(np.diff(y)) * 1000 > 40))


def _longest_stretch(ybin: np.ndarray, mark: int) -> float:
    n = ybin.size
    longest, last = 0, 0
    for i in range(n):
        if ybin[i] == mark or i == n - 1:
            longest = max(longest, i - last)
            last = i
    return float(longest)


def binary_stats_mean_longstretch1(y: np.ndarray) -> float:
    ybin = (y[:-1] - y.mean() > 0).astype(np.int64)
    return _longest_stretch(ybin, 0)


def binary_stats_diff_longstretch0(y: np.ndarray) -> float:
    ybin = (np.diff(y) >= 0).astype(np.int64)
    return _longest_stretch(ybin, 1)


def transition_matrix_3ac_sumdiagcov(y: np.ndarray) -> float:
    if np.all(y == y[0]):
        return math.nan
    n_groups = 3
    tau = first_zero_ac(y, y.size)
    n_down = (y.size - 1) // tau + 1
    labels = _coarsegrain_quantile(y[::tau][:n_down], n_groups) - 1
    t = np.zeros((n_groups, n_groups))
    np.add.at(t, (labels[:-1], labels[1:]), 1.0)
    t /= n_down - 1
    # sum over columns of each column's sample variance
    return float(sum(np.var(t[:, j], ddof=1) for j in range(n_groups)))


def _spline_detrend(y: np.ndarray) -> np.ndarray:
    """Residual of a least-squares cubic spline with knots at 0, n/2-1, n-1."""
    n = y.size
    x = np.arange(n, dtype=np.float64)
    knot = float(n // 2 - 1)
    basis = np.column_stack([np.ones(n), x, x * x, x**3, np.clip(x - knot, 0, None) ** 3])
    # scale columns for conditioning; lstsq returns the same fitted values
    scale = np.abs(basis).max(axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(basis / scale, y, rcond=None)
    return y - (basis / scale) @ coef


def periodicity_wang(y: np.ndarray, th: float = 0.01) -> float:
    n = y.size
    ysub = _spline_detrend(y)
    acmax = int(math.ceil(n / 3.0))
    acf = np.array([np.dot(ysub[: n - tau], ysub[tau:]) / (n - tau) for tau in range(1, acmax + 1)])
    troughs, peaks = [], []
    for i in range(1, acmax - 1):
        slope_in = acf[i] - acf[i - 1]
        slope_out = acf[i + 1] - acf[i]
        if slope_in < 0 and slope_out > 0:
            troughs.append(i)
        elif slope_in > 0 and slope_out < 0:
            peaks.append(i)
    j = -1
    for ipeak in peaks:
        the_peak = acf[ipeak]
        while j + 1 < len(troughs) and troughs[j + 1] < ipeak:
            j += 1
        if j == -1:
            continue
        if the_peak - acf[troughs[j]] < th or the_peak < 0:
            continue
        return float(ipeak)
    return 0.0


def embed2_dist_expfit_meandiff(y: np.ndarray) -> float:
    n = y.size
    tau = first_zero_ac(y, n)
    if tau > n / 10:
        tau = int(math.floor(n / 10))
    m = n - tau - 1
    d = np.sqrt((y[1 : m + 1] - y[:m]) ** 2 + (y[tau : tau + m] - y[tau + 1 : tau + 1 + m]) ** 2)
    if d.size < 2:
        return math.nan
    mean_d = d.mean()
    sd = d.std(ddof=1)
    if sd < 0.001:
        return 0.0
    n_bins = int(math.ceil((d.max() - d.min()) / (3.5 * sd / math.pow(d.size, 1 / 3.0))))
    if n_bins == 0:
        return 0.0
    counts, edges = _histcounts(d, n_bins)
    centres = (edges[:-1] + edges[1:]) * 0.5
    expf = np.exp(-centres / mean_d) / mean_d
    expf[expf < 0] = 0
    return float(np.mean(np.abs(counts / m - expf)))


def auto_mutual_info_gaussian_fmmi(y: np.ndarray, max_tau: int = 40) -> float:
    n = y.size
    tau = min(max_tau, int(math.ceil(n / 2.0)))
    if tau < 3:
        return float(tau)
    ami = np.empty(tau)
    for i in range(tau):
        lag = i + 1
        a, b = y[: n - lag], y[lag:]
        r = np.corrcoef(a, b)[0, 1] if a.size > 1 else math.nan
        ami[i] = -0.5 * math.log(1 - r * r)
    for i in range(1, tau - 1):
        if ami[i] < ami[i - 1] and ami[i] < ami[i + 1]:
            return float(i)
    return float(tau)


def _local_simple_residuals(y: np.ndarray, train_length: int) -> np.ndarray:
    n = y.size - train_length
    acc = np.zeros(n)
    for j in range(train_length):
        acc = acc + y[j : j + n]
    return y[train_length:] - acc / train_length


def local_simple_mean1_tauresrat(y: np.ndarray) -> float:
    res = _local_simple_residuals(y, 1)
    return first_zero_ac(res, res.size) / first_zero_ac(y, y.size)


def local_simple_mean3_stderr(y: np.ndarray) -> float:
    res = _local_simple_residuals(y, 3)
    if res.size < 2:
        return math.nan
    return float(res.std(ddof=1))


def outlier_include_mdrmd(y: np.ndarray, sign: int) -> float:
    n = y.size
    if np.all(y == y[0]):
        return 0.0
    inc = 0.01
    yw = sign * y
    total = int((yw >= 0).sum())
    max_val = yw.max()
    if max_val < inc:
        return 0.0
    n_thresh = int(max_val / inc + 1)
    counts, med = kernels.outlier_stats(yw, n_thresh, inc)
    pct = (counts - 1) * 100.0 / total
    above = np.flatnonzero(pct > 2)
    mj = int(above[-1]) if above.size else 0
    singles = np.flatnonzero(counts - 1 == 0)
    fbi = int(singles[0]) if singles.size else n_thresh - 1
    trim = min(mj, fbi)
    rel = med / (n / 2.0) - 1
    return float(np.median(rel[: trim + 1]))


def _welch_rect(y: np.ndarray):
    n = y.size
    nfft = _nextpow2(n)
    f = np.fft.fft(y - y.mean(), nfft)
    n_out = nfft // 2 + 1
    s = (f.real**2 + f.imag**2)[:n_out] / n
    s[1 : n_out - 1] *= 2
    w = 2 * _PI * np.arange(n_out) / nfft
    return s / (2 * _PI), w


def welch_rect_area_5_1(y: np.ndarray) -> float:
    sw, w = _welch_rect(y)
    dw = w[1] - w[0]
    k = sw.size // 5
    return float(np.sum(sw[:k] * dw))


def welch_rect_centroid(y: np.ndarray) -> float:
    sw, w = _welch_rect(y)
    cs = np.cumsum(sw)
    hit = np.flatnonzero(cs > cs[-1] * 0.5)
    return float(w[hit[0]]) if hit.size else 0.0


def motif_three_quantile_hh(y: np.ndarray) -> float:
    labels = _coarsegrain_quantile(y, 3) - 1
    n = y.size
    pairs = np.zeros((3, 3))
    np.add.at(pairs, (labels[:-1], labels[1:]), 1.0)
    p = pairs.ravel() / (n - 1)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def fluct_anal_2_50_1_logi_prop_r1(y: np.ndarray, lag: int, dfa: bool) -> float:
    n = y.size
    lin_low, lin_high = math.log(5), math.log(n // 2)
    n_tau_steps = 50
    step = (lin_high - lin_low) / (n_tau_steps - 1)
    taus = []
    for i in range(n_tau_steps):
        t = int(math.floor(math.exp(lin_low + i * step) + 0.5))
        if not taus or t != taus[-1]:
            taus.append(t)
    ntt = len(taus)
    if ntt < 12:
        return 0.0
    ycs = np.cumsum(y[::lag][: n // lag])
    fvals = kernels.fluct_fvals(ycs, np.asarray(taus, dtype=np.int64), dfa)
    logtt = np.log(np.asarray(taus, dtype=np.float64))
    with np.errstate(divide="ignore"):
        logff = np.log(fvals)
    min_points = 6
    sserr = np.full(ntt - 2 * min_points + 1, math.inf)
    for i in range(min_points, ntt - min_points + 1):
        m1, b1 = _linreg(logtt[:i], logff[:i])
        m2, b2 = _linreg(logtt[i - 1 :], logff[i - 1 :])
        r1 = logtt[:i] * m1 + b1 - logff[:i]
        r2 = logtt[i - 1 :] * m2 + b2 - logff[i - 1 :]
        sserr[i - min_points] = math.sqrt(np.dot(r1, r1)) + math.sqrt(np.dot(r2, r2))
    valid = ~np.isnan(sserr)
    if not valid.any():
        return math.nan
    first_min = int(np.flatnonzero(sserr == sserr[valid].min())[0]) + min_points - 1
    return (first_min + 1) / ntt


_EVALUATORS = (
    lambda y: histogram_mode(y, 5),
    lambda y: histogram_mode(y, 10),
    f1ecac,
    first_min_ac,
    histogram_ami_even,
    trev_1_num,
    hrv_pnn40,
    binary_stats_mean_longstretch1,
    transition_matrix_3ac_sumdiagcov,
    periodicity_wang,
    embed2_dist_expfit_meandiff,
    auto_mutual_info_gaussian_fmmi,
    local_simple_mean1_tauresrat,
    lambda y: outlier_include_mdrmd(y, 1),
    lambda y: outlier_include_mdrmd(y, -1),
    welch_rect_area_5_1,
    binary_stats_diff_longstretch0,
    motif_three_quantile_hh,
    lambda y: fluct_anal_2_50_1_logi_prop_r1(y, 1, False),
    lambda y: fluct_anal_2_50_1_logi_prop_r1(y, 2, True),
    welch_rect_centroid,
    local_simple_mean3_stderr,
)


def _on_zscored(fn):
    def evaluate(series):
        with np.errstate(all="ignore"):
            try:
                return float(fn(zscore(series)))
            except (ZeroDivisionError, ValueError, IndexError, FloatingPointError):
                return math.nan

    return evaluate


EVALUATORS = tuple(_on_zscored(fn) for fn in _EVALUATORS)


def catch22_all(series) -> np.ndarray:
    """Unsanitized 22-vector in ``FEATURE_NAMES`` order."""
    y = np.asarray(series, dtype=np.float64)
    return np.array([ev(y) for ev in EVALUATORS])

"""Monte Carlo fluid-flow evaluation of the cached network.

The throughput of a scheme is the largest rate ``R`` that every user can
receive at once, given expected link rates and expected relay loads:

* every BS time-shares its inter-BS subband over its outgoing relay links,
* every BS serves its users by TDMA on its downlink subband,
* every user gets its round-robin share of the Co-MIMO band.

All rates per Hz depend on the band split only through the per-BS transmit
power density ``P / W'``, so link geometry, loads and Co-MIMO beam gains are
computed once and the split is optimised afterwards.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import optimize, stats

from . import analysis
from .caching import build_cache_plan, is_full, optimal_replication, uniform_replication, zipf
from .channel import ChannelParams, aggregate_capacity_ub_cdwn, aggregate_capacity_ub_udwn
from .comimo import sample_comimo
from .multihop import (build_load_model, class_request_weights, sources_needed,
                       color_frequencies, measure_relay_load, trace_routes)
from .topology import (NetworkTopology, PlacementParams, generate_perturbed_grid,
                       generate_regular, read_topology)

SCHEMES = ("A", "B", "none")
SWEEP_AXES = ("B_C", "tau", "N", "N_c", "SNR")


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one simulation run.

    Field names double as configuration-file keys, so physical quantities
    carry their unit in the name.
    """

    scheme: str = "A"
    # topology
    topology: str = "regular"            # regular | perturbed | file
    topology_file: str = ""
    n_side: int = 12
    cell_pitch_m: float = 100.0
    user_offset_m: float = 25.0          # regular grid only
    n_users: int = 900                   # perturbed grid only
    r_min_m: float = 50.0
    r_max_m: float = 75.0 * math.sqrt(2.0)
    d_min_m: float = 10.0
    k_max: int = 8
    jitter_side_m: float = 50.0
    n_backhaul: int = 10
    # channel
    alpha: float = 3.5
    gain_bs: float = 1.0
    gain_user: float = 1.0
    noise_psd_w_per_hz: float = 1e-9
    bandwidth_hz: float = 1e6
    snr_db: float = 20.0
    snr_reference_m: float = 0.0         # 0: user offset (regular) or half the pitch
    power_w: float = 0.0                 # > 0 overrides snr_db
    # content and caches
    n_files: int = 50
    files_per_bs: float = 0.0            # > 0: n_files = round(files_per_bs * N) on N sweeps
    tau: float = 1.5
    cache_size_bits: float = 0.0
    cache_size_files: float = 1.0        # B_C / F; used when cache_size_bits is 0
    file_size_bits: float = 8e9
    segment_size_bits: int = 8_000_000
    replication: str = "optimal"         # optimal | uniform
    uncovered_files: str = "backhaul"    # backhaul | error: files needing more sources than BSs
    # transmission
    split: str = "optimize"              # optimize | explicit
    split_inter_hz: float = 0.0
    split_comimo_hz: float = 0.0
    cluster_size: int = 9
    reuse_radius_inter_m: float = 0.0    # 0: 2.5 cell pitches
    reuse_radius_downlink_m: float = 0.0 # 0: 1.5 cell pitches
    coloring: str = "auto"               # auto | greedy | tiling
    guard_band: bool = False
    # Monte Carlo
    n_phase_draws: int = 100
    n_request_draws: int = 0             # 0: exact expected loads
    topology_seed: int = 1
    phase_seed: int = 2
    request_seed: int = 3

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.topology not in ("regular", "perturbed", "file"):
            raise ValueError("topology must be regular, perturbed or file")
        if self.topology == "file" and not self.topology_file:
            raise ValueError("topology_file is required for topology = file")
        if self.split not in ("optimize", "explicit"):
            raise ValueError("split must be optimize or explicit")
        if self.coloring not in ("auto", "greedy", "tiling"):
            raise ValueError("coloring must be auto, greedy or tiling")
        if self.replication not in ("optimal", "uniform"):
            raise ValueError("replication must be optimal or uniform")
        if self.uncovered_files not in ("backhaul", "error"):
            raise ValueError("uncovered_files must be backhaul or error")
        if self.n_phase_draws < 1 or self.n_request_draws < 0:
            raise ValueError("draw counts must be positive")
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be at least 1")
        if self.bandwidth_hz <= 0 or self.file_size_bits <= 0 or self.segment_size_bits <= 0:
            raise ValueError("bandwidth, file and segment sizes must be positive")
        if self.scheme != "none" and self.budget <= 0:
            raise ValueError("a cache size (cache_size_bits or cache_size_files) is required")

    @property
    def budget(self) -> float:
        """Normalised cache size ``B_C / F``."""
        if self.cache_size_bits > 0:
            return self.cache_size_bits / self.file_size_bits
        return self.cache_size_files

    @property
    def cache_bits(self) -> float:
        return self.cache_size_bits if self.cache_size_bits > 0 else self.cache_size_files * self.file_size_bits


@dataclass
class SimResult:
    """Outcome of one run.

    ``per_user_throughput`` is ``NaN`` for users that cannot be served.
    ``bound_interval`` is the closed-form per-BS interval on regular grids.
    ``backhaul_classes`` counts replication classes too rare to rebuild
    from the caches of the whole network, which are fetched over the backhaul.
    """

    scheme: str
    per_user_throughput: np.ndarray
    per_bs_throughput: np.ndarray
    aggregate: float
    rate: float
    split: tuple
    per_link_utilization: dict
    bound_bps: float
    bound_interval: tuple | None = None
    infeasible_users: tuple = ()
    errors: list = field(default_factory=list)
    terms: dict = field(default_factory=dict)
    backhaul_classes: int = 0

    @property
    def per_bs_mean(self) -> float:
        return float(np.mean(self.per_bs_throughput))


# ------------------------------------------------------------------ setup

def build_topology(cfg: SimConfig) -> NetworkTopology:
    if cfg.topology == "regular":
        return generate_regular(cfg.n_side, cfg.cell_pitch_m, cfg.user_offset_m, cfg.n_backhaul)
    if cfg.topology == "perturbed":
        n = cfg.n_side ** 2
        pp = PlacementParams(n, cfg.n_users, cfg.r_min_m, cfg.r_max_m, cfg.d_min_m, cfg.k_max,
                             cfg.n_backhaul, cfg.cell_pitch_m)
        return generate_perturbed_grid(pp, cfg.jitter_side_m, cfg.topology_seed)
    return read_topology(cfg.topology_file)


def channel_params(cfg: SimConfig, topology: NetworkTopology) -> ChannelParams:
    kw = dict(alpha=cfg.alpha, G_b=cfg.gain_bs, G_d=cfg.gain_user, eta0=cfg.noise_psd_w_per_hz,
              W=cfg.bandwidth_hz)
    if cfg.power_w > 0:
        return ChannelParams(P=cfg.power_w, **kw)
    return ChannelParams.from_snr(cfg.snr_db, snr_reference(cfg, topology), **kw)


def snr_reference(cfg: SimConfig, topology: NetworkTopology) -> float:
    if cfg.snr_reference_m > 0:
        return cfg.snr_reference_m
    if topology.user_offset is not None:
        return topology.user_offset
    return topology.cell_pitch / 2.0


def _reuse_radii(cfg, topology):
    rb = cfg.reuse_radius_inter_m or 2.5 * topology.cell_pitch
    rd = cfg.reuse_radius_downlink_m or 1.5 * topology.cell_pitch
    return rb, rd


def _coloring_method(cfg, topology):
    if cfg.coloring == "auto":
        return "tiling" if topology.is_regular else "greedy"
    return cfg.coloring


# ------------------------------------------------------------------ rate tables

@dataclass
class _LinkTable:
    """Signal and interference gains of a set of links; SINR = g s / (eta0 + g i)."""

    group: np.ndarray      # transmitter (relay links) or serving BS (downlink)
    signal: np.ndarray
    interference: np.ndarray
    demand: np.ndarray     # load per unit user rate

    def busy_time(self, rho: np.ndarray, eta0: float) -> np.ndarray:
        """Max over groups of ``sum demand / log2(1 + SINR)`` for each density in ``rho``."""
        rho = np.atleast_1d(rho)
        out = np.zeros(len(rho))
        if not np.any(self.demand > 0):
            return out
        m = self.demand > 0
        s, i, dmd, grp = self.signal[m], self.interference[m], self.demand[m], self.group[m]
        n_groups = int(grp.max()) + 1
        for lo in range(0, len(rho), 256):
            r = rho[lo:lo + 256, None]
            with np.errstate(divide="ignore"):
                c = np.log2(1.0 + r * s / (eta0 + r * i))
                t = dmd / c
            tot = np.zeros((len(r), n_groups))
            for j in range(len(r)):
                tot[j] = np.bincount(grp, weights=t[j], minlength=n_groups)
            out[lo:lo + 256] = tot.max(axis=1)
        return out

    def busy_per_group(self, rho: float, eta0: float, n_groups: int) -> np.ndarray:
        m = self.demand > 0
        c = np.log2(1.0 + rho * self.signal[m] / (eta0 + rho * self.interference[m]))
        return np.bincount(self.group[m], weights=self.demand[m] / c, minlength=n_groups)


def _relay_table(topology, links, loads, plan, params):
    u, v = links[:, 0], links[:, 1]
    d = topology.bs_distances()
    gain = params.G_b * np.where(d > 0, d, np.inf) ** (-params.alpha)
    same = plan.coloring[:, None] == plan.coloring[None, :]
    np.fill_diagonal(same, False)
    # co-channel transmitters of u seen at receiver v
    intf = np.array([gain[same[a], b].sum() for a, b in zip(u, v)]) if len(u) else np.zeros(0)
    return _LinkTable(u.astype(int), gain[u, v], intf, np.asarray(loads, float))


def _downlink_table(topology, plan, params, demand):
    d = topology.user_bs_distances()
    gain = params.G_d * d ** (-params.alpha)
    serving = topology.association
    k = np.arange(topology.n_users)
    co = plan.coloring[None, :] == plan.coloring[serving][:, None]
    co[k, serving] = False
    intf = np.sum(np.where(co, gain, 0.0), axis=1)
    return _LinkTable(serving.astype(int), gain[k, serving], intf, np.asarray(demand, float))


# ------------------------------------------------------------------ loads

def _wired_loads(topology, demand) -> dict:
    """``{(u, v): load}`` when cell ``b`` pulls ``demand[b]`` from its nearest wired BS."""
    wired = np.array(topology.backhaul_set, dtype=int)
    if len(wired) == 0:
        raise ValueError("fetching over the backhaul needs at least one wired BS")
    src = wired[np.argmin(topology.bs_distances()[:, wired], axis=1)]
    pairs = [(int(s), int(b)) for b, s in enumerate(src) if s != b and demand[b] > 0]
    routes = trace_routes(topology, pairs)
    acc = {}
    for s, b in pairs:
        for a, c, w in routes[(s, b)].hops:
            acc[(a, c)] = acc.get((a, c), 0.0) + demand[b] * w
    return acc


def _links_from(acc: dict):
    links = np.array(sorted(acc), dtype=int).reshape(-1, 2)
    return links, np.array([acc[tuple(lk)] for lk in links], dtype=float)


def _no_cache_loads(topology):
    """Relay loads when every bit comes from the nearest wired BS."""
    return _links_from(_wired_loads(topology, topology.users_per_cell().astype(float)))


def _draw_requests(cfg, profile, topology):
    if cfg.n_request_draws == 0:
        return None
    rng = np.random.default_rng(cfg.request_seed)
    return rng.choice(profile.L, size=(cfg.n_request_draws, topology.n_users), p=profile.p) + 1


# ------------------------------------------------------------------ split optimisation

def _equalised_split(resources, W, P):
    """Split that gives every active resource the same rate.

    ``resources`` is a list of ``(rate_per_hz(rho), power_weight)``. With
    bandwidths ``R / e_j`` the power density must solve
    ``rho * sum_j w_j R / e_j(rho) = P``; returns ``(R, bandwidths)``.
    """
    if P == 0:
        return 0.0, [0.0] * len(resources)

    def state(rho):
        e = np.array([f(rho) for f, _ in resources])
        if np.any(e <= 0):
            return None
        R = W / np.sum(1.0 / e)
        wp = R * sum(m / ej for (_, m), ej in zip(resources, e))
        return R, e, wp

    lo = P / W / 2.0
    hi = P / (W * min(m for _, m in resources)) * 2.0

    def g(log_rho):
        st = state(math.exp(log_rho))
        return math.log(st[2] * math.exp(log_rho) / P)

    try:
        x = optimize.brentq(g, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14)
    except ValueError:
        return None
    R, e, _ = state(math.exp(x))
    return float(R), [float(R / ej) for ej in e]


def _solve_split(cfg, W, P, eta0, Mb, Md, relay, down, comimo_rate, Q_c):
    """Largest common rate and its split ``(W_b, W_d, W_c)``."""
    need_b = bool(np.any(relay.demand > 0))
    need_d = bool(np.any(down.demand > 0))
    need_c = Q_c > 0

    def rate(wb, wc):
        wb, wc = np.broadcast_arrays(np.asarray(wb, float), np.asarray(wc, float))
        wd = W - wb - wc
        wp = wb / Mb + wd / Md + (wc if need_c else 0.0)
        rho = np.where(wp > 0, P / np.where(wp > 0, wp, 1.0), 0.0)
        out = np.full(wb.shape, np.inf)
        if need_b:
            tb = relay.busy_time(rho.ravel(), eta0).reshape(wb.shape)
            out = np.minimum(out, (wb / Mb) / tb)
        if need_d:
            td = down.busy_time(rho.ravel(), eta0).reshape(wb.shape)
            out = np.minimum(out, (wd / Md) / td)
        if need_c:
            hc = np.array([comimo_rate(r) for r in rho.ravel()]).reshape(wb.shape)
            out = np.minimum(out, wc * hc / Q_c)
        else:
            out = np.where(wc > 0, -np.inf, out)
        return out

    if cfg.split == "explicit":
        wb, wc = cfg.split_inter_hz, cfg.split_comimo_hz
        if wb < 0 or wc < 0 or wb + wc > W * (1 + 1e-12):
            raise ValueError("explicit split must satisfy W_b, W_c >= 0 and W_b + W_c <= W")
        return float(rate(wb, wc)), (wb, W - wb - wc, wc)

    val, wb, wc = analysis.maximize_split(rate, W)
    best = (val, (wb, W - wb - wc, wc))
    res = []
    if need_b:
        res.append(("b", lambda r: 1.0 / (Mb * relay.busy_time(r, eta0)[0]), 1.0 / Mb))
    if need_d:
        res.append(("d", lambda r: 1.0 / (Md * down.busy_time(r, eta0)[0]), 1.0 / Md))
    if need_c:
        res.append(("c", lambda r: comimo_rate(r) / Q_c, 1.0))
    if res:
        eq = _equalised_split([(f, m) for _, f, m in res], W, P)
        if eq is not None:
            bw = dict(zip([k for k, _, _ in res], eq[1]))
            b2, c2 = bw.get("b", 0.0), bw.get("c", 0.0)
            v2 = float(rate(b2, c2))
            if v2 >= best[0] * (1 - 1e-12):
                best = (v2, (b2, W - b2 - c2, c2))
    return best


# ------------------------------------------------------------------ simulate

def simulate(cfg: SimConfig, topology: NetworkTopology | None = None) -> SimResult:
    """Per-user throughput of one scheme under the fluid model."""
    topo = topology if topology is not None else build_topology(cfg)
    params = channel_params(cfg, topo)
    N, K, W, P, eta0 = topo.n_bs, topo.n_users, params.W, params.P, params.eta0
    rb, rd = _reuse_radii(cfg, topo)
    method = _coloring_method(cfg, topo)
    fb = color_frequencies(topo, rb, band="inter-BS", method=method)
    fd = color_frequencies(topo, rd, band="downlink", method=method)
    Mb, Md = fb.n_subbands, fd.n_subbands
    errors, infeasible = [], ()
    Q_c, terms, interval = 0.0, {}, None
    n_backhaul_classes = 0
    comimo_rate = None

    if cfg.scheme == "none":
        links, loads = _no_cache_loads(topo)
        down_demand = np.ones(K)
        bound = aggregate_capacity_ub_udwn(topo, params)
    else:
        profile = zipf(cfg.n_files, cfg.tau)
        if cfg.replication == "optimal":
            q = optimal_replication(profile, cfg.budget, cfg.file_size_bits)
        else:
            q = uniform_replication(cfg.n_files, cfg.budget, cfg.file_size_bits)
        cache = build_cache_plan(q, cfg.segment_size_bits, topo, int(cfg.file_size_bits),
                                 cfg.cache_bits)
        full = is_full(q.q)
        classes = np.unique(q.q[~full])
        requests = _draw_requests(cfg, profile, topo)
        weights = class_request_weights(topo, cache, profile.p, classes, requests)
        covered = np.array([sources_needed(c) <= N for c in classes], dtype=bool)
        if not covered.all() and cfg.uncovered_files == "error":
            errors.append(f"{int(np.sum(~covered))} file classes need more source BSs than the "
                          f"network has ({N})")
            nan = np.full(K, np.nan)
            return SimResult(cfg.scheme, nan, np.full(N, np.nan), math.nan, math.nan,
                             (math.nan,) * 3, {}, math.nan, None, tuple(range(K)), errors)
        acc = {}
        if covered.any():
            model = build_load_model(topo, classes[covered])
            _, link_loads = measure_relay_load(model, weights[covered])
            acc = {tuple(int(x) for x in lk): float(v) for lk, v in zip(model.links, link_loads)}
        if not covered.all():
            n_backhaul_classes = int(np.sum(~covered))
            # too rare to rebuild from caches: fetch over the backhaul like the uncached network
            for lk, v in _wired_loads(topo, weights[~covered].sum(axis=0)).items():
                acc[lk] = acc.get(lk, 0.0) + v
        links, loads = _links_from(acc)
        if requests is None:
            frac_c = np.full(K, float(np.sum(profile.p[full])))
        else:
            frac_c = np.mean(full[requests - 1], axis=0)
        if cfg.scheme == "A":
            down_demand = 1.0 - frac_c
            Q_c = float(np.mean(frac_c))
        else:
            down_demand = np.ones(K)
        bound = aggregate_capacity_ub_cdwn(topo, params)
        t = analysis.throughput_terms(q, profile)
        terms = {"Q_b": t.Q_b, "Q_c": t.Q_c, "Q_d": t.Q_d}
        if topo.is_regular and Mb == analysis.M_B and Md == analysis.M_D:
            d0, r0 = topo.user_offset, topo.cell_pitch
            fn = analysis.per_bs_throughput_A if cfg.scheme == "A" else analysis.per_bs_throughput_B
            kw = {"cross_check": False} if cfg.scheme == "A" else {}
            interval = (fn(q, profile, params, "L", d0, r0, **kw),
                        fn(q, profile, params, "U", d0, r0, **kw))
        if Q_c > 0:
            samples = sample_comimo(topo, params, cfg.cluster_size, np.ones(K, bool),
                                    cfg.n_phase_draws, cfg.phase_seed, cfg.guard_band)
            if samples.sum_power_ratio > 1 + 1e-9:
                raise RuntimeError("Co-MIMO schedule exceeds the network power budget")
            comimo_rate = (lambda rho, s=samples: s.mean_user_rate(rho, eta0))

    relay = _relay_table(topo, links, loads, fb, params)
    down = _downlink_table(topo, fd, params, down_demand)
    R, split = _solve_split(cfg, W, P, eta0, Mb, Md, relay, down, comimo_rate, Q_c)

    wb, wd, wc = split
    wp = wb / Mb + wd / Md + (wc if Q_c > 0 else 0.0)
    rho = P / wp if wp > 0 else 0.0
    util = {
        "inter_bs": R * relay.busy_per_group(rho, eta0, N) * Mb / wb if wb > 0 else np.zeros(N),
        "downlink": R * down.busy_per_group(rho, eta0, N) * Md / wd if wd > 0 else np.zeros(N),
        "comimo": R * Q_c / (wc * comimo_rate(rho)) if Q_c > 0 and wc > 0 else 0.0,
    }
    per_user = np.full(K, R)
    if not R > 0:
        infeasible = tuple(range(K))
        errors.append("no positive common rate is feasible")
        per_user[:] = np.nan
    per_bs = np.bincount(topo.association, weights=np.nan_to_num(per_user), minlength=N)
    return SimResult(cfg.scheme, per_user, per_bs, float(np.nansum(per_user)), float(R), split,
                     util, bound.bound_bits_per_sec, interval, infeasible, errors, terms,
                     n_backhaul_classes)


# ------------------------------------------------------------------ sweeps

RESULT_CSV_HEADER = ("sweep_axis,value,scheme,aggregate_bps,per_bs_mean,per_bs_p5,per_bs_p95,"
                     "bound_bps,errors")


@dataclass
class SweepPoint:
    axis: str
    value: float
    scheme: str
    result: SimResult | None
    error: str = ""

    def csv_row(self) -> str:
        r = self.result
        if r is None:
            vals = ["nan"] * 5
        else:
            pb = r.per_bs_throughput
            vals = [f"{r.aggregate:.10g}", f"{np.mean(pb):.10g}", f"{np.percentile(pb, 5):.10g}",
                    f"{np.percentile(pb, 95):.10g}", f"{r.bound_bps:.10g}"]
        err = (self.error or ("; ".join(r.errors) if r else "")).replace(",", ";")
        return ",".join([self.axis, f"{self.value:g}", self.scheme] + vals + [err])


def apply_axis(cfg: SimConfig, axis: str, value) -> SimConfig:
    if axis == "B_C":
        return replace(cfg, cache_size_bits=float(value), cache_size_files=0.0)
    if axis == "tau":
        return replace(cfg, tau=float(value))
    if axis == "N_c":
        return replace(cfg, cluster_size=int(value))
    if axis == "SNR":
        return replace(cfg, snr_db=float(value), power_w=0.0)
    if axis == "N":
        n = int(round(math.sqrt(value)))
        if n * n != int(value):
            raise ValueError("N must be a perfect square")
        kw = {"n_side": n}
        if cfg.topology == "perturbed":
            kw["n_users"] = int(round(cfg.n_users * value / cfg.n_side ** 2))
        if cfg.files_per_bs > 0:
            kw["n_files"] = max(1, int(round(cfg.files_per_bs * value)))
        return replace(cfg, **kw)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _sweep_task(args):
    cfg, axis, value, scheme, topo = args
    try:
        c = replace(apply_axis(cfg, axis, value), scheme=scheme)
        return SweepPoint(axis, float(value), scheme, simulate(c, topo))
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return SweepPoint(axis, float(value), scheme, None, f"{type(exc).__name__}: {exc}")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CDWN_THREADS", "1")))
    except ValueError:
        return 1


def sweep(template: SimConfig, axis: str, values, schemes=None, workers: int | None = None) -> list:
    """One result per (value, scheme) with common random numbers across points.

    Errors at a point are recorded on that point and the sweep continues.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    schemes = tuple(schemes) if schemes else (template.scheme,)
    topo = None if axis == "N" else build_topology(template)
    tasks = [(template, axis, v, s, topo) for v in values for s in schemes]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sweep_task, tasks))
    return [_sweep_task(t) for t in tasks]


def sweep_csv(points) -> str:
    return RESULT_CSV_HEADER + "\n" + "".join(p.csv_row() + "\n" for p in points)


# ------------------------------------------------------------------ scaling fits

@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float

    def interval(self, level: float = 0.95, n_points: int | None = None):
        """Confidence interval of the slope (t distribution with n-2 dof)."""
        if n_points is None or n_points < 3:
            return (math.nan, math.nan)
        t = stats.t.ppf(0.5 + level / 2.0, n_points - 2)
        return (self.slope - t * self.slope_stderr, self.slope + t * self.slope_stderr)

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def fit_scaling_exponent(points) -> ScalingFit:
    """Least-squares fit of ``log y`` on ``log x``; unpacks as ``(slope, intercept, r2)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("points must be positive and finite")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) <= 1e-12 * max(1.0, np.max(np.abs(lx))):
        raise ValueError("x values are degenerate")
    fit = stats.linregress(lx, ly)
    return ScalingFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                      float(fit.stderr))


def config_fields() -> list:
    return [f for f in fields(SimConfig)]

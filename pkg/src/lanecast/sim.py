"""Synthetic highway scenario generator.

Stands in for fleet recordings: every situation is one observed vehicle
driving a multi-lane highway for a fixed duration at 10 Hz, with
lane-keeping weave, an optional single lane change, longitudinal
acceleration episodes and optional gap-keeping behind a leading
vehicle.  Surrounding traffic fills the seven relation-partner slots of
the environment model; context features the generator cannot produce
meaningfully (wiper level, curvature, map attributes, ...) are emitted
as independent noise or constants so that feature selection has chaff
to reject.

Generation is a pure function of ``(config, rng_seed, situation_index)``
and therefore embarrassingly parallel over situations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import prep
from .core import SAMPLE_PERIOD_S, Dataset, FeatureDescriptor, Situation

FRONT_SLOTS = ("fl", "f", "fr", "l", "r")
REAR_SLOTS = ("rl", "rr")

# lane keeping: slow sinusoidal weave plus a lightly damped lateral
# jitter spring; amplitudes combine to roughly 0.08-0.1 m of lateral
# noise, enough that lane keeping and early lane-change cues overlap
WEAVE_AMP_RANGE = (0.05, 0.20)
WEAVE_PERIOD_RANGE = (9.0, 14.0)
JITTER_SIGMA = 0.04
JITTER_OMEGA = 2.0 * math.pi / 6.0
JITTER_ZETA = 0.7

# drift toward the target lane injected ahead of the lane-change profile
ANTICIPATION_S = 2.0
CUE_MAX_RANGE = (0.15, 0.30)

# sentinel emitted for absent relation partners
ABSENT_DISTANCE = 200.0
NO_OBJECT_CLASS = 14

#: features that are independent noise by construction; selection
#: variants are expected to reject all of them
NOISE_FEATURE_IDS = (
    "wpr", "v_lim", "t_a", "t_e", "w_ml", "w_mr", "c_0", "c_1",
    "d_x_a", "d_x_e", "tnl", "brd",
)


@dataclass
class SimConfig:
    """Generator parameters; every run is reproducible from these."""

    n_situations: int = 100
    duration_s: float = 12.0
    lane_width: float = 3.5
    n_lanes: int = 3
    lane_change_rate: float = 0.5
    left_fraction: float = 0.6
    lc_duration_range: tuple[float, float] = (3.0, 5.0)
    speed_range: tuple[float, float] = (22.0, 36.0)
    leader_presence: float = 0.5
    leader_presence_lc: float = 0.75
    neighbor_presence: float = 0.35
    future_stride: int = 5
    rng_seed: int = 42

    def validate(self) -> None:
        if self.n_situations < 1:
            raise ValueError("n_situations must be positive")
        lo, hi = self.lc_duration_range
        if not (2.0 <= lo <= hi <= 6.0):
            raise ValueError("lc_duration_range must lie within [2.0, 6.0]")
        if self.duration_s < 12.0:
            raise ValueError("duration_s must be at least 12 s "
                             "(5 s label horizon plus 7 s margin)")
        if self.n_lanes < 2:
            raise ValueError("need at least two lanes for lane changes")
        if not 0.0 <= self.lane_change_rate <= 1.0:
            raise ValueError("lane_change_rate must be a probability")
        if self.future_stride < 1:
            raise ValueError("future_stride must be >= 1")


def build_catalog() -> list[FeatureDescriptor]:
    """Feature catalog of the environment model, in serialization order."""
    cat: list[FeatureDescriptor] = []
    for slot in FRONT_SLOTS:
        cat.append(FeatureDescriptor(f"actv_{slot}", "nominal", nominal_values=(0, 1)))
        cat.append(FeatureDescriptor(f"mov_{slot}", "nominal", nominal_values=(0, 1)))
        cat.append(FeatureDescriptor(f"class_{slot}", "nominal",
                                     nominal_values=tuple(range(15))))
        cat.append(FeatureDescriptor(f"cutinlvl_{slot}", "nominal",
                                     nominal_values=(0, 1, 2, 3)))
        cat.append(FeatureDescriptor(f"d_rel_x_{slot}", "continuous", "m"))
        cat.append(FeatureDescriptor(f"d_rel_y_{slot}", "continuous", "m"))
        cat.append(FeatureDescriptor(f"v_rel_x_{slot}", "continuous", "m/s"))
        cat.append(FeatureDescriptor(f"v_rel_y_{slot}", "continuous", "m/s"))
        cat.append(FeatureDescriptor(f"a_rel_x_{slot}", "continuous", "m/s^2"))
        cat.append(FeatureDescriptor(f"d_rel_v_{slot}", "continuous", "m"))
        cat.append(FeatureDescriptor(f"d_rel_u_{slot}", "continuous", "m"))
        cat.append(FeatureDescriptor(f"v_rel_v_{slot}", "continuous", "m/s"))
        cat.append(FeatureDescriptor(f"v_rel_u_{slot}", "continuous", "m/s"))
    for slot in REAR_SLOTS:
        cat.append(FeatureDescriptor(f"mov_{slot}", "nominal", nominal_values=(0, 1)))
        cat.append(FeatureDescriptor(f"d_rel_y_{slot}", "continuous", "m"))
    for fog in ("fog_f", "fog_r", "fog_rl", "fog_rr"):
        cat.append(FeatureDescriptor(fog, "nominal", nominal_values=(0, 1)))
    cat.append(FeatureDescriptor("wpr", "nominal", nominal_values=tuple(range(16))))
    cat.append(FeatureDescriptor("d_y_ml", "continuous", "m"))
    cat.append(FeatureDescriptor("d_y_mr", "continuous", "m"))
    cat.append(FeatureDescriptor("d_y_cl", "continuous", "m"))
    cat.append(FeatureDescriptor("v_x", "continuous", "m/s"))
    cat.append(FeatureDescriptor("v_y", "continuous", "m/s"))
    cat.append(FeatureDescriptor("a_x", "continuous", "m/s^2"))
    cat.append(FeatureDescriptor("a_y", "continuous", "m/s^2"))
    cat.append(FeatureDescriptor("psi", "continuous", "deg"))
    cat.append(FeatureDescriptor("t_ml", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("t_mr", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("c_ml", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("c_mr", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("nlanes_cam", "nominal", nominal_values=(0, 1, 2, 3)))
    cat.append(FeatureDescriptor("nlanes_map", "nominal", nominal_values=tuple(range(6))))
    cat.append(FeatureDescriptor("cntr", "nominal", nominal_values=(0, 1)))
    cat.append(FeatureDescriptor("tnl", "nominal", nominal_values=(0, 1)))
    cat.append(FeatureDescriptor("brd", "nominal", nominal_values=(0, 1)))
    cat.append(FeatureDescriptor("v_lim", "nominal", nominal_values=tuple(range(1, 9))))
    cat.append(FeatureDescriptor("t_a", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("t_e", "nominal", nominal_values=(0, 1, 2)))
    cat.append(FeatureDescriptor("w_ml", "continuous", "m"))
    cat.append(FeatureDescriptor("w_mr", "continuous", "m"))
    cat.append(FeatureDescriptor("w_lane", "continuous", "m"))
    cat.append(FeatureDescriptor("d_x_a", "continuous", "m"))
    cat.append(FeatureDescriptor("d_x_e", "continuous", "m"))
    cat.append(FeatureDescriptor("c_0", "continuous", "1/m"))
    cat.append(FeatureDescriptor("c_1", "continuous", "1/m^2"))
    return cat


CATALOG = build_catalog()
FEATURE_IDS = [d.id for d in CATALOG]


def lane_change_profile(s) -> np.ndarray | float:
    """Minimum-jerk lateral transition 10 s^3 - 15 s^4 + 6 s^5.

    Monotone on [0, 1] with vanishing first and second derivative at
    both ends.  Raises on arguments outside [0, 1].
    """
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("profile progress must lie in [0, 1]")
    out = arr ** 3 * (10.0 + arr * (-15.0 + 6.0 * arr))
    return out if isinstance(s, np.ndarray) else float(out)


def _profile_velocity(s: np.ndarray) -> np.ndarray:
    return s ** 2 * (30.0 + s * (-60.0 + 30.0 * s))


def _profile_accel(s: np.ndarray) -> np.ndarray:
    return s * (60.0 + s * (-180.0 + 120.0 * s))


def _bump(u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """sin^2 bump on [0, 1] with value, first and second derivative."""
    val = np.sin(np.pi * u) ** 2
    dval = np.pi * np.sin(2.0 * np.pi * u)
    ddval = 2.0 * np.pi ** 2 * np.cos(2.0 * np.pi * u)
    return val, dval, ddval


def _jitter_trace(n: int, dt: float, rng: np.random.Generator):
    """Damped lateral spring driven by white acceleration noise.

    Position integrates the previous velocity explicitly so that the
    finite difference of the jitter track reproduces its velocity
    exactly.
    """
    omega, zeta = JITTER_OMEGA, JITTER_ZETA
    sigma_a = JITTER_SIGMA * math.sqrt(4.0 * zeta * omega ** 3)
    pos = np.empty(n)
    vel = np.empty(n)
    acc = np.empty(n)
    p = rng.normal(0.0, JITTER_SIGMA)
    v = rng.normal(0.0, JITTER_SIGMA * omega)
    noise = rng.normal(0.0, sigma_a * math.sqrt(dt), size=n)
    for i in range(n):
        a_det = -omega ** 2 * p - 2.0 * zeta * omega * v
        pos[i], vel[i], acc[i] = p, v, a_det
        p = p + v * dt
        v = v + a_det * dt + noise[i]
    return pos, vel, acc


def _accel_episodes(n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Piecewise acceleration targets smoothed by a first-order lag."""
    target = np.empty(n)
    i = 0
    while i < n:
        span = int(rng.uniform(2.0, 5.0) / dt)
        value = 0.0 if rng.random() < 0.55 else rng.normal(0.0, 0.45)
        target[i:i + span] = value
        i += span
    a = np.empty(n)
    cur = 0.0
    for i in range(n):
        cur += (target[i] - cur) * dt / 0.7
        a[i] = cur
    return a


def generate_situation(config: SimConfig, situation_index: int) -> Situation:
    """Generate one situation deterministically from (config, seed, index)."""
    rng = np.random.default_rng((config.rng_seed, 1009, situation_index))
    dt = SAMPLE_PERIOD_S
    n = int(round(config.duration_s / dt)) + 1
    t = np.arange(n) / 10.0
    w = config.lane_width

    lane0 = int(rng.integers(config.n_lanes))
    has_lc = rng.random() < config.lane_change_rate
    direction = 0
    lc_dur = 0.0
    onset = math.inf
    if has_lc:
        go_left = rng.random() < config.left_fraction
        if lane0 == config.n_lanes - 1:
            go_left = False
        elif lane0 == 0:
            go_left = True
        direction = 1 if go_left else -1
        lc_dur = rng.uniform(*config.lc_duration_range)
        t_cross = rng.uniform(6.0, config.duration_s - lc_dur / 2.0 - 0.5)
        onset = t_cross - lc_dur / 2.0

    # lateral track: lane center + weave + anticipation cue + profile + jitter
    amp = rng.uniform(*WEAVE_AMP_RANGE)
    period = rng.uniform(*WEAVE_PERIOD_RANGE)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    omega_w = 2.0 * math.pi / period
    weave = amp * np.sin(omega_w * t + phase)
    weave_v = amp * omega_w * np.cos(omega_w * t + phase)
    weave_a = -amp * omega_w ** 2 * np.sin(omega_w * t + phase)

    y = (lane0 + 0.5) * w + weave
    v_y = weave_v.copy()
    a_y = weave_a.copy()
    if has_lc:
        s = np.clip((t - onset) / lc_dur, 0.0, 1.0)
        y += direction * w * lane_change_profile(s)
        v_y += direction * w / lc_dur * _profile_velocity(s)
        a_y += direction * w / lc_dur ** 2 * _profile_accel(s)
        cue_max = rng.uniform(*CUE_MAX_RANGE)
        a0, b0 = onset - ANTICIPATION_S, onset + lc_dur
        inside = (t >= a0) & (t <= b0)
        u = np.zeros(n)
        u[inside] = (t[inside] - a0) / (b0 - a0)
        val, dval, ddval = _bump(u)
        y += np.where(inside, direction * cue_max * val, 0.0)
        v_y += np.where(inside, direction * cue_max / (b0 - a0) * dval, 0.0)
        a_y += np.where(inside, direction * cue_max / (b0 - a0) ** 2 * ddval, 0.0)
    jit, jit_v, jit_a = _jitter_trace(n, dt, rng)
    y += jit
    v_y += jit_v
    a_y += jit_a

    lane_idx = np.clip(np.floor(y / w).astype(int), 0, config.n_lanes - 1)
    marking_left = (lane_idx + 1) * w
    marking_right = lane_idx * w
    d_y_ml = marking_left - y
    d_y_mr = y - marking_right
    d_y_cl = y - (lane_idx + 0.5) * w

    # longitudinal track: explicit integration keeps the finite
    # differences of x and v consistent with the emitted v_x and a_x
    v0 = rng.uniform(*config.speed_range)
    episodes = _accel_episodes(n, dt, rng)
    leader_p = config.leader_presence_lc if has_lc else config.leader_presence
    has_leader = rng.random() < leader_p
    if has_leader:
        if has_lc:
            gap0 = rng.uniform(18.0, 45.0)
            v_lead0 = v0 + rng.normal(-2.5, 1.2)
        else:
            gap0 = rng.uniform(25.0, 70.0)
            v_lead0 = v0 + rng.normal(0.0, 1.5)
        v_lead0 = max(v_lead0, 5.0)
        lead_noise = rng.normal(0.0, 0.05, size=n)

    x = np.empty(n)
    v_x = np.empty(n)
    a_x = np.empty(n)
    gap = np.empty(n)
    v_lead = np.empty(n)
    xi, vi = 0.0, v0
    g, vl = (gap0, v_lead0) if has_leader else (ABSENT_DISTANCE, 0.0)
    for i in range(n):
        if has_leader:
            ai = np.clip(0.05 * (g - 1.4 * vi - 8.0) + 0.35 * (vl - vi), -2.5, 1.5)
            ai += 0.3 * episodes[i]
        else:
            ai = episodes[i]
        ai = float(np.clip(ai, -3.5, 2.5))
        x[i], v_x[i], a_x[i] = xi, vi, ai
        gap[i], v_lead[i] = g, vl
        xi += vi * dt
        vi = max(vi + ai * dt, 3.0)
        if has_leader:
            vl = max(vl + lead_noise[i], 3.0)
            g += (vl - vi) * dt

    psi = np.degrees(np.arctan2(v_y, v_x))

    features = _assemble_features(
        config, rng, n, t, lane_idx, y, x, v_x, a_x, v_y, a_y, psi,
        d_y_ml, d_y_mr, d_y_cl, has_leader, gap, v_lead, has_lc, direction, lane0,
    )

    sit = Situation(
        situation_id=situation_index,
        lane_width=w,
        t_rec=t,
        features=features,
        ttlcl=np.zeros(n),
        ttlcr=np.zeros(n),
        labels=np.zeros(n, dtype=np.int8),
        marking_left=marking_left.astype(float),
        marking_right=marking_right.astype(float),
    )
    sit.ttlcl, sit.ttlcr = prep.compute_ttlc(sit, FEATURE_IDS)
    sit.labels = prep.assign_labels(sit.ttlcl, sit.ttlcr, prep.DEFAULT_HORIZON_S)

    # relative trajectories over [-1 s, +6 s] for prediction start points
    back = int(round(-prep.TRAIN_TIME_MIN_S / dt))
    ahead = int(round(prep.TRAIN_TIME_MAX_S / dt))
    for i in range(back, n - ahead):
        if i % config.future_stride:
            continue
        k = np.arange(back + ahead + 1)
        idx = i + k - back
        sit.futures[i] = np.column_stack(
            [(k - back) / 10.0, x[idx] - x[i], y[idx] - y[i]]
        )
    return sit


def _slot_block(rng, n, present, dx0, v_rel0, y_slot, y_ego, a_x_ego):
    """Per-sample relation features of one front slot."""
    if not present:
        z = np.zeros(n)
        return {
            "actv": z, "mov": z, "class": np.full(n, NO_OBJECT_CLASS, dtype=float),
            "cutin": rng.choice(4, size=n, p=[0.94, 0.03, 0.02, 0.01]).astype(float),
            "dx": np.full(n, ABSENT_DISTANCE), "dy": z, "vx": z, "vy": z, "ax": z,
            "dv": np.full(n, ABSENT_DISTANCE), "du": z, "vv": z, "vu": z,
        }
    drift = np.cumsum(rng.normal(0.0, 0.02, size=n))
    dx = dx0 + np.cumsum(np.full(n, v_rel0 * SAMPLE_PERIOD_S)) + drift * 0.1
    dy = y_slot - y_ego
    vx = np.full(n, v_rel0) + rng.normal(0.0, 0.08, size=n)
    vy = rng.normal(0.0, 0.06, size=n)
    ax = -a_x_ego + rng.normal(0.0, 0.12, size=n)
    cls = float(rng.choice([2, 3, 1], p=[0.8, 0.15, 0.05]))
    mov = float(rng.random() < 0.97)
    return {
        "actv": np.ones(n), "mov": np.full(n, mov), "class": np.full(n, cls),
        "cutin": rng.choice(4, size=n, p=[0.94, 0.03, 0.02, 0.01]).astype(float),
        "dx": dx, "dy": dy, "vx": vx, "vy": vy, "ax": ax,
        "dv": dx + rng.normal(0.0, 0.05, size=n),
        "du": dy + rng.normal(0.0, 0.03, size=n),
        "vv": vx + rng.normal(0.0, 0.03, size=n),
        "vu": vy + rng.normal(0.0, 0.03, size=n),
    }


def _assemble_features(config, rng, n, t, lane_idx, y, x, v_x, a_x, v_y, a_y, psi,
                       d_y_ml, d_y_mr, d_y_cl, has_leader, gap, v_lead,
                       has_lc, direction, lane0):
    w = config.lane_width
    cols: dict[str, np.ndarray] = {}

    slot_lane = {"fl": lane0 + 1, "f": lane0, "fr": lane0 - 1,
                 "l": lane0 + 1, "r": lane0 - 1}
    slot_dx = {"fl": (8.0, 90.0), "f": None, "fr": (8.0, 90.0),
               "l": (-12.0, 12.0), "r": (-12.0, 12.0)}
    for slot in FRONT_SLOTS:
        lane_s = slot_lane[slot]
        feasible = 0 <= lane_s < config.n_lanes
        if slot == "f":
            present = has_leader
            if present:
                y_lead = (lane0 + 0.5) * w + rng.normal(0.0, 0.2) \
                    + rng.normal(0.0, 0.03, size=n)
                block = {
                    "actv": np.ones(n), "mov": np.ones(n),
                    "class": np.full(n, float(rng.choice([2, 3, 1], p=[0.75, 0.2, 0.05]))),
                    "cutin": rng.choice(4, size=n, p=[0.94, 0.03, 0.02, 0.01]).astype(float),
                    "dx": gap, "dy": y_lead - y,
                    "vx": v_lead - v_x, "vy": rng.normal(0.0, 0.05, size=n),
                    "ax": np.concatenate([[0.0], np.diff(v_lead) / SAMPLE_PERIOD_S]) - a_x,
                }
                block["dv"] = block["dx"] + rng.normal(0.0, 0.05, size=n)
                block["du"] = block["dy"] + rng.normal(0.0, 0.03, size=n)
                block["vv"] = block["vx"] + rng.normal(0.0, 0.03, size=n)
                block["vu"] = block["vy"] + rng.normal(0.0, 0.03, size=n)
            else:
                block = _slot_block(rng, n, False, 0, 0, 0, 0, a_x)
        else:
            p = config.neighbor_presence
            # a pending lane change implies an accepted gap on the target side
            if has_lc and slot in ("l", "r"):
                if (direction > 0) == (slot == "l"):
                    p *= 0.25
            present = feasible and rng.random() < p
            if present:
                dx0 = rng.uniform(*slot_dx[slot])
                v_rel0 = rng.normal(0.0, 1.8)
                y_slot = (lane_s + 0.5) * w + rng.normal(0.0, 0.2) \
                    + rng.normal(0.0, 0.03, size=n)
                block = _slot_block(rng, n, True, dx0, v_rel0, y_slot, y, a_x)
            else:
                block = _slot_block(rng, n, False, 0, 0, 0, 0, a_x)
        cols[f"actv_{slot}"] = block["actv"]
        cols[f"mov_{slot}"] = block["mov"]
        cols[f"class_{slot}"] = block["class"]
        cols[f"cutinlvl_{slot}"] = block["cutin"]
        cols[f"d_rel_x_{slot}"] = block["dx"]
        cols[f"d_rel_y_{slot}"] = block["dy"]
        cols[f"v_rel_x_{slot}"] = block["vx"]
        cols[f"v_rel_y_{slot}"] = block["vy"]
        cols[f"a_rel_x_{slot}"] = block["ax"]
        cols[f"d_rel_v_{slot}"] = block["dv"]
        cols[f"d_rel_u_{slot}"] = block["du"]
        cols[f"v_rel_v_{slot}"] = block["vv"]
        cols[f"v_rel_u_{slot}"] = block["vu"]

    for slot in REAR_SLOTS:
        lane_s = lane0 + (1 if slot == "rl" else -1)
        present = 0 <= lane_s < config.n_lanes and rng.random() < config.neighbor_presence
        if present:
            y_slot = (lane_s + 0.5) * w + rng.normal(0.0, 0.2) + rng.normal(0.0, 0.03, size=n)
            cols[f"mov_{slot}"] = np.full(n, float(rng.random() < 0.97))
            cols[f"d_rel_y_{slot}"] = y_slot - y
        else:
            cols[f"mov_{slot}"] = np.zeros(n)
            cols[f"d_rel_y_{slot}"] = np.zeros(n)

    zeros = np.zeros(n)
    for fog in ("fog_f", "fog_r", "fog_rl", "fog_rr"):
        cols[fog] = zeros
    cols["wpr"] = np.full(n, float(rng.integers(16)))
    cols["d_y_ml"] = d_y_ml
    cols["d_y_mr"] = d_y_mr
    cols["d_y_cl"] = d_y_cl
    cols["v_x"] = v_x
    cols["v_y"] = v_y
    cols["a_x"] = a_x
    cols["a_y"] = a_y
    cols["psi"] = psi
    cols["t_ml"] = np.where(lane_idx == config.n_lanes - 1, 1.0, 2.0)
    cols["t_mr"] = np.where(lane_idx == 0, 1.0, 2.0)
    cols["c_ml"] = np.ones(n)
    cols["c_mr"] = np.ones(n)
    cols["nlanes_cam"] = np.full(n, float(min(config.n_lanes, 3)))
    cols["nlanes_map"] = np.full(n, float(min(config.n_lanes, 5)))
    cols["cntr"] = zeros
    cols["tnl"] = np.full(n, float(rng.random() < 0.02))
    cols["brd"] = np.full(n, float(rng.random() < 0.02))
    cols["v_lim"] = np.full(n, float(rng.integers(1, 9)))
    cols["t_a"] = np.full(n, float(rng.integers(3)))
    cols["t_e"] = np.full(n, float(rng.integers(3)))
    cols["w_ml"] = np.round(rng.normal(0.15, 0.01), 4) + zeros
    cols["w_mr"] = np.round(rng.normal(0.15, 0.01), 4) + zeros
    cols["w_lane"] = np.full(n, w)
    cols["d_x_a"] = rng.uniform(500.0, 3000.0) - (x - x[0])
    cols["d_x_e"] = rng.uniform(500.0, 3000.0) - (x - x[0])
    cols["c_0"] = rng.normal(0.0, 2e-5, size=n)
    cols["c_1"] = rng.normal(0.0, 1e-6, size=n)

    return np.column_stack([cols[fid] for fid in FEATURE_IDS])


def generate_dataset(config: SimConfig, threads: int = 1) -> Dataset:
    """Generate all situations; parallel over the situation index."""
    config.validate()
    indices = range(config.n_situations)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            situations = list(pool.map(lambda i: generate_situation(config, i), indices))
    else:
        situations = [generate_situation(config, i) for i in indices]
    return Dataset(catalog=list(CATALOG), situations=situations)

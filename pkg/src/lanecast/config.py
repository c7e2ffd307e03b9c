"""Pipeline configuration: flat ``section.key=value`` text files.

Command-line ``key=value`` overrides take precedence over the file.
Every random decision in the pipeline draws from one of the named stage
seeds; there is no wall-clock seeding anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .sim import SimConfig


class ConfigError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v != ""]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v != ""]


#: key -> (type constructor, default); REQUIRED keys have no default
_REQUIRED = object()
SCHEMA = {
    "paths.work_dir": (str, _REQUIRED),
    "sim.n_situations": (int, 200),
    "sim.duration_s": (float, 12.0),
    "sim.lane_width": (float, 3.5),
    "sim.n_lanes": (int, 3),
    "sim.lane_change_rate": (float, 0.5),
    "sim.left_fraction": (float, 0.6),
    "sim.lc_duration_min": (float, 3.0),
    "sim.lc_duration_max": (float, 5.0),
    "sim.speed_min": (float, 22.0),
    "sim.speed_max": (float, 36.0),
    "sim.leader_presence": (float, 0.5),
    "sim.leader_presence_lc": (float, 0.75),
    "sim.neighbor_presence": (float, 0.35),
    "sim.future_stride": (int, 5),
    "prep.horizon_s": (float, 5.0),
    "prep.folds": (int, 6),
    "prep.po_fraction": (float, 0.5),
    "prep.po_test_fraction": (float, 0.3),
    "featsel.threshold": (float, 0.15),
    "featsel.wrapper_algo": (str, "gnb"),
    "clf.gnb_feature_set": (str, "A"),
    "clf.rf_feature_set": (str, "A"),
    "clf.mlp_feature_set": (str, "A"),
    "clf.mlp_alpha": (_floats, [0.02, 0.1]),
    "clf.mlp_hidden": (_ints, [27]),
    "clf.mlp_iters": (_ints, [800, 2000]),
    "clf.rf_trees": (_ints, [128]),
    "clf.rf_splits": (_ints, [16]),
    "clf.rf_min_samples": (_ints, [100]),
    "pred.k_max": (int, 50),
    "pred.n_init": (int, 3),
    "pred.max_fit_rows": (int, 30000),
    "pred.gnb_k_max": (int, 3),
    "eval.fpr_max": (float, 0.01),
    "eval.lateral_classifier": (str, "mlp"),
    "eval.lateral_strategy": (str, "pw_raw"),
    "seeds.sim": (int, _REQUIRED),
    "seeds.split": (int, _REQUIRED),
    "seeds.featsel": (int, _REQUIRED),
    "seeds.clf": (int, _REQUIRED),
    "seeds.pred": (int, _REQUIRED),
}


@dataclass
class PipelineConfig:
    values: dict

    def __getitem__(self, key: str):
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"missing config key {key!r}") from None

    def sim_config(self) -> SimConfig:
        return SimConfig(
            n_situations=self["sim.n_situations"],
            duration_s=self["sim.duration_s"],
            lane_width=self["sim.lane_width"],
            n_lanes=self["sim.n_lanes"],
            lane_change_rate=self["sim.lane_change_rate"],
            left_fraction=self["sim.left_fraction"],
            lc_duration_range=(self["sim.lc_duration_min"], self["sim.lc_duration_max"]),
            speed_range=(self["sim.speed_min"], self["sim.speed_max"]),
            leader_presence=self["sim.leader_presence"],
            leader_presence_lc=self["sim.leader_presence_lc"],
            neighbor_presence=self["sim.neighbor_presence"],
            future_stride=self["sim.future_stride"],
            rng_seed=self["seeds.sim"],
        )

    def mlp_grid(self) -> dict:
        return {"alpha": self["clf.mlp_alpha"],
                "n_hidden": self["clf.mlp_hidden"],
                "n_iter": self["clf.mlp_iters"]}

    def rf_grid(self) -> dict:
        return {"n_trees": self["clf.rf_trees"],
                "max_splits": self["clf.rf_splits"],
                "min_samples_split": self["clf.rf_min_samples"]}


def parse_config(path: str | None, overrides: list[str] = ()) -> PipelineConfig:
    """Read the key=value file, apply overrides, fill defaults and
    validate; unknown or missing keys raise :class:`ConfigError`."""
    raw: dict[str, str] = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                raw[key] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        raw[key] = value

    unknown = [k for k in raw if k not in SCHEMA]
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")

    values = {}
    for key, (ctor, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = ctor(raw[key])
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
        elif default is _REQUIRED:
            raise ConfigError(f"missing config key {key!r}")
        else:
            values[key] = default
    return PipelineConfig(values=values)

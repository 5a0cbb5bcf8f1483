"""Run configuration: JSON parsing with line-anchored diagnostics and explicit defaults."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

from .fields import from_terms, load_snapshot
from .manifold import BackendError, HopfGrid, PolynomialExact, SampleManifold
from .verify import DEFAULT_TOLERANCES, Settings

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_resolution", "DEFAULTS"]


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "manifold": {"kind": "sphere", "p": 1, "q": 0},
    "backend": {"name": "grid", "resolution": [16, 32, 32], "truncation": 10},
    "structure": {"u": None, "E": None},
    "flow": {
        "dt0": 0.02,
        "max_steps": 200,
        "mu_slack": 1e-9,
        "dt_min": 1e-8,
        "checkpoint_every": 0,
        "slice_degree": 2,
        "amplitude": 0.1,
        "normalized": False,
        "band": "auto",
        "orientation": 1,
        "restart": None,
        "fixed_point_tol": 1e-12,
    },
    "monopole": {"alpha": None, "beta1bar": None, "a": None, "gauge_check": True},
    "verify": {"suite": "all", "grid": [16, 32, 32], "flow_grid": [8, 16, 16], "yamabe_grid": [12, 24, 24],
               "monopole_grid": [24, 48, 48],
               "n_random": 5, "flow_starts": 3, "flow_steps": 200, "yamabe_steps": 100},
    "tolerances": dict(DEFAULT_TOLERANCES, solver=1e-6),
    "output": {"dir": "out"},
    "seed": 0,
}


def parse_resolution(text: str) -> list:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*[xX]\s*(\d+)\s*", str(text))
    if not m:
        raise ConfigError(f"resolution {text!r} is not of the form N1xN2xN3")
    return [int(g) for g in m.groups()]


def _line_of(text: str, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass
class RunConfig:
    data: dict
    source: str = "<defaults>"
    text: str = ""
    base_dir: str = "."

    def where(self, key: str) -> str:
        line = _line_of(self.text, key)
        return f"{self.source}:{line}" if line else self.source

    def error(self, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: {msg}")

    def __getitem__(self, k):
        return self.data[k]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def out_dir(self) -> str:
        return self.data["output"]["dir"]

    def tol(self, key) -> float:
        return float(self.data["tolerances"][key])

    # -- objects ------------------------------------------------------------

    def manifold(self) -> SampleManifold:
        b = self.data["backend"]
        try:
            if b["name"] == "grid":
                backend = HopfGrid(*b["resolution"])
            else:
                backend = PolynomialExact(truncation=int(b["truncation"]))
            mf = self.data["manifold"]
            p, q = (1, 0) if mf["kind"] == "sphere" else (int(mf["p"]), int(mf["q"]))
            return SampleManifold(backend, p, q)
        except (BackendError, ValueError, TypeError) as exc:
            raise self.error("backend" if "resolution" in str(exc) or "xi" in str(exc) else "manifold", str(exc))

    def field(self, spec, manifold, key, real=False, charge=0, default=None):
        """Monomial list [[a, b, c, d, re, im], ...] or {"snapshot": path}."""
        if spec is None:
            return default
        try:
            if isinstance(spec, dict) and "snapshot" in spec:
                path = os.path.join(self.base_dir, spec["snapshot"])
                with open(path) as fh:
                    f = load_snapshot(json.load(fh), manifold)
                return f.as_real() if real else f
            terms = {}
            for t in spec:
                if len(t) not in (5, 6):
                    raise ValueError(f"term {t} must be [a, b, c, d, re] or [a, b, c, d, re, im]")
                e = tuple(int(x) for x in t[:4])
                if min(e) < 0:
                    raise ValueError(f"negative exponent in {t}")
                terms[e] = terms.get(e, 0) + complex(t[4], t[5] if len(t) == 6 else 0.0)
            raw = from_terms(manifold, terms, real=real, charge=None)
            if manifold.p > 1 and charge is not None and raw.charge_defect(charge) > 1e-12 * max(1.0, raw.sup()):
                raise ValueError(f"field is not of lens charge {charge} on {manifold.kind}")
            return raw
        except ConfigError:
            raise
        except (OSError, ValueError, TypeError, KeyError, IndexError) as exc:
            raise self.error(key, f"bad field {key!r}: {exc}")

    def structure(self, manifold):
        from .fields import constant

        s = self.data["structure"]
        u = self.field(s["u"], manifold, "u", real=True, charge=0, default=constant(manifold, 1.0))
        e_charge = (2 * (1 + manifold.q)) % manifold.p if manifold.p > 1 else 0
        E = self.field(s["E"], manifold, "E", charge=e_charge, default=None)
        return u, E

    def settings(self, conv=None) -> Settings:
        v = self.data["verify"]
        tols = {k: v2 for k, v2 in self.data["tolerances"].items() if k in DEFAULT_TOLERANCES}
        return Settings(
            tolerances=tols, grid=tuple(v["grid"]), flow_grid=tuple(v["flow_grid"]),
            yamabe_grid=tuple(v["yamabe_grid"]), monopole_grid=tuple(v["monopole_grid"]), seed=self.seed, n_random=int(v["n_random"]),
            flow_starts=int(v["flow_starts"]), flow_steps=int(v["flow_steps"]),
            yamabe_steps=int(v["yamabe_steps"]), conv=conv,
        )


def _merge(base: dict, over: dict, path: str, cfg: RunConfig):
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise cfg.error(k, f"unknown key {path + k!r}")
        if isinstance(base[k], dict) and k != "tolerances":
            if not isinstance(v, dict):
                raise cfg.error(k, f"{path + k!r} must be an object")
            out[k] = _merge(base[k], v, path + k + ".", cfg)
        elif k == "tolerances":
            if not isinstance(v, dict):
                raise cfg.error(k, "'tolerances' must be an object")
            unknown = [t for t in v if t not in base[k]]
            if unknown:
                raise cfg.error(unknown[0], f"unknown tolerance {unknown[0]!r}")
            bad = [t for t, x in v.items() if not isinstance(x, (int, float)) or isinstance(x, bool) or x < 0]
            if bad:
                raise cfg.error(bad[0], f"tolerance {bad[0]!r} must be a non-negative number")
            out[k] = {**base[k], **v}
        else:
            out[k] = v
    return out


def _validate(cfg: RunConfig):
    d = cfg.data
    if d["manifold"]["kind"] not in ("sphere", "lens"):
        raise cfg.error("kind", "manifold.kind must be 'sphere' or 'lens'")
    if d["backend"]["name"] not in ("grid", "poly"):
        raise cfg.error("name", "backend.name must be 'grid' or 'poly'")
    res = d["backend"]["resolution"]
    if not (isinstance(res, list) and len(res) == 3 and all(isinstance(n, int) and n > 0 for n in res)):
        raise cfg.error("resolution", "backend.resolution must be three positive integers")
    f = d["flow"]
    for k in ("dt0", "dt_min"):
        if not isinstance(f[k], (int, float)) or f[k] <= 0:
            raise cfg.error(k, f"flow.{k} must be a positive number")
    if f["orientation"] not in (1, -1):
        raise cfg.error("orientation", "flow.orientation must be 1 or -1")
    if not isinstance(f["mu_slack"], (int, float)) or f["mu_slack"] < 0:
        raise cfg.error("mu_slack", "flow.mu_slack must be a non-negative number")
    for k in ("max_steps", "checkpoint_every", "slice_degree"):
        if not isinstance(f[k], int) or f[k] < 0:
            raise cfg.error(k, f"flow.{k} must be a non-negative integer")
    seed = d["seed"]
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise cfg.error("seed", "seed must be an unsigned 64-bit integer")
    cfg.manifold()


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file, then command-line overrides."""
    cfg = RunConfig(json.loads(json.dumps(DEFAULTS)))
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
        cfg = RunConfig(cfg.data, path, text, os.path.dirname(os.path.abspath(path)))
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1: top level must be a JSON object")
        cfg.data = _merge(cfg.data, data, "", cfg)
    for (section, key), v in (overrides or {}).items():
        if v is None:
            continue
        if section is None:
            cfg.data[key] = v
        else:
            cfg.data[section][key] = v
    _validate(cfg)
    return cfg

"""Convention ledger: frame choice, the standard curvature constant and sign bits.

The ledger is a checked-in JSON file.  Code reads it through :func:`load`; the
test-suite recomputes every recorded constant and fails on disagreement.

Bits
----
torsion_lower   how A_11 is read off A^1_1bar ("conj": A_11 = conj(A^1_1bar), "same")
covariant_sign  sign s in t_{,b} = X_b t - s (p - q) omega(X_b) t
cartan_q_index  how the extracted Q^1_1bar relates to Q_11 ("conj" or "same")
twist_sign      sign s in the twisted operator Z1bar + s i a(Z1bar)
pairing         deformation pairing: mu'(E)[dE] = -(c/8 pi^2) Re int Q_11 pairing(dE) w theta^d theta,
                w = 1/(1 - |E|^2), with c = pairing_constant
flow_rate       the Cartan flow moves E at flow_rate times the steepest-descent field
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from importlib import resources

__all__ = ["Conventions", "load", "derivation_hash"]


def derivation_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclasses.dataclass(frozen=True)
class Conventions:
    c0: float
    mu0: float
    torsion_lower: str = "conj"
    covariant_sign: int = 1
    cartan_q_index: str = "conj"
    twist_sign: int = 1
    pairing: str = "same"
    pairing_constant: float = -4.0
    flow_rate: float = 0.5
    c0_derivation: str = ""
    c0_hash: str = ""

    def replace(self, **kw) -> "Conventions":
        return dataclasses.replace(self, **kw)

    def lower_torsion(self, a_up):
        return a_up.conj() if self.torsion_lower == "conj" else a_up

    def q_from_extracted(self, q_up):
        return q_up.conj() if self.cartan_q_index == "conj" else q_up

    def pair(self, de):
        return de.conj() if self.pairing == "conj" else de


_CACHE = {}


def raw() -> dict:
    if "raw" not in _CACHE:
        text = resources.files(__package__).joinpath("conventions.json").read_text()
        _CACHE["raw"] = json.loads(text)
    return _CACHE["raw"]


def load() -> Conventions:
    data = raw()
    b = data["bits"]
    return Conventions(
        c0=float(data["c0"]),
        mu0=float(data["mu0"]),
        torsion_lower=b["torsion_lower"],
        covariant_sign=int(b["covariant_sign"]),
        cartan_q_index=b["cartan_q_index"],
        twist_sign=int(b["twist_sign"]),
        pairing=b["pairing"],
        pairing_constant=float(data["pairing_constant"]),
        flow_rate=float(data["flow_rate"]),
        c0_derivation=data["c0_derivation"],
        c0_hash=data["c0_hash"],
    )

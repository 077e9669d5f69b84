"""JSON certificates and their verification.

Three certificate types share one envelope ``{"type", ..., "claimed_ratio"}``:

* ``s_witness``         a dense S-witness (chain, omega, filtration, terms)
* ``amplified_witness`` a lazy ``amplify(outer, inner)``, evaluated by streaming
* ``martingale``        a dyadic martingale with a UMD exponent ``s``

Verification rebuilds every object through its validating constructor,
recomputes the ratio from scratch and passes iff
``recomputed >= claimed - VERIFY_TOL``.  Exponents are written as numbers
or the string ``"inf"``; floats use Python's round-trip repr.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .martingale import DyadicMartingale, umd_ratio
from .measure import Filtration, FiniteProbSpace, Partition
from .mixed_norm import MixedNormChain, format_exponent, parse_exponent
from .witness import AmplifiedWitness, SWitnessSpec, Term, evaluate

VERIFY_TOL = 1e-9


class CertificateError(ValueError):
    """Malformed or internally inconsistent certificate."""


# -- building blocks ---------------------------------------------------------


def space_to_json(space: FiniteProbSpace) -> dict:
    return {"weights": space.weights.tolist(), "counting": bool(space.counting)}


def space_from_json(d: dict) -> FiniteProbSpace:
    return FiniteProbSpace(np.asarray(d["weights"], dtype=float), bool(d.get("counting", False)))


def partition_to_json(part: Partition) -> dict:
    return {"blocks": part.blocks}


def partition_from_json(d: dict) -> Partition:
    return Partition.from_blocks(d["blocks"])


def filtration_to_json(filt: Filtration) -> dict:
    return {"levels": [partition_to_json(filt[k]) for k in range(len(filt))]}


def filtration_from_json(d: dict) -> Filtration:
    return Filtration(tuple(partition_from_json(lv) for lv in d["levels"]))


def chain_to_json(chain: MixedNormChain) -> dict:
    return {"layers": [{"p": format_exponent(p), **space_to_json(s)} for p, s in chain.layers]}


def chain_from_json(d: dict) -> MixedNormChain:
    return MixedNormChain(tuple((parse_exponent(L["p"]), space_from_json(L)) for L in d["layers"]))


def witness_to_json(spec: SWitnessSpec) -> dict:
    return {
        "chain": chain_to_json(spec.chain),
        "omega": space_to_json(spec.omega),
        "filtration": filtration_to_json(spec.filtration),
        "terms": [
            {"basis_index": list(t.basis_index), "level": t.level, "theta": t.theta.tolist()}
            for t in spec.terms
        ],
    }


def witness_from_json(d: dict) -> SWitnessSpec:
    terms = tuple(Term(tuple(t["basis_index"]), int(t["level"]), t["theta"]) for t in d["terms"])
    return SWitnessSpec(chain_from_json(d["chain"]), space_from_json(d["omega"]),
                        filtration_from_json(d["filtration"]), terms)


# -- certificates --------------------------------------------------------------


def certificate(obj, claimed_ratio: float, s=None) -> dict:
    """Certificate dict for a witness, amplified witness or martingale."""
    if isinstance(obj, SWitnessSpec):
        body = {"type": "s_witness", **witness_to_json(obj)}
    elif isinstance(obj, AmplifiedWitness):
        body = {"type": "amplified_witness",
                "outer": witness_to_json(obj.outer), "inner": witness_to_json(obj.inner)}
    elif isinstance(obj, DyadicMartingale):
        if s is None:
            raise ValueError("martingale certificates need the exponent s")
        body = {"type": "martingale", "chain": chain_to_json(obj.chain), "depth": obj.depth,
                "s": format_exponent(parse_exponent(s)), "diffs": obj.diffs.tolist()}
    else:
        raise TypeError(f"cannot certify {type(obj).__name__}")
    body["claimed_ratio"] = float(claimed_ratio)
    return body


def load_certificate(d: dict):
    """Rebuild the object in a certificate dict; returns ``(obj, s_or_None)``."""
    try:
        kind = d["type"]
        if kind == "s_witness":
            return witness_from_json(d), None
        if kind == "amplified_witness":
            return AmplifiedWitness(witness_from_json(d["outer"]), witness_from_json(d["inner"])), None
        if kind == "martingale":
            m = DyadicMartingale(chain_from_json(d["chain"]), np.asarray(d["diffs"], dtype=float))
            if m.depth != int(d["depth"]):
                raise CertificateError("depth field disagrees with the differences")
            return m, parse_exponent(d["s"])
    except CertificateError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"invalid certificate: {exc}") from exc
    raise CertificateError(f"unknown certificate type {kind!r}")


def recompute_ratio(obj, s=None) -> float:
    if isinstance(obj, DyadicMartingale):
        return umd_ratio(obj, s)
    return evaluate(obj).ratio


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    kind: str
    claimed: float
    recomputed: float


def verify(d: dict, tol: float = VERIFY_TOL) -> VerifyResult:
    obj, s = load_certificate(d)
    try:
        claimed = float(d["claimed_ratio"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError("certificate lacks a numeric claimed_ratio") from exc
    r = recompute_ratio(obj, s)
    return VerifyResult(bool(r >= claimed - tol), d["type"], claimed, float(r))


def dump(d: dict, path) -> None:
    Path(path).write_text(json.dumps(d, sort_keys=True) + "\n")


def load(path) -> dict:
    return json.loads(Path(path).read_text())

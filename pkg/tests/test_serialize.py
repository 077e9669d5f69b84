import json

import numpy as np
import pytest

from umdlpq import serialize
from umdlpq.martingale import project_differences, umd_ratio
from umdlpq.mixed_norm import build_E_n
from umdlpq.witness import (
    AmplifiedWitness,
    amplify,
    base_witness_E1,
    certified_lower_bound,
    evaluate,
    normalized,
)
from test_witness import random_witness


def _roundtrip(d, tmp_path):
    path = tmp_path / "cert.json"
    serialize.dump(d, path)
    return serialize.load(path)


def test_s_witness_roundtrip(tmp_path):
    w = random_witness(np.random.default_rng(11))
    r = evaluate(w).ratio
    d = _roundtrip(serialize.certificate(w, r), tmp_path)
    obj, s = serialize.load_certificate(d)
    assert s is None and evaluate(obj).ratio == r
    assert [t.basis_index for t in obj.terms] == [t.basis_index for t in w.terms]
    res = serialize.verify(d)
    assert res.ok and res.kind == "s_witness" and res.recomputed == pytest.approx(r, rel=1e-15)


def test_amplified_roundtrip(tmp_path):
    base = normalized(base_witness_E1(2, 4, (0.45, 0.77), (0.0, 1.3)))
    lazy = amplify(base, base, max_scalars=0)
    assert isinstance(lazy, AmplifiedWitness)
    r = evaluate(lazy).ratio
    res = serialize.verify(_roundtrip(serialize.certificate(lazy, r), tmp_path))
    assert res.ok and res.kind == "amplified_witness"
    assert res.recomputed == pytest.approx(r, rel=1e-14)


def test_martingale_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    chain = build_E_n(1.5, "inf", 1)
    m = project_differences(chain, rng.standard_normal((3, 4, chain.dim)))
    r = umd_ratio(m, 3)
    d = _roundtrip(serialize.certificate(m, r, s=3), tmp_path)
    assert d["chain"]["layers"][1]["p"] == "inf"
    res = serialize.verify(d)
    assert res.ok and res.recomputed == pytest.approx(r, rel=1e-14)
    with pytest.raises(ValueError):
        serialize.certificate(m, r)


def test_tampered_theta_fails():
    w = normalized(base_witness_E1(2, 4, (0.45, 0.77), (0.0, 1.3)))
    d = json.loads(json.dumps(serialize.certificate(w, evaluate(w).ratio)))
    d["terms"][1]["theta"] = [0.0 for _ in d["terms"][1]["theta"]]
    assert not serialize.verify(d).ok


def test_overclaim_fails_and_tolerance():
    w = random_witness(np.random.default_rng(3))
    r = evaluate(w).ratio
    assert serialize.verify(serialize.certificate(w, r + 5e-10)).ok
    assert not serialize.verify(serialize.certificate(w, r + 1e-6)).ok


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("claimed_ratio"),
    lambda d: d.update(type="nope"),
    lambda d: d["terms"][0].update(level=7),
    lambda d: d["omega"].update(weights=[0.9, 0.9]),
    lambda d: d.pop("chain"),
])
def test_malformed_rejected(mutate):
    w = base_witness_E1(2, 4, (1.0, 0.5), (0.2, 1.0))
    d = serialize.certificate(w, 1.0)
    mutate(d)
    with pytest.raises(serialize.CertificateError):
        serialize.verify(d)


def test_martingale_depth_mismatch():
    m = project_differences(build_E_n(2, 4, 1), np.random.default_rng(0).standard_normal((3, 4, 4)))
    d = serialize.certificate(m, 1.0, s=2)
    d["depth"] = 3
    with pytest.raises(serialize.CertificateError):
        serialize.verify(d)


@pytest.mark.slow
def test_n3_certificate_streams(tmp_path):
    lb = certified_lower_bound(2, 4, 3)
    assert isinstance(lb.witness, AmplifiedWitness)
    d = _roundtrip(serialize.certificate(lb.witness, lb.estimate.value), tmp_path)
    res = serialize.verify(d)
    assert res.ok and d["type"] == "amplified_witness"

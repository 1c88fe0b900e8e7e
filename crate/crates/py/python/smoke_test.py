"""Smoke test for the blockmol extension module.

Run after `maturin develop` (or `pip install .`) from crates/py.
"""

import os
import tempfile

import blockmol


def main():
    assert blockmol.tokenize("CCl") == ["C", "Cl"]
    assert blockmol.validate("c1ccccc1") == (True, None)
    ok, err = blockmol.validate("C1CC")
    assert not ok and "ring" in err

    d = blockmol.descriptors("c1ccccc1")
    assert (d["heavy_atoms"], d["ring_count"], d["max_ring_size"]) == (6, 1, 6)
    assert blockmol.tanimoto("CCO", "CCO") == 1.0

    m = "Cc1ccc(NC(=O)C2CCNCC2)cc1"
    kept, report = blockmol.curate([m, m, "C[Si](C)(C)c1ccc(C(N)=O)cc1"])
    assert kept == [m]
    assert report["accepted_count"] == 1 and report["input_count"] == 3

    corpus = blockmol.toy_corpus(60, seed=1)
    assert len(corpus) == 60 and corpus == blockmol.toy_corpus(60, seed=1)

    model = blockmol.Model.train(corpus, epochs=2, seed=3)
    assert len(model.epoch_losses) == 2 and model.vocab_size > 4

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "ck.json")
        model.save(path)
        again = blockmol.Model.load(path)
    a = model.sample(8, seed=5, stochastic=True)
    assert a == again.sample(8, seed=5, stochastic=True)
    assert all(s.startswith("Cc1") for s, _ in model.sample(4, prefix="Cc1"))

    result = model.search("parp1", iterations=30, seed=2)
    assert result["iterations"] <= 30
    for hit in result["hits"]:
        assert hit["props"]["qed"] >= 0.5 and hit["props"]["sa"] <= 5.0

    rep = blockmol.evaluate([s for s, _ in a] + ["CCO"], target="parp1")
    assert rep["total"] == 9 and 0.0 <= rep["validity"] <= 1.0

    print("smoke test passed")


if __name__ == "__main__":
    main()

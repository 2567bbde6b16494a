"""Smoke test for the ecseq_py extension. Run after `pip install --no-build-isolation crates/py`."""

import json

import ecseq_py as e


def main():
    b = e.BitString("0110")
    assert len(b) == 4 and str(b) == "0110" and b[1] and not b[-1]
    assert e.BitString.from_hex(b.to_hex(), 4) == b

    p = e.ExactProb("2/8")
    assert str(p) == "1/4" and p.numerator == 1 and p.denominator == 4
    assert e.ExactProb("1/8") < p and float(p) == 0.25

    assert e.choose_m0("inverse-triangular") == 8
    bits, alloc = e.spread("inverse-triangular", 1024, seed=1)
    assert len(bits) == 1024 and json.loads(alloc)["m0"] == 8
    prefixes = {str(e.recover_prefix(alloc, bits.window(k, 256), k, 8)) for k in (0, 77, 768)}
    assert len(prefixes) == 1

    assert str(e.miss_probability(1, 2, 1)) == "3/4"
    assert e.count_simple(4, 2, 1) == 4 and e.count_simple(4, 2, 2) == 16

    lengths, cert, _ = e.build_two_level_family("3/5", "1/4", seed=0)
    assert lengths == [4, 112] and json.loads(cert)["meets_epsilon"]

    strings, certificate = e.adversary_search(2, "1/2", 4)
    assert strings == ["00", "00", "10"] and str(certificate) == "7/16"

    x = e.avoid({4: ["0000", "1111"]}, 32, seed=3)
    assert "0000" not in str(x) and "1111" not in str(x)
    try:
        e.avoid({2: ["00", "11"], 3: ["010", "101"]}, 8, seed=0, budget=50)
    except RuntimeError:
        pass
    else:
        raise AssertionError("unsatisfiable family should exhaust the budget")

    assert e.compress_size(e.BitString("")) == 64
    rows = e.window_profile(bits, 256, 256)
    assert [r[0] for r in rows] == [0, 256, 512, 768]
    print("ecseq_py smoke test passed")


if __name__ == "__main__":
    main()

"""Smoke test for the `mla` extension module.

Build and install first, e.g. `maturin build -m crates/python/Cargo.toml`
followed by `pip install target/wheels/mla-*.whl`, then run this file.
"""

import numpy as np

import mla


def main():
    n = 120
    a = mla.Matrix.random(n, n, seed=3)
    assert a.shape == (n, n)
    dense = np.array(a.to_rows())

    results = {}
    for algo in mla.VARIANTS:
        f, ipiv, et_events, zero_pivot = mla.lu(a, algo=algo, b_outer=32, b_inner=8, threads=3)
        assert zero_pivot is None
        assert mla.residual(a, f, ipiv) <= n * 100 * np.finfo(float).eps
        results[algo] = (f.to_rows(), ipiv)
        print(f"{algo:>13}: residual {mla.residual(a, f, ipiv):.2e}, et_events {et_events}")
    first = next(iter(results.values()))
    assert all(r == first for r in results.values()), "variants disagree"

    # compare against numpy: P A = L U
    packed = np.array(first[0])
    lower = np.tril(packed, -1) + np.eye(n)
    upper = np.triu(packed)
    pa = dense.copy()
    for k, p in enumerate(first[1]):
        pa[[k, p]] = pa[[p, k]]
    assert np.allclose(pa, lower @ upper, atol=1e-12)

    f, ipiv = mla.lu_unblocked(a)
    assert ipiv == first[1]

    b = mla.Matrix.random(n, 7, seed=4)
    c = mla.Matrix.zeros(n, 7)
    prod = mla.gemm_update(c, a, b)
    assert np.allclose(np.array(prod.to_rows()), dense @ np.array(b.to_rows()))

    x = mla.trsm(f, b)
    assert np.allclose(lower @ np.array(x.to_rows()), np.array(b.to_rows()))

    assert mla.flops_lu(3000, 3000) == 2 * 3000**3 / 3
    try:
        mla.lu(a, algo="nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown variant accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()

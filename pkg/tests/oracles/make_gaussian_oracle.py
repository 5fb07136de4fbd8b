"""Regenerate the frozen reference values in ``gaussian_oracle.py``.

Independent of the package: every inner product is a direct mpmath
quadrature of its defining integral, and the normal equations are solved
in 50-digit arithmetic. Run from the repository root:

    python3 tests/oracles/make_gaussian_oracle.py > tests/oracles/gaussian_oracle.py
"""

import mpmath as mp

mp.mp.dps = 50
N_MAX = 10


def khat(n, s):
    return (4 * mp.pi) ** (mp.mpf(n) / 2) * mp.exp(-s * s)


def inner(n, f, g):
    return mp.quad(lambda s: s ** (n - 1) * f(s) * g(s), [0, 1, 4, 16, mp.inf])


def main():
    ds = [1 + mp.sin(j) for j in range(N_MAX)]
    print('"""Frozen output of make_gaussian_oracle.py (50-digit mpmath)."""')
    print()
    print("# relative optimal residual E_N / |K|^2 for the Gaussian kernel,")
    print("# d_j = 1 + sin(j - 1), N = 1..10, radial L2 convention")
    print("RELATIVE_RESIDUAL = {")
    for n in (1, 2, 3):
        kk = inner(n, lambda s: khat(n, s), lambda s: khat(n, s))
        green = [lambda s, d=d: 1 / (1 + d * s * s) for d in ds]
        b = [inner(n, lambda s: khat(n, s), g) for g in green]
        A = [[inner(n, gi, gj) for gj in green] for gi in green]
        rel = []
        for N in range(1, N_MAX + 1):
            alpha = mp.lu_solve(mp.matrix([row[:N] for row in A[:N]]), mp.matrix(b[:N]))
            E = kk - mp.fsum(alpha[i] * b[i] for i in range(N))
            rel.append(E / kk)
        print(f"    {n}: [")
        for v in rel:
            print(f"        {mp.nstr(v, 17)!s},")
        print("    ],")
    print("}")
    print()
    print("K_NORM_SQ = {")
    for n in (1, 2, 3):
        kk = inner(n, lambda s: khat(n, s), lambda s: khat(n, s))
        print(f"    {n}: {mp.nstr(kk, 17)},")
    print("}")


if __name__ == "__main__":
    main()

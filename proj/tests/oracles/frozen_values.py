"""Independent high-precision evaluation of the closed-form quantities whose
values are frozen into the C++ tests. Run: python3 tests/oracles/frozen_values.py"""
from mpmath import mp, mpf, sqrt, matrix

mp.dps = 40


def mat(rows):
    return matrix([[mpf(v) for v in r] for r in rows])


def col(vals):
    return matrix([mpf(v) for v in vals])


def trace(a):
    return sum(a[i, i] for i in range(a.rows))


def q_statistic():
    # N=4, K=2, beta0=0, oracle T=1
    y = col([1, 2, 0, -1])
    x = col([0, 1, 1, 2])
    z = mat([[1, 0], [2, 1], [0, 1], [1, -1]])
    beta0 = 0
    n = 4
    ystar = y - x * beta0
    ybar = ystar / sqrt((ystar.T * ystar)[0])
    sbar = z * z.T / n
    quad = (ybar.T * sbar * ybar)[0]
    t = mpf(1)
    return sqrt(mpf(n) ** 2 / (2 * t)) * (quad - trace(sbar) / n)


def q_statistic_beta():
    # same Z, beta0 = 0.5, feasible T from the pair sum
    y = col([1, 2, 0, -1])
    x = col([0, 1, 1, 2])
    z = mat([[1, 0], [2, 1], [0, 1], [1, -1]])
    n = 4
    ystar = y - x * mpf("0.5")
    ybar = ystar / sqrt((ystar.T * ystar)[0])
    sbar = z * z.T / n
    quad = (ybar.T * sbar * ybar)[0]
    t = sum(((z[i, :] * z[j, :].T)[0]) ** 2 for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    return t, sqrt(mpf(n) ** 2 / (2 * t)) * (quad - trace(sbar) / n)


def noncentrality():
    z = mat([[1, 2, 0], [0, 1, -1], [2, 0, 1], [-1, 1, 1], [1, -2, 3]])
    pi = col([1, -1, 2])
    v = col([1, 0, -2, 1, 3])
    eps = col([2, -1, 1, 0, 1])
    h = mpf("1.5")
    t = mpf(7)
    n, k = 5, 3
    s = z.T * z / n
    sbar = z * z.T / n
    trs = trace(s)
    eye_k = mp.eye(k)
    eye_n = mp.eye(n)
    e2 = (eps.T * eps)[0]
    scale = n / (e2 * (2 * t) ** mpf("0.1"))
    t1 = scale * h ** 2 * (pi.T * (s * s - trs / n * eye_k) * pi)[0]
    t2 = scale * h ** 2 * (v.T * (sbar / n - trs / n ** 2 * eye_n) * v)[0]
    t3 = 2 * sqrt(n) / (e2 * (2 * t) ** mpf("0.3")) * h * (v.T * (sbar - trs / n * eye_n) * eps)[0]
    return t1, t2, t3, t1 + t2 + t3


def delta():
    return mpf(200) ** mpf("0.2") / 20


def toeplitz_frob():
    r = mpf("0.7")
    return 2 * (1 + r ** 2)


if __name__ == "__main__":
    print("q_statistic N=4 K=2 oracle T=1:", mp.nstr(q_statistic(), 20))
    t, q = q_statistic_beta()
    print("q_statistic N=4 K=2 beta0=0.5 feasible: T =", mp.nstr(t, 20), " Q =", mp.nstr(q, 20))
    print("noncentrality terms:", [mp.nstr(v, 20) for v in noncentrality()])
    print("delta_from_h(1, 100, 400):", mp.nstr(delta(), 20))
    print("Toeplitz K=2 rho=.7 Frobenius^2:", mp.nstr(toeplitz_frob(), 20))

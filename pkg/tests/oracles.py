"""Reference values computed independently of momentlab and frozen here.

Rational values come from direct evaluation of the four-term formula
p^2 (2A)^r + q^2 2^r + 2pq (A-1)^r - 2pq (A+1)^r with fractions.Fraction.
"""

from fractions import Fraction

# r = 3: A = 2^6, p = 3 / (2^3 * 64)
R3_A = Fraction(64)
R3_P = Fraction(3, 512)
R3_DELTA = Fraction(-13528549, 65536)  # -206.4292755126953...
R3_E_PLUS = 2992.975440979004
R3_E_MINUS = 3199.404716491699
R3_EXY = Fraction(100489, 262144)

# r = 4: A = 16, p = 1/64;  r = 6: A = 8, p = 3/256
R4_DELTA = Fraction(-189551, 256)
R6_DELTA = Fraction(-1847831, 256)

JENSEN = {3: (24578, 24576), 4: (32896, 32768), 6: (413792, 393216)}
CHAIN = {3: -64, 4: -240, 6: -2240}

# 4-atom Cauchy model used for the representation checks (normalized)
CAUCHY4 = {"atoms": [0.5, 1.0, 2.0, 3.0], "c": [1.0, 2.0, 0.5, 3.0], "d": [1.0, 1.0, 2.0, 1.0]}
CAUCHY4_DELTA_R1 = 2.556556556556557

# sum_ij 1/(c_i + c_j) for c = (1, 2, 3)
CAUCHY_S_123 = Fraction(149, 60)
# sum eta_i eta_j / (c_i + c_j) for c = (1, 2), eta = (1, -1)
CAUCHY_WITNESS_12 = Fraction(1, 12)

# X, Y iid uniform on [1, 2]: E|X+Y| = 3, E|X+Y|^3 = 28.5
UNIFORM_PLUS = {1.0: 3.0, 3.0: 28.5}


def brute_force_delta(r: int, a: Fraction, p: Fraction) -> Fraction:
    q = 1 - p
    return (p * p * (2 * a) ** r + q * q * Fraction(2) ** r
            + 2 * p * q * (a - 1) ** r - 2 * p * q * (a + 1) ** r)


def smoothed_r3_shift(eps: float) -> float:
    """Delta_eps - Delta for the r = 3 law, exact in eps.

    With V = U1 + U2 (U uniform on [-1, 1]) one has E V^2 = 2/3 and
    E|V|^3 = 4/5; expanding |z + eps V|^3 around each atom pair gives this
    polynomial (valid while eps < 1/2 keeps bumps away from 0 except for the
    z = 0 pairs, which contribute the |V|^3 term).
    """
    a, p = 64.0, 3 / 512
    q = 1 - p
    return 2 * eps**2 * (2 * a * p * p + 2 * q * q - 4 * p * q) - (p * p + q * q) * 0.8 * eps**3


# Golden corpus: (text, x, value by direct Python arithmetic)
import math  # noqa: E402

GOLDEN = [
    ("1", 0.0, 1.0),
    ("x", 2.5, 2.5),
    ("2^(2*3/(3-2))", 0.0, 2.0 ** (2 * 3 / (3 - 2))),
    ("abs(x)", -3.0, 3.0),
    ("exp(0)+1", 0.0, math.exp(0.0) + 1.0),
    ("-2^2", 0.0, -(2.0**2)),
    ("2^3^2", 0.0, 2.0 ** (3.0**2)),
    ("1-2-3", 0.0, (1.0 - 2.0) - 3.0),
    ("8/4/2", 0.0, (8.0 / 4.0) / 2.0),
    ("x*x+1/x", 0.7, 0.7 * 0.7 + 1.0 / 0.7),
    ("sqrt(x)+log(x)", 3.3, math.sqrt(3.3) + math.log(3.3)),
    ("exp(-x^2/2)", 1.3, math.exp(-(1.3**2) / 2.0)),
    ("1/(x+2)", 0.25, 1.0 / (0.25 + 2.0)),
    ("2^(-x)", 5.0, 2.0 ** (-5.0)),
    ("x^2.5-x", 1.7, 1.7**2.5 - 1.7),
    ("log(1+x)/x", 1e-3, math.log(1.0 + 1e-3) / 1e-3),
    ("abs(x-3)*sqrt(2)", 1.25, abs(1.25 - 3.0) * math.sqrt(2.0)),
    ("(x+1)*(x-1)", 4.5, (4.5 + 1.0) * (4.5 - 1.0)),
    ("3/(2^3*64)", 0.0, 3.0 / (2.0**3 * 64.0)),
    ("-(-x)", 6.0, -(-6.0)),
]

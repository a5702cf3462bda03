"""Systems of coset representatives for the congruence subgroups in use.

Ordering contract for every system: the translation-type matrices come first
in increasing order of their translation parameter, the inversion-type matrix
(or matrices) last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

from gmpy2 import mpc

from .numerics import working_precision


class CosetRep(NamedTuple):
    a: int
    b: int
    c: int
    d: int

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "CosetRep") -> "CosetRep":
        a, b, c, d = self
        e, f, g, h = other
        return CosetRep(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def inverse(self) -> "CosetRep":
        # valid for determinant one
        return CosetRep(self.d, -self.b, -self.c, self.a)

    def apply(self, z, P: int = 0) -> mpc:
        """Moebius action; rounds to ``P`` bits (default: the precision of z)."""
        if not isinstance(z, mpc):
            z = mpc(z, precision=P or 53)
        P = P or max(z.precision)
        with working_precision(P):
            return (self.a * z + self.b) / (self.c * z + self.d)

    def is_translation(self) -> bool:
        return self.a == 1 and self.c == 0 and self.d == 1


IDENTITY = CosetRep(1, 0, 0, 1)
S = CosetRep(0, -1, 1, 0)


def T(n: int) -> CosetRep:
    return CosetRep(1, n, 0, 1)


@dataclass(frozen=True)
class CosetSystem:
    """Representatives of G' \\ G.

    Membership of ``M`` in G' is ``b = 0 mod modulus`` and, when
    ``principal48`` is set, additionally ``M = +-1 mod 48``.
    """

    group_tag: str
    reps: Tuple[CosetRep, ...]
    modulus: int
    principal48: bool = False

    def __len__(self):
        return len(self.reps)

    def __iter__(self):
        return iter(self.reps)

    def __getitem__(self, i):
        return self.reps[i]

    def member(self, M: CosetRep) -> bool:
        if M.b % self.modulus:
            return False
        if self.principal48:
            a, b, c, d = (x % 48 for x in M)
            return (b, c) == (0, 0) and (a, d) in ((1, 1), (47, 47))
        return True

    def equivalent(self, M1: CosetRep, M2: CosetRep) -> bool:
        return self.member(M1 @ M2.inverse())

    @property
    def translations(self) -> Tuple[CosetRep, ...]:
        return tuple(M for M in self.reps if M.is_translation())


def _prime_factors(n: int):
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def gamma0_index(N: int) -> int:
    """[Gamma : Gamma^0(N)] = N prod_{p | N} (1 + 1/p)."""
    idx = N
    for p in _prime_factors(N):
        idx = idx // p * (p + 1)
    return idx


def reps_gamma0_prime(ell: int) -> CosetSystem:
    """T^0, ..., T^(ell-1), S."""
    reps = tuple(T(nu) for nu in range(ell)) + (S,)
    return CosetSystem(f"Gamma^0({ell})\\Gamma", reps, ell)


def projective_line(N: int):
    """One (c, d) per point of P^1(Z/N), in order of first appearance."""
    units = [u for u in range(1, N) if math.gcd(u, N) == 1] or [0]
    seen = set()
    out = []
    for c in range(N):
        for d in range(N):
            if (c, d) in seen or math.gcd(math.gcd(c, d), N) != 1:
                continue
            out.append((c, d))
            seen.update(((u * c) % N, (u * d) % N) for u in units)
    return out


def lift_bottom_row(c: int, d: int, N: int) -> CosetRep:
    """Matrix in SL2(Z) with bottom row congruent to (c, d) mod N."""
    if c == 0:
        c = N
    t = 0
    while math.gcd(c, d + t * N) != 1:
        t += 1
    d = d + t * N
    # a d - b c = 1
    g, x, y = _ext_gcd(d, c)
    return CosetRep(x, -y, c, d)


def _ext_gcd(a: int, b: int):
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def reps_gamma0_composite(N: int) -> CosetSystem:
    """Representatives of Gamma^0(N) \\ Gamma for arbitrary N >= 2.

    Points (c:d) of P^1(Z/N) index the cosets of Gamma_0(N); a lift L of
    (c:d) gives the Gamma^0(N) coset of S L.  The classes of the
    translations are emitted as T^nu directly.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    translations, others = [], []
    for c, d in projective_line(N):
        if c == 0:
            continue
        unit = math.gcd(c, N) == 1
        if unit:
            # (c:d) ~ (1:nu); S L is then equivalent to T^nu
            nu = (d * pow(c, -1, N)) % N
            translations.append(nu)
        else:
            others.append(S @ lift_bottom_row(c, d, N))
    reps = tuple(T(nu) for nu in sorted(translations)) + tuple(others) + (S,)
    return CosetSystem(f"Gamma^0({N})\\Gamma", reps, N)


def reps_schlaefli(ell: int) -> CosetSystem:
    """Representatives of (Gamma(48) cap Gamma^0(ell)) \\ Gamma(48)."""
    if math.gcd(ell, 48) != 1:
        raise ValueError("level must be prime to 48")
    k = pow(48, -1, ell)
    reps = tuple(T(48 * nu) for nu in range(ell))
    reps += (CosetRep(1 - 48 * k, 48 * k, -48 * k, 1 + 48 * k),)
    return CosetSystem(f"(Gamma(48) cap Gamma^0({ell}))\\Gamma(48)", reps, ell, principal48=True)


def reps_generalized_schlaefli(ell: int, N: int) -> CosetSystem:
    """Representatives of Gamma^0(ell N) \\ Gamma^0(N)."""
    if math.gcd(ell, N) != 1:
        raise ValueError("level must be prime to N")
    k = pow(N, -1, ell)
    reps = tuple(T(N * nu) for nu in range(ell))
    reps += (CosetRep(1 - N * k, N * k, -N * k, 1 + N * k),)
    return CosetSystem(f"Gamma^0({ell * N})\\Gamma^0({N})", reps, ell * N)


def coset_system(fam) -> CosetSystem:
    """The representatives whose conjugates multiply out to the family's polynomial."""
    if fam.kind == "schlaefli":
        return reps_schlaefli(fam.ell)
    if fam.kind == "eta2quotient":
        return reps_generalized_schlaefli(fam.ell, fam.N)
    return reps_gamma0_prime(fam.ell)

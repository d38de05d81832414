"""Derive and check the three binomial-sum identities end to end.

Prints the certificate, the closed form and an exact grid check for each:

    python3 scripts/identities.py [--nmax 12]
"""
import argparse
import time

from ring_telescope.expr import to_text
from ring_telescope.summation_api import (
    creative_telescope,
    solve_first_order_recurrence,
    telescope,
    verify_identity,
)


def partial_binomial_sums(nmax):
    r = telescope("Sum(i,0,k-1,Binomial(n,i))", "k", ("n",))
    lhs, rhs = r.identity("b")
    print("sum_{k=0}^{b} sum_{i<k} binom(n,i)")
    print(f"  G(k) = {to_text(r.G)}")
    print(f"  identity: {to_text(lhs)} = {to_text(rhs)}")
    print(f"  {verify_identity(lhs, rhs, f'n=2..{nmax},b=1..n', names=('n', 'b'))}")


def alternating_inverse_binomials(nmax):
    r = telescope("(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i))", "k", ("n",))
    lhs, rhs = r.identity("b")
    print("sum_{k=0}^{b} (-1)^k binom(n,k)^(-1) sum_{i<k} binom(n,i)")
    print(f"  G(k) = {to_text(r.G)}")
    print(f"  c = {r.constant}")
    print(f"  identity: {to_text(lhs)} = {to_text(rhs)}")
    print(f"  {verify_identity(lhs, rhs, f'n=2..{nmax},b=0..n', names=('n', 'b'))}")


def binomial_times_alternating_harmonic(nmax):
    res = creative_telescope("Binomial(n,k)*Sum(i,1,k,(-1)^i/i)")
    closed = solve_first_order_recurrence(res.recurrence, 0)
    print("S(n) = sum_{k=0}^{n} binom(n,k) sum_{i=1}^{k} (-1)^i/i")
    print(f"  recurrence: {res.recurrence}")
    print(f"  certificate: {to_text(res.certificate)}")
    print(f"  closed form: S(n) = {to_text(closed)}")
    print(f"  {verify_identity(res.recurrence.definition, closed, f'n=0..{nmax}')}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nmax", type=int, default=12)
    args = parser.parse_args()
    for fn in (partial_binomial_sums, alternating_inverse_binomials, binomial_times_alternating_harmonic):
        t0 = time.perf_counter()
        fn(args.nmax)
        print(f"  ({time.perf_counter() - t0:.2f} s)\n")


if __name__ == "__main__":
    main()

"""Small hand-built configurations shared by several test modules."""
from fuzzypi.inference import RuleBase
from fuzzypi.membership import LEFT_TRAPEZOID, RIGHT_TRAPEZOID, MembershipBank, MembershipFunction


def small_bank(gap=False):
    """Two functions per input; with ``gap`` input 0 has no coverage on (-1/4, 1/4)."""
    if gap:
        f0 = (MembershipFunction("a", RIGHT_TRAPEZOID, c=-1, d="-0.25"),
              MembershipFunction("b", LEFT_TRAPEZOID, e="0.25", f=1))
    else:
        f0 = (MembershipFunction("a", RIGHT_TRAPEZOID, c="-0.5", d="0.5"),
              MembershipFunction("b", LEFT_TRAPEZOID, e="-0.5", f="0.5"))
    f1 = (MembershipFunction("c", RIGHT_TRAPEZOID, c="-1/3", d="0.4"),
          MembershipFunction("d", LEFT_TRAPEZOID, e="-0.3", f="0.7"))
    return MembershipBank((f0, f1))


def small_rules():
    """First-order consequents with non-dyadic coefficients."""
    rows = [(0, 0, "-0.7", "0.3", "-0.6"), (0, 1, "0.45", "-0.9", "0.1"),
            (1, 0, "0.2", "0.8", "-1/3"), (1, 1, "-0.55", "0.6", "0.9")]
    return RuleBase.from_rows((2, 2), rows)


def bank_dicts(bank):
    """Plain dicts of the real breakpoints, as the brute-force oracle expects."""
    return [[{"kind": fn.kind, "c": fn.c, "d": fn.d, "e": fn.e, "f": fn.f, "m": fn.m}
             for fn in fs] for fs in bank.inputs]

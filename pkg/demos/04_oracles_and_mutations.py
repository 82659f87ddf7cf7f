"""
Do the oracles catch sign errors?
=================================

Sign mistakes in cross products are the classic bug in attitude code, and
a wrong sign can still give a self-consistent simulation. Here the check
suite runs on the real geometry, then on copies with the connection or the
constraint differential negated.
"""
from geocbf.checks import CheckContext, format_table, mutated_context, run_checks

print(format_table(run_checks(CheckContext(quick=True))))

for kind in ("connection", "dh0"):
    failed = [r for r in run_checks(mutated_context(kind, quick=True)) if not r.passed]
    print(f"\nflipped {kind}: {len(failed)} checks fail")
    for r in failed:
        print(f"  {r.module}/{r.name}: {r.detail}")

# Note that negating the connection keeps it metric compatible; the torsion
# and Euler-equation oracles are what expose it.

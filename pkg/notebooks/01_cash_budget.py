"""Walkthrough: checking, repairing and querying the bundled cash budget.

Run with ``python notebooks/01_cash_budget.py``.

The table holds two years of a cash budget.  Three rules tie the rows
together: detail items add up to their section total, net cash inflow is
receipts minus disbursements, and the ending balance is the beginning cash
plus the net inflow.  In 2003 the total cash receipts row says 250 while its
details (100 + 120) add up to 220.
"""

from __future__ import annotations

from numrepair import check, check_repair, cqa, load_fixture, make_query, minimal_supports
from numrepair.relational import CellRef

project = load_fixture("cash_budget")
inst, cs = project.instance, project.constraints

print("== constraints")
print(project.constraints_text)

# 1. Which ground constraints fail?  Only the 2003 ones.
print("== violations")
print(check(inst, cs).to_table())


# 2. Card-minimal repairs change as few cells as possible.  One cell suffices.
print("\n== card-minimal repairs")
card = minimal_supports(inst, cs, "card")
for entry in card.supports:
    for u in entry.sample:
        print(f"k* = {card.kstar}: {u.cell} {inst.value(u.cell)} -> {u.value}")

# 3. Set-minimal repairs also keep changes minimal, but by inclusion.  Many
# larger supports qualify, e.g. raising cash sales, long-term financing and
# total disbursements by 30 each.
print("\n== set-minimal supports with at most 3 cells")
set_report = minimal_supports(inst, cs, "set", max_support=3)
for entry in set_report.supports:
    rows = ", ".join(inst.row(c.tuple_id)[2] for c in entry.cells)
    print(f"  {{{rows}}}")
print(f"  complete: {set_report.complete} (larger supports were not searched)")


# 4. Repair checking: three candidate updates of 2003.
def at(row: int) -> CellRef:
    return CellRef("CashBudget", row, "Value")


candidates = {
    "total receipts -> 220": [(at(3), 220)],
    "cash sales 130, financing 70, disbursements 190": [(at(1), 130), (at(6), 70), (at(7), 190)],
    "cash sales 110, receivables 110, total 220": [(at(1), 110), (at(2), 110), (at(3), 220)],
}
print("\n== repair checking")
for name, updates in candidates.items():
    verdicts = [check_repair(inst, cs, updates, s) for s in ("set", "card")]
    print(f"  {name}: set-minimal={verdicts[0].is_minimal}, card-minimal={verdicts[1].is_minimal}")

# 5. Consistent answers: a fact holds if it survives every minimal repair.
print("\n== consistent answers")
queries = [
    ((2003, "Receipts", "cash sales", "det", 100), "set"),
    ((2003, "Receipts", "cash sales", "det", 100), "card"),
    ((2003, "Receipts", "total cash receipts", "aggr", 220), "card"),
    ((2003, "Receipts", "total cash receipts", "aggr", 250), "card"),
]
for values, semantics in queries:
    verdict = cqa(inst, cs, make_query(inst, "CashBudget", values), semantics, max_support=3)
    print(f"  {verdict.query} under {semantics}: {verdict.answer}")

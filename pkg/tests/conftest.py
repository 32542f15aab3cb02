from __future__ import annotations

import pytest

from numrepair.project import fixture_path, load_fixture
from numrepair.relational import CellRef

# row indices of the cash budget fixture (2003 rows come first, 2004 rows are +10)
BEGINNING_CASH = 0
CASH_SALES = 1
RECEIVABLES = 2
TOTAL_RECEIPTS = 3
PAYMENT_OF_ACCOUNTS = 4
CAPITAL_EXPENDITURE = 5
LONG_TERM_FINANCING = 6
TOTAL_DISBURSEMENTS = 7
NET_CASH_INFLOW = 8
ENDING_BALANCE = 9


def cell(row: int) -> CellRef:
    return CellRef("CashBudget", row, "Value")


@pytest.fixture(scope="session")
def budget():
    return load_fixture("cash_budget")


@pytest.fixture(scope="session")
def budget_dir():
    return fixture_path("cash_budget")


@pytest.fixture(scope="session")
def budget_sales():
    return load_fixture("cash_budget_sales")

import os
import stat
from pathlib import Path

import pytest

from solrepair.prompts import format_reply

FIXTURES = Path(__file__).parent / "fixtures"

VAULT_ORIGINAL = """\
        require(balances[msg.sender] >= amount, "insufficient balance");
        (bool success, ) = msg.sender.call{value: amount}("");
        require(success, "transfer failed");
        balances[msg.sender] -= amount;
        totalDeposits -= amount;"""

VAULT_FIXED = """\
        require(balances[msg.sender] >= amount, "insufficient balance");
        balances[msg.sender] -= amount;
        totalDeposits -= amount;
        (bool success, ) = msg.sender.call{value: amount}("");
        require(success, "transfer failed");"""


@pytest.fixture
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture
def reentrancy_project() -> Path:
    return FIXTURES / "reentrancy_project"


@pytest.fixture
def vault_report() -> Path:
    return FIXTURES / "reports" / "vault_audit.md"


def vault_stub_replies() -> dict[str, str]:
    """Canned backend replies for the reentrancy fixture, keyed by
    template id; authored together with the fixture so the generated pair
    anchors exactly."""
    return {
        "Q2": (
            "1. The attacker deposits a small amount to obtain a balance.\n"
            "2. The attacker calls withdraw() from a contract whose "
            "receive hook re-enters Vault.withdraw().\n"
            "3. Because balances is only reduced after the external call, "
            "each re-entry passes the balance check again.\n"
            "4. The attacker repeats until the vault's ether is drained.\n"
        ),
        "Q3": format_reply([
            {"title": "Reorder withdraw to checks-effects-interactions",
             "rationale": "Update balances and totalDeposits before the "
                          "external call so a re-entering caller sees the "
                          "reduced balance."},
            {"title": "Add a reentrancy guard to withdraw",
             "rationale": "A mutex state variable rejects nested calls "
                          "into withdraw."},
            {"title": "Switch to pull payments",
             "rationale": "Credit withdrawals and let users claim via a "
                          "separate transfer-only function."},
        ], "q3_strategies"),
        "Q4": format_reply({"contracts": [], "functions": [],
                            "state_variables": ["totalDeposits"]},
                           "q1_entities"),
        "Q5": format_reply({
            "file": "contracts/Vault.sol",
            "original_snippet": VAULT_ORIGINAL,
            "fixed_snippet": VAULT_FIXED,
            "explanation": "State updates now precede the external call, "
                           "so re-entering withdraw() fails the balance "
                           "check.",
        }, "q5_pair"),
        "VALIDATOR": format_reply({"fixed": True, "recommendations": []},
                                  "validator_verdict"),
    }


@pytest.fixture
def stub_replies() -> dict[str, str]:
    return vault_stub_replies()


def make_fake_compiler(directory: Path, name: str, exit_code: int,
                       message: str = "") -> str:
    """A stand-in compiler executable for exercising compile_check."""
    path = directory / name
    lines = ["#!/bin/sh"]
    if message:
        lines.append(f"echo '{message}' >&2")
    lines.append(f"exit {exit_code}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP
               | stat.S_IXOTH)
    return str(path)


@pytest.fixture
def good_compiler(tmp_path) -> str:
    return make_fake_compiler(tmp_path, "solc-ok", 0)


@pytest.fixture
def failing_compiler(tmp_path) -> str:
    return make_fake_compiler(
        tmp_path, "solc-bad", 1,
        "Error: undeclared identifier 'frobnicate'")

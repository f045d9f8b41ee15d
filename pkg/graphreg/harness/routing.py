"""Routing (conditional edge) functions for the expansion chain.

Each function takes an ExpansionState dict and returns the name of the next node.
"""

from __future__ import annotations


def route_after_evaluate(state: dict) -> str:
    if state["current_m"] < state["m_max"]:
        return "attach"
    return "end"

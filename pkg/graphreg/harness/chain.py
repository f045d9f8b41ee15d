"""LangGraph state machine for one expansion chain.

build_chain() returns the compiled StateGraph:

    init -> batch -> evaluate -> attach -> batch -> evaluate -> ... -> END

init solves the batch problem on the first m0 nodes and factors it; attach
adds one node with the recursive update; batch re-solves LRG and LR on the
current graph; evaluate scores all three on the test data. The loop stops
once the graph holds m_max nodes.
"""

from __future__ import annotations

from langgraph.graph import END, START, StateGraph

from graphreg.harness.nodes import attach_node, batch_node, evaluate_node, init_node
from graphreg.harness.routing import route_after_evaluate
from graphreg.harness.state import ExpansionState

# Graph steps per inserted node (attach, batch, evaluate), plus slack for init.
_STEPS_PER_NODE = 3
_STEP_SLACK = 8


def build_chain():
    """Build and compile the expansion StateGraph."""
    builder = StateGraph(ExpansionState)

    builder.add_node("init", init_node)
    builder.add_node("attach", attach_node)
    builder.add_node("batch", batch_node)
    builder.add_node("evaluate", evaluate_node)

    builder.add_edge(START, "init")
    builder.add_edge("init", "batch")
    builder.add_edge("attach", "batch")
    builder.add_edge("batch", "evaluate")
    builder.add_conditional_edges(
        "evaluate", route_after_evaluate, {"attach": "attach", "end": END}
    )

    return builder.compile()


def run_chain(chain, state: dict) -> dict:
    """Drive one chain from m0 to m_max and return the final state."""
    steps = _STEPS_PER_NODE * (state["m_max"] - state["m0"] + 1) + _STEP_SLACK
    initial = {
        "rows": [],
        "selected": [],
        "timings": {},
        "recursion": None,
        "W_lrg": None,
        "W_lr": None,
        "current_step": "",
        **state,
    }
    return chain.invoke(initial, config={"recursion_limit": steps})

"""
Monotone trees and projection of dissipative dynamics onto them.

A monotone tree is a tree of smooth arcs along whose every path H is strictly
monotone. Every arc is stored oriented away from the root (the node with the
smallest H). On an arc the motion uses h = H as internal coordinate:
dh/dt = D_x(H)(W(x)), and motions are glued at nodes on the unique path to
the root.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from constants import (
    CSV_SIGNIFICANT_DIGITS,
    DEFAULT_TREE_GRID,
    FD_STEP_SCALE,
    MONOTONE_FLOOR,
    NODE_MATCH_TOL,
    RK4_MONOTONE_FACTOR,
    SIGN_TOL,
)
from dynamics import AuditReport, VectorField, dissipation
from lyapunov import LyapunovFunction
from manifold import Chart, ParamBox
from validators import (
    DimensionMismatch,
    DissipathError,
    DomainViolation,
    MonotonicityFloorViolated,
    NotATree,
    StepFailure,
    validate_matrix,
    validate_positive,
    validate_step_count,
    validate_vector,
)

logger = logging.getLogger(__name__)

CURVE_KINDS = ("segment", "bezier")


@dataclass(frozen=True)
class ArcCurve:
    """Segment (2 control points) or quadratic Bezier (3 control points) on s in [0, 1]."""

    kind: str
    points: np.ndarray

    def __post_init__(self) -> None:
        expected = {"segment": 2, "bezier": 3}.get(self.kind)
        if expected is None:
            raise NotATree(f"unknown arc curve kind {self.kind!r}")
        if self.points.shape[0] != expected:
            raise DimensionMismatch(f"{self.kind} needs {expected} control points")

    def position(self, s: float) -> np.ndarray:
        P = self.points
        if self.kind == "segment":
            return P[0] + s * (P[1] - P[0])
        return (1.0 - s) ** 2 * P[0] + 2.0 * (1.0 - s) * s * P[1] + s**2 * P[2]

    def derivative(self, s: float) -> np.ndarray:
        P = self.points
        if self.kind == "segment":
            return P[1] - P[0]
        return 2.0 * (1.0 - s) * (P[1] - P[0]) + 2.0 * s * (P[2] - P[1])

    def reversed(self) -> "ArcCurve":
        return ArcCurve(self.kind, self.points[::-1].copy())


def segment(start, end) -> ArcCurve:
    return ArcCurve("segment", validate_matrix([start, end], rows=2, name="segment"))


def bezier(start, control, end) -> ArcCurve:
    return ArcCurve("bezier", validate_matrix([start, control, end], rows=3, name="bezier"))


@dataclass(frozen=True)
class Arc:
    """Arc oriented away from the root: curve(0) is the parent node, curve(1) the child."""

    arc_id: str
    parent: str
    child: str
    curve: ArcCurve


@dataclass(frozen=True)
class MonotoneTree:
    graph: nx.Graph = field(repr=False)
    positions: Dict[str, np.ndarray]
    arcs: Dict[str, Arc]
    root: str
    parent_arc: Dict[str, str]
    dim: int

    def is_leaf(self, node: str) -> bool:
        return node != self.root and self.graph.degree[node] == 1


@dataclass(frozen=True)
class TreeState:
    """Point on the tree; arc_id is None at the root."""

    arc_id: Optional[str]
    s: float
    x: np.ndarray
    h: float


@dataclass(frozen=True)
class TreeRate:
    ds_dt: float
    dh_dt: float
    diss_full: float
    at_root: bool


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    offending_arcs: List[str]
    min_slope: float
    unique_root: bool


@dataclass
class TreeTrajectory:
    times: np.ndarray
    arc_ids: List[Optional[str]]
    s_values: np.ndarray
    states: np.ndarray
    h_values: np.ndarray
    diss_full: np.ndarray
    h_rates: np.ndarray
    dt: float
    status: str = "ok"


def build_tree(
    nodes: Sequence[Tuple[str, Sequence[float]]],
    arcs: Sequence[Tuple[str, str, str, ArcCurve]],
    Hfun: LyapunovFunction,
) -> MonotoneTree:
    """
    Assemble a tree, pick the root x* = argmin H over nodes and orient arcs away from it.

    Args:
        nodes: (node id, position) pairs
        arcs: (arc id, from node, to node, curve from -> to) tuples
        Hfun: Lyapunov function used to select the root

    Raises:
        NotATree: On cycles, disconnection, duplicate ids or endpoint mismatches
    """
    if not nodes:
        raise NotATree("a tree needs at least one node")
    graph = nx.Graph()
    positions: Dict[str, np.ndarray] = {}
    for node_id, position in nodes:
        if node_id in positions:
            raise NotATree(f"duplicate node id {node_id!r}")
        positions[node_id] = validate_vector(position, Hfun.dim, f"position of {node_id}")
        graph.add_node(node_id)

    stored: Dict[str, Tuple[str, str, ArcCurve]] = {}
    for arc_id, u, v, curve in arcs:
        if arc_id in stored:
            raise NotATree(f"duplicate arc id {arc_id!r}")
        if u not in positions or v not in positions:
            raise NotATree(f"arc {arc_id!r} references an unknown node")
        if graph.has_edge(u, v) or u == v:
            raise NotATree(f"arc {arc_id!r} closes a cycle")
        if curve.points.shape[1] != Hfun.dim:
            raise DimensionMismatch(f"arc {arc_id!r} lives in R^{curve.points.shape[1]}")
        for s, node in ((0.0, u), (1.0, v)):
            if np.linalg.norm(curve.position(s) - positions[node]) > NODE_MATCH_TOL:
                raise NotATree(f"arc {arc_id!r} does not end at node {node!r}")
        stored[arc_id] = (u, v, curve)
        graph.add_edge(u, v, arc_id=arc_id)

    if not nx.is_tree(graph):
        raise NotATree("graph is not a tree (disconnected or cyclic)")

    root = min(positions, key=lambda node: Hfun.value(positions[node]))
    oriented: Dict[str, Arc] = {}
    parent_arc: Dict[str, str] = {}
    for parent, child in nx.bfs_edges(graph, root):
        arc_id = graph.edges[parent, child]["arc_id"]
        u, _, curve = stored[arc_id]
        if u != parent:
            curve = curve.reversed()
        oriented[arc_id] = Arc(arc_id=arc_id, parent=parent, child=child, curve=curve)
        parent_arc[child] = arc_id

    return MonotoneTree(
        graph=graph,
        positions=positions,
        arcs=oriented,
        root=root,
        parent_arc=parent_arc,
        dim=Hfun.dim,
    )


def validate_monotone(
    tree: MonotoneTree, Hfun: LyapunovFunction, grid: int = DEFAULT_TREE_GRID
) -> MonotonicityReport:
    """
    Check d(H o curve)/ds >= delta_mono on `grid` points per arc and the uniqueness of the root.

    Derivatives are central differences, one-sided at the arc ends.

    Raises:
        NotATree: If the underlying graph is not a tree
    """
    if not nx.is_tree(tree.graph):
        raise NotATree("graph is not a tree (disconnected or cyclic)")
    grid = max(int(grid), 2)

    node_values = sorted(Hfun.value(x) for x in tree.positions.values())
    unique_root = len(node_values) < 2 or (
        node_values[1] - node_values[0] > SIGN_TOL * (1.0 + abs(node_values[0]))
    )

    offending: List[str] = []
    min_slope = np.inf
    for arc_id, arc in tree.arcs.items():
        slopes = [_fd_slope(arc.curve, Hfun, s) for s in np.linspace(0.0, 1.0, grid)]
        min_slope = min(min_slope, min(slopes))
        if min(slopes) < MONOTONE_FLOOR:
            offending.append(arc_id)

    passed = unique_root and not offending
    if not passed:
        logger.warning("tree is not monotone: arcs %s, unique root %s", offending, unique_root)
    return MonotonicityReport(
        passed=passed,
        offending_arcs=offending,
        min_slope=float(min_slope),
        unique_root=unique_root,
    )


def _fd_slope(curve: ArcCurve, Hfun: LyapunovFunction, s: float) -> float:
    lo = max(s - FD_STEP_SCALE, 0.0)
    hi = min(s + FD_STEP_SCALE, 1.0)
    return (Hfun.value(curve.position(hi)) - Hfun.value(curve.position(lo))) / (hi - lo)


def root_state(tree: MonotoneTree, Hfun: LyapunovFunction) -> TreeState:
    x = tree.positions[tree.root]
    return TreeState(arc_id=None, s=0.0, x=x, h=Hfun.value(x))


def tree_state(tree: MonotoneTree, Hfun: LyapunovFunction, arc_id: str, s: float) -> TreeState:
    """
    State at parameter s of an arc (oriented away from the root).

    Raises:
        NotATree: If the arc is unknown
        DomainViolation: If s lies outside [0, 1]
    """
    if arc_id not in tree.arcs:
        raise NotATree(f"unknown arc {arc_id!r}")
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise DomainViolation(f"arc parameter s={s} of arc {arc_id!r} lies outside [0, 1]")
    x = tree.arcs[arc_id].curve.position(s)
    return TreeState(arc_id=arc_id, s=s, x=x, h=Hfun.value(x))


def node_state(tree: MonotoneTree, Hfun: LyapunovFunction, node: str) -> TreeState:
    """A node seen from its rootward arc (s = 1), or the root state."""
    if node == tree.root:
        return root_state(tree, Hfun)
    return tree_state(tree, Hfun, tree.parent_arc[node], 1.0)


def path_to_root(tree: MonotoneTree, state: TreeState) -> List[str]:
    """Arc ids from the state's arc down to the root; H decreases along them."""
    if state.arc_id is None:
        return []
    start = tree.arcs[state.arc_id].parent
    nodes = nx.shortest_path(tree.graph, start, tree.root)
    return [state.arc_id] + [tree.graph.edges[u, v]["arc_id"] for u, v in zip(nodes, nodes[1:])]


def tree_reduced_rhs(
    tree: MonotoneTree, Hfun: LyapunovFunction, field: VectorField, state: TreeState
) -> TreeRate:
    """
    Arc speed ds/dt = D_x(H)(W(x)) / (d(H o curve)/ds).

    diss_full is D_x(H)(W(x)); dh_dt is D_x(H) applied to the arc velocity
    curve'(s) ds/dt, so the two agree exactly when the arc speed is right.
    At the root the state is clamped: ds/dt = 0 with the at_root flag.

    Raises:
        MonotonicityFloorViolated: If d(H o curve)/ds < delta_mono at the state
    """
    if state.arc_id is None:
        x = tree.positions[tree.root]
        diss_full = dissipation(Hfun, x, field(x))
        return TreeRate(ds_dt=0.0, dh_dt=0.0, diss_full=diss_full, at_root=True)
    curve = tree.arcs[state.arc_id].curve
    x = curve.position(state.s)
    diss_full = dissipation(Hfun, x, field(x))
    tangent = curve.derivative(state.s)
    slope = float(Hfun.grad(x) @ tangent)
    if slope < MONOTONE_FLOOR:
        raise MonotonicityFloorViolated(
            f"dH/ds = {slope:.3e} below {MONOTONE_FLOOR} on arc {state.arc_id!r} at s={state.s}"
        )
    ds_dt = diss_full / slope
    dh_dt = dissipation(Hfun, x, tangent * ds_dt)
    return TreeRate(ds_dt=ds_dt, dh_dt=dh_dt, diss_full=diss_full, at_root=False)


def arc_chart(arc: Arc) -> Chart:
    """The arc as a one-dimensional chart on [0, 1]."""
    curve = arc.curve
    return Chart(
        m=1,
        n=curve.points.shape[1],
        embed_fn=lambda p: curve.position(p[0]),
        jac_fn=lambda p: curve.derivative(p[0]).reshape(-1, 1),
        param_domain=ParamBox(np.zeros(1), np.ones(1)),
        label=f"arc:{arc.arc_id}",
    )


def _arc_speed(
    tree: MonotoneTree, Hfun: LyapunovFunction, field: VectorField, arc_id: str, s: float
) -> float:
    # RK stages may overshoot a node; evaluate them at the arc end.
    state = tree_state(tree, Hfun, arc_id, float(np.clip(s, 0.0, 1.0)))
    return tree_reduced_rhs(tree, Hfun, field, state).ds_dt


def _advance(
    tree: MonotoneTree,
    Hfun: LyapunovFunction,
    field: VectorField,
    state: TreeState,
    dt: float,
) -> Tuple[TreeState, str]:
    """Advance one step of length dt, splitting it at node crossings."""
    remaining = dt
    status = "ok"
    for _ in range(2 * len(tree.arcs) + 2):
        if remaining <= 0.0 or state.arc_id is None:
            break
        arc = tree.arcs[state.arc_id]
        if state.s <= 0.0:
            if tree_reduced_rhs(tree, Hfun, field, state).ds_dt < 0.0:
                state = node_state(tree, Hfun, arc.parent)
                continue

        k1 = _arc_speed(tree, Hfun, field, arc.arc_id, state.s)
        k2 = _arc_speed(tree, Hfun, field, arc.arc_id, state.s + 0.5 * remaining * k1)
        k3 = _arc_speed(tree, Hfun, field, arc.arc_id, state.s + 0.5 * remaining * k2)
        k4 = _arc_speed(tree, Hfun, field, arc.arc_id, state.s + remaining * k3)
        s_new = state.s + remaining * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

        if s_new > 1.0:
            if not tree.is_leaf(arc.child):
                raise DissipathError(
                    f"field drives the state outward through branching node {arc.child!r}"
                )
            state = tree_state(tree, Hfun, arc.arc_id, 1.0)
            status = "clamped_at_leaf"
            break
        if s_new >= 0.0:
            state = tree_state(tree, Hfun, arc.arc_id, s_new)
            break

        # Crossing the parent node: locate it by linear interpolation in h.
        h_node = Hfun.value(tree.positions[arc.parent])
        slope_at_node = float(Hfun.grad(arc.curve.position(0.0)) @ arc.curve.derivative(0.0))
        h_virtual = h_node + slope_at_node * s_new
        fraction = (state.h - h_node) / (state.h - h_virtual)
        remaining -= float(np.clip(fraction, 0.0, 1.0)) * remaining
        logger.debug("crossing node %s, %.3e of the step left", arc.parent, remaining)
        state = node_state(tree, Hfun, arc.parent)

    if state.arc_id is None:
        status = "clamped_at_root"
    return state, status


def integrate_tree(
    tree: MonotoneTree,
    Hfun: LyapunovFunction,
    field: VectorField,
    state0: TreeState,
    dt: float,
    steps: int,
) -> TreeTrajectory:
    """
    RK4 in the arc parameter with motions glued at nodes along the path to the root.

    Records (t, arc_id, s, x, h, diss_full) after every step.

    Raises:
        StepFailure: If the monotonicity floor is violated at runtime or the field pushes
            the state outward through a branching node; the partial trajectory is attached
    """
    dt = validate_positive(dt, "dt")
    steps = validate_step_count(steps)

    times: List[float] = []
    states: List[TreeState] = []
    rates: List[TreeRate] = []
    status = "clamped_at_root" if state0.arc_id is None else "ok"

    def record(t: float, state: TreeState) -> None:
        rate = tree_reduced_rhs(tree, Hfun, field, state)
        times.append(t)
        states.append(state)
        rates.append(rate)

    def partial(final_status: str) -> TreeTrajectory:
        return _tree_trajectory(times, states, rates, dt, final_status, tree.dim)

    try:
        record(0.0, state0)
    except DissipathError as e:
        raise StepFailure(0, e, partial("step_failure")) from e

    state = state0
    for step in range(1, steps + 1):
        try:
            state, step_status = _advance(tree, Hfun, field, state, dt)
            record(step * dt, state)
        except DissipathError as e:
            logger.warning("tree integration stopped at step %d: %s", step, e.message)
            raise StepFailure(step, e, partial("step_failure")) from e
        if step_status != "ok":
            status = step_status

    return partial(status)


def _tree_trajectory(
    times: List[float],
    states: List[TreeState],
    rates: List[TreeRate],
    dt: float,
    status: str,
    dim: int,
) -> TreeTrajectory:
    return TreeTrajectory(
        times=np.array(times),
        arc_ids=[st.arc_id for st in states],
        s_values=np.array([st.s for st in states]),
        states=np.array([st.x for st in states]).reshape(-1, dim),
        h_values=np.array([st.h for st in states]),
        diss_full=np.array([r.diss_full for r in rates]),
        h_rates=np.array([r.dh_dt for r in rates]),
        dt=dt,
        status=status,
    )


def tree_audit(trajectory: TreeTrajectory) -> AuditReport:
    """Audit of a tree trajectory; rows clamped at the root are excluded from the gap."""
    moving = np.array([arc_id is not None for arc_id in trajectory.arc_ids], dtype=bool)
    gaps = np.abs(trajectory.h_rates - trajectory.diss_full)[moving]
    sign_violations = int(np.sum((trajectory.h_rates > SIGN_TOL) & (trajectory.diss_full <= 0.0)))
    allowance = RK4_MONOTONE_FACTOR * trajectory.dt**5
    monotonicity_violations = int(np.sum(np.diff(trajectory.h_values) > allowance))
    return AuditReport(
        max_dissipation_gap=float(np.max(gaps)) if gaps.size else 0.0,
        sign_violations=sign_violations,
        monotonicity_violations=monotonicity_violations,
        steps_completed=max(len(trajectory.times) - 1, 0),
        status=trajectory.status,
    )


def tree_trajectory_header(n: int) -> List[str]:
    return ["t", "arc_id", "s"] + [f"x_{i}" for i in range(1, n + 1)] + ["h", "diss_full"]


def write_tree_trajectory_csv(trajectory: TreeTrajectory, path: Path) -> None:
    """Write t,arc_id,s,x_1..x_n,h,diss_full; arc_id is empty at the root."""
    fmt = f".{CSV_SIGNIFICANT_DIGITS}g"
    n = trajectory.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(tree_trajectory_header(n))
        for k, t in enumerate(trajectory.times):
            arc_id = trajectory.arc_ids[k] or ""
            numbers = [trajectory.s_values[k], *trajectory.states[k]]
            tail = [trajectory.h_values[k], trajectory.diss_full[k]]
            writer.writerow(
                [format(t, fmt), arc_id]
                + [format(float(v), fmt) for v in numbers]
                + [format(float(v), fmt) for v in tail]
            )

"""Decision trees and forests over a finite probe space.

A forest reads an input tuple u in [alphabet]^cells through independent
decision trees, one per output coordinate.  Each tree probes input cells
along a root-to-leaf path and never probes the same cell twice on a path.
Outputs are plain integer symbols; a reserved sentinel value equal to the
output alphabet size stands for the blank symbol when the output space
allows it.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

DEFAULT_STATE_BUDGET = 1 << 26
DEFAULT_SET_BUDGET = 1 << 22

# Partial assignments bind a subset of input cells to fixed symbols.
PartialAssignment = Mapping[int, int]


class BudgetError(RuntimeError):
    """An exact computation would exceed its declared state budget."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason
        self.message = message


class UsageError(ValueError):
    """A request that is malformed rather than merely expensive."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason
        self.message = message


@dataclass(frozen=True)
class InputSpace:
    """Uniform product space of `cells` coordinates over [alphabet]."""

    cells: int
    alphabet: int

    def __post_init__(self):
        if self.cells < 1:
            raise UsageError("bad_space", "input space needs at least one cell")
        if self.alphabet < 2:
            raise UsageError("bad_space", "input alphabet must have size >= 2")

    def state_count(self) -> int:
        return self.alphabet ** self.cells

    def enumerable(self, budget: int = DEFAULT_STATE_BUDGET) -> bool:
        return self.state_count() <= budget


@dataclass(frozen=True)
class OutputSpace:
    """Output tuples of `cells` symbols over [alphabet], blank optional.

    The blank symbol is encoded as the integer `alphabet` (one past the
    ordinary symbols) so outputs stay plain unsigned ints.
    """

    cells: int
    alphabet: int
    bot_allowed: bool = False

    def __post_init__(self):
        if self.cells < 1:
            raise UsageError("bad_space", "output space needs at least one cell")
        if self.alphabet < 1:
            raise UsageError("bad_space", "output alphabet must have size >= 1")

    @property
    def bot(self) -> int | None:
        return self.alphabet if self.bot_allowed else None


@dataclass(frozen=True)
class Leaf:
    value: int


@dataclass(frozen=True)
class Internal:
    query: int
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise UsageError("bad_tree", "internal node has no children")


Node = Union[Leaf, Internal]


@dataclass(frozen=True)
class DecisionTree:
    root: Node


@dataclass(frozen=True)
class Transcript:
    """Probe sequence and final value of one tree evaluation."""

    steps: tuple  # ordered (cell, observed symbol) pairs
    value: int


def _validate_node(node: Node, path: set, space: InputSpace, out: OutputSpace) -> int:
    """Check one subtree and return its depth."""
    if isinstance(node, Leaf):
        limit = out.alphabet + (1 if out.bot_allowed else 0)
        if not 0 <= node.value < limit:
            raise UsageError("bad_leaf", f"leaf value {node.value} outside output range")
        return 0
    if not isinstance(node, Internal):
        raise UsageError("bad_tree", f"unknown node type {type(node).__name__}")
    if not 0 <= node.query < space.cells:
        raise UsageError("bad_query", f"query {node.query} outside input space")
    if node.query in path:
        raise UsageError("repeat_query", f"cell {node.query} probed twice on a path")
    if len(node.children) != space.alphabet:
        raise UsageError(
            "bad_fanout",
            f"node on cell {node.query} has {len(node.children)} children, "
            f"expected {space.alphabet}",
        )
    path.add(node.query)
    depth = 1 + max(_validate_node(c, path, space, out) for c in node.children)
    path.remove(node.query)
    return depth


def _node_cells(node: Node, acc: set) -> set:
    if isinstance(node, Internal):
        acc.add(node.query)
        for c in node.children:
            _node_cells(c, acc)
    return acc


@dataclass(frozen=True)
class DecisionForest:
    """One decision tree per output cell, evaluated on a shared input."""

    input_space: InputSpace
    output_space: OutputSpace
    trees: tuple

    def __post_init__(self):
        if len(self.trees) != self.output_space.cells:
            raise UsageError(
                "bad_arity",
                f"{len(self.trees)} trees for {self.output_space.cells} output cells",
            )
        depth = 0
        for t in self.trees:
            depth = max(depth, _validate_node(t.root, set(), self.input_space, self.output_space))
        object.__setattr__(self, "_depth", depth)

    @property
    def depth(self) -> int:
        return self._depth

    def mentioned_cells(self) -> list:
        """Sorted list of cells probed anywhere in the forest."""
        acc: set = set()
        for t in self.trees:
            _node_cells(t.root, acc)
        return sorted(acc)


@dataclass(frozen=True)
class BucketStructure:
    """Ordered partition of the input cells into query levels."""

    buckets: tuple

    def __post_init__(self):
        seen: set = set()
        for b in self.buckets:
            for c in b:
                if c in seen:
                    raise UsageError("bad_buckets", f"cell {c} in two buckets")
                seen.add(c)
        if seen != set(range(len(seen))) or not seen:
            raise UsageError("bad_buckets", "buckets must partition the cell range")
        object.__setattr__(self, "buckets", tuple(tuple(sorted(b)) for b in self.buckets))

    @property
    def cells(self) -> int:
        return sum(len(b) for b in self.buckets)

    def __len__(self) -> int:
        return len(self.buckets)


def is_bucketed(forest: DecisionForest, structure: BucketStructure) -> bool:
    """True when every level-t probe of every tree lands in bucket t."""
    if structure.cells != forest.input_space.cells:
        return False

    def walk(node: Node, level: int) -> bool:
        if isinstance(node, Leaf):
            return True
        if level >= len(structure) or node.query not in structure.buckets[level]:
            return False
        return all(walk(c, level + 1) for c in node.children)

    return all(walk(t.root, 0) for t in forest.trees)


# ---------------------------------------------------------------------------
# evaluation


def eval_tree(tree: DecisionTree, u) -> Transcript:
    """Evaluate one tree, returning the probe transcript and leaf value."""
    steps = []
    node = tree.root
    while isinstance(node, Internal):
        sym = u[node.query]
        steps.append((node.query, sym))
        node = node.children[sym]
    return Transcript(steps=tuple(steps), value=node.value)


def eval_forest(forest: DecisionForest, u) -> tuple:
    """Evaluate every tree on input u, returning the output tuple."""
    if len(u) != forest.input_space.cells:
        raise UsageError("bad_input", f"input has {len(u)} cells, expected {forest.input_space.cells}")
    lam = forest.input_space.alphabet
    for sym in u:
        if not 0 <= sym < lam:
            raise UsageError("bad_input", f"symbol {sym} outside input alphabet")
    return tuple(eval_tree(t, u).value for t in forest.trees)


# ---------------------------------------------------------------------------
# restriction and pruning


def _restrict_node(node: Node, assignment: PartialAssignment) -> Node:
    if isinstance(node, Leaf):
        return node
    if node.query in assignment:
        return _restrict_node(node.children[assignment[node.query]], assignment)
    return Internal(node.query, tuple(_restrict_node(c, assignment) for c in node.children))


def restrict(forest: DecisionForest, assignment: PartialAssignment) -> DecisionForest:
    """Hard-wire the assigned cells, short-circuiting their probes."""
    lam = forest.input_space.alphabet
    for cell, val in assignment.items():
        if not 0 <= cell < forest.input_space.cells:
            raise UsageError("bad_assignment", f"cell {cell} outside input space")
        if not 0 <= val < lam:
            raise UsageError("bad_assignment", f"value {val} outside input alphabet")
    trees = tuple(DecisionTree(_restrict_node(t.root, assignment)) for t in forest.trees)
    return DecisionForest(forest.input_space, forest.output_space, trees)


def prune_on_query_set(
    forest: DecisionForest, cells: Iterable[int], exempt_first_query: bool = False
) -> DecisionForest:
    """Replace any probe of `cells` with a blank leaf.

    With exempt_first_query the root probe of each tree is allowed even
    when it touches `cells`; only deeper probes are cut.  The result always
    permits the blank symbol.
    """
    cut = set(cells)
    out = OutputSpace(forest.output_space.cells, forest.output_space.alphabet, bot_allowed=True)
    bot = out.bot

    def prune(node: Node, is_root: bool) -> Node:
        if isinstance(node, Leaf):
            return node
        if node.query in cut and not (exempt_first_query and is_root):
            return Leaf(bot)
        return Internal(node.query, tuple(prune(c, False) for c in node.children))

    trees = tuple(DecisionTree(prune(t.root, True)) for t in forest.trees)
    return DecisionForest(forest.input_space, out, trees)


# ---------------------------------------------------------------------------
# exhaustive cube evaluation (shared by the analysis layer)


def _digits(idx: np.ndarray, rank: int, lam: int) -> np.ndarray:
    if lam == 2:
        return (idx >> rank) & 1
    return (idx // (lam ** rank)) % lam


def _check_enum_budget(lam: int, ncells: int, budget: int) -> int:
    states = lam ** ncells
    if states > budget:
        raise BudgetError(
            "enum_budget",
            f"{lam}^{ncells} states exceed the enumeration budget {budget}",
        )
    return states


def cube_order(forest: DecisionForest, extra_cells: Iterable[int] = ()) -> list:
    """Cells that matter for exhaustive work: probed ones plus extras."""
    return sorted(set(forest.mentioned_cells()) | set(extra_cells))


def eval_tree_on_cube(
    tree: DecisionTree, cells_order: list, lam: int, out_dtype=np.int16
) -> np.ndarray:
    """Evaluate one tree on every assignment of cells_order.

    Assignment index i encodes symbol (i // lam**rank) % lam for the cell at
    position rank in cells_order.  Cells outside cells_order must not be
    probed by the tree.
    """
    rank_of = {c: r for r, c in enumerate(cells_order)}
    n = lam ** len(cells_order)
    out = np.empty(n, dtype=out_dtype)

    def go(node: Node, idx: np.ndarray):
        if isinstance(node, Leaf):
            out[idx] = node.value
            return
        sym = _digits(idx, rank_of[node.query], lam)
        for v in range(lam):
            mask = sym == v
            if mask.any():
                go(node.children[v], idx[mask])

    go(tree.root, np.arange(n, dtype=np.int64))
    return out


def eval_forest_on_cube(
    forest: DecisionForest,
    cells_order: list | None = None,
    budget: int = DEFAULT_STATE_BUDGET,
) -> np.ndarray:
    """All outputs over the cube, as an (assignments, trees) matrix."""
    if cells_order is None:
        cells_order = cube_order(forest)
    lam = forest.input_space.alphabet
    n = _check_enum_budget(lam, len(cells_order), budget)
    width = forest.output_space.alphabet + 1
    dtype = np.uint8 if width <= 255 else np.int32
    out = np.empty((n, len(forest.trees)), dtype=dtype)
    for ti, tree in enumerate(forest.trees):
        out[:, ti] = eval_tree_on_cube(tree, cells_order, lam, out_dtype=dtype)
    return out


def packed_outputs_on_cube(
    forest: DecisionForest,
    cells_order: list | None = None,
    budget: int = DEFAULT_STATE_BUDGET,
) -> np.ndarray | None:
    """Outputs over the cube packed into one integer key per assignment.

    Keys are big-endian base (alphabet+1) over tree outputs.  Returns None
    when the packed range does not fit a signed 64-bit integer; callers then
    fall back to tuple-keyed dictionaries.
    """
    if cells_order is None:
        cells_order = cube_order(forest)
    base = forest.output_space.alphabet + 1
    m = len(forest.trees)
    if m * math.log2(base) > 62:
        return None
    lam = forest.input_space.alphabet
    _check_enum_budget(lam, len(cells_order), budget)
    packed = None
    for tree in forest.trees:
        col = eval_tree_on_cube(tree, cells_order, lam, out_dtype=np.int64)
        packed = col if packed is None else packed * base + col
    return packed


def unpack_output_key(key: int, m: int, base: int) -> tuple:
    digits = []
    for _ in range(m):
        key, d = divmod(key, base)
        digits.append(d)
    return tuple(reversed(digits))


def query_counts_on_cube(
    forest: DecisionForest,
    cells_order: list | None = None,
    budget: int = DEFAULT_STATE_BUDGET,
) -> tuple:
    """Per-assignment probe counts for every cell in cells_order.

    Returns (counts, cells_order) where counts[i, r] is the number of trees
    probing cells_order[r] on assignment i.
    """
    if cells_order is None:
        cells_order = cube_order(forest)
    lam = forest.input_space.alphabet
    n = _check_enum_budget(lam, len(cells_order), budget)
    if n * max(1, len(cells_order)) > (1 << 28):
        raise BudgetError("enum_budget", "probe-count table would exceed the state budget")
    rank_of = {c: r for r, c in enumerate(cells_order)}
    counts = np.zeros((n, len(cells_order)), dtype=np.uint16)

    def go(node: Node, idx: np.ndarray):
        if isinstance(node, Leaf):
            return
        r = rank_of[node.query]
        counts[idx, r] += 1
        sym = _digits(idx, r, lam)
        for v in range(lam):
            mask = sym == v
            if mask.any():
                go(node.children[v], idx[mask])

    base = np.arange(n, dtype=np.int64)
    for tree in forest.trees:
        go(tree.root, base)
    return counts, cells_order


# ---------------------------------------------------------------------------
# query profiles


@dataclass(frozen=True)
class QueryProfile:
    """Expected probe counts and tail rates per input cell."""

    expected: tuple  # E[count_j] per cell
    tail: tuple  # Pr[count_j > mu] per cell
    mu: float
    mode: str
    trials: int | None = None
    seed: int | None = None


@dataclass(frozen=True)
class LipschitzReport:
    average_ok: bool
    tail_ok: bool
    worst_cell: int
    mu: float
    delta: float


@dataclass(frozen=True)
class LocalityReport:
    max_tree_cells: int
    influence: tuple  # trees touching each cell


def expected_query_counts(forest: DecisionForest) -> np.ndarray:
    """Exact E[count_j] per cell via node reach probabilities.

    A node at depth t is reached by a uniform input with probability
    alphabet^-t, because the path fixes t distinct cells.  Summing over
    nodes probing cell j gives the expectation without enumeration.
    """
    lam = forest.input_space.alphabet
    ec = np.zeros(forest.input_space.cells, dtype=np.float64)

    def go(node: Node, depth: int):
        if isinstance(node, Leaf):
            return
        ec[node.query] += lam ** (-depth)
        for c in node.children:
            go(c, depth + 1)

    for t in forest.trees:
        go(t.root, 0)
    return ec


def query_profile(
    forest: DecisionForest,
    mu: float,
    mode: str = "exact",
    trials: int = 100_000,
    seed: int = 0,
    budget: int = DEFAULT_STATE_BUDGET,
) -> QueryProfile:
    """Distribution summary of per-cell probe counts under a uniform input.

    Exact mode enumerates assignments of the probed cells (unprobed cells
    cannot change any count).  Monte-Carlo mode draws `trials` uniform
    inputs with a counter-based generator keyed by `seed`.
    """
    s = forest.input_space.cells
    if mode == "exact":
        counts, order = query_counts_on_cube(forest, budget=budget)
        expected = np.zeros(s)
        tail = np.zeros(s)
        if counts.shape[0]:
            expected[order] = counts.mean(axis=0)
            tail[order] = (counts > mu).mean(axis=0)
        return QueryProfile(tuple(expected), tuple(tail), float(mu), "exact")
    if mode != "monte_carlo":
        raise UsageError("bad_mode", f"unknown profile mode {mode!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    lam = forest.input_space.alphabet
    inputs = rng.integers(0, lam, size=(trials, s), dtype=np.uint8)
    counts = np.zeros((trials, s), dtype=np.uint16)

    def go(node: Node, idx: np.ndarray):
        if isinstance(node, Leaf):
            return
        counts[idx, node.query] += 1
        sym = inputs[idx, node.query]
        for v in range(lam):
            mask = sym == v
            if mask.any():
                go(node.children[v], idx[mask])

    base = np.arange(trials, dtype=np.int64)
    for t in forest.trees:
        go(t.root, base)
    return QueryProfile(
        tuple(counts.mean(axis=0)),
        tuple((counts > mu).mean(axis=0)),
        float(mu),
        "monte_carlo",
        trials=trials,
        seed=seed,
    )


def check_lipschitz(profile: QueryProfile, mu: float, delta: float) -> LipschitzReport:
    """Evaluate both smoothness readings of a profile at (mu, delta)."""
    if profile.mu != mu:
        raise UsageError("profile_mismatch", "profile was computed for a different mu")
    expected = np.asarray(profile.expected)
    tail = np.asarray(profile.tail)
    average_ok = bool(expected.max(initial=0.0) <= mu + 1e-12)
    tail_ok = bool(tail.max(initial=0.0) <= delta + 1e-12)
    if not average_ok:
        worst = int(np.argmax(expected))
    elif not tail_ok:
        worst = int(np.argmax(tail))
    else:
        worst = int(np.argmax(expected)) if expected.size else 0
    return LipschitzReport(average_ok, tail_ok, worst, float(mu), float(delta))


def locality(forest: DecisionForest) -> LocalityReport:
    """Probe footprint: cells per tree and trees per cell."""
    influence = [0] * forest.input_space.cells
    worst = 0
    for t in forest.trees:
        cells = _node_cells(t.root, set())
        worst = max(worst, len(cells))
        for c in cells:
            influence[c] += 1
    return LocalityReport(worst, tuple(influence))


# ---------------------------------------------------------------------------
# serialization


def _node_to_json(node: Node, bot: int | None):
    if isinstance(node, Leaf):
        if bot is not None and node.value == bot:
            return {"leaf": None}
        return {"leaf": node.value}
    return {"query": node.query, "children": [_node_to_json(c, bot) for c in node.children]}


def _node_from_json(obj, bot: int | None) -> Node:
    if "leaf" in obj:
        val = obj["leaf"]
        if val is None:
            if bot is None:
                raise UsageError("bad_leaf", "blank leaf in a forest without blanks")
            return Leaf(bot)
        return Leaf(int(val))
    return Internal(int(obj["query"]), tuple(_node_from_json(c, bot) for c in obj["children"]))


def forest_to_json(forest: DecisionForest) -> dict:
    bot = forest.output_space.bot
    return {
        "input_arity": forest.input_space.cells,
        "input_alphabet": forest.input_space.alphabet,
        "output_alphabet": forest.output_space.alphabet,
        "bot_allowed": forest.output_space.bot_allowed,
        "trees": [_node_to_json(t.root, bot) for t in forest.trees],
    }


def forest_from_json(obj: dict) -> DecisionForest:
    space = InputSpace(int(obj["input_arity"]), int(obj["input_alphabet"]))
    bot_allowed = bool(obj["bot_allowed"])
    trees = obj["trees"]
    out = OutputSpace(len(trees), int(obj["output_alphabet"]), bot_allowed)
    parsed = tuple(DecisionTree(_node_from_json(t, out.bot)) for t in trees)
    return DecisionForest(space, out, parsed)


def dumps_forest(forest: DecisionForest) -> str:
    return json.dumps(forest_to_json(forest), indent=1)


def loads_forest(text: str) -> DecisionForest:
    return forest_from_json(json.loads(text))

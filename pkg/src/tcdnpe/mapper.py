"""Minimum-roll scheduling of multi-batch MLP layers onto an NPE(K, N) array.

A roll loads K* <= K batches and N* <= N neurons onto the PE array and runs
them for one pass over the layer inputs. For a layer problem (B batches,
Theta neurons) every legal configuration yields a branch: ``r`` full rolls
of load ``(min(B, K), min(Theta, N))``, a residual-batches subproblem for the
batches that did not fit, and a residual-neurons subproblem for the neurons
left over in the batches that were covered. The computational tree holds
all branches; the execution tree keeps the branch with the fewest rolls at
every node and is emitted in breadth-first order.
"""

from collections import deque
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class ArrayShape:
    """PE array of ``rows`` TCD-MAC groups (TGs), ``cols`` MACs per group."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array shape must be at least 1x1")

    @property
    def total(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class LayerProblem:
    """Gamma(B, I, U): U neurons fed by I inputs, for B batches."""

    batches: int
    inputs: int
    neurons: int

    def __post_init__(self):
        if min(self.batches, self.inputs, self.neurons) < 1:
            raise ValueError("layer problem dimensions must be >= 1")


@dataclass(frozen=True, order=True)
class NpeConfig:
    """NPE(K, N): N neurons in each of K batches per roll."""

    K: int
    N: int


@dataclass(frozen=True)
class Branch:
    """One configuration choice at a computational-tree node."""

    config: NpeConfig
    load: tuple
    rolls: int
    child_b: "TreeNode"
    child_theta: "TreeNode"


@dataclass(frozen=True)
class TreeNode:
    """Subproblem (batches, neurons) with one branch per legal configuration.

    Identical subproblems share one node, so the tree is stored as a DAG.
    """

    batches: int
    neurons: int
    branches: tuple

    @property
    def empty(self):
        return self.batches == 0 or self.neurons == 0


@dataclass
class ExecTreeNode:
    """Node of the binary execution tree.

    Covers batches ``[batch_offset, batch_offset + batches)`` and neurons
    ``[neuron_offset, neuron_offset + neurons)`` of its layer.
    """

    batches: int
    neurons: int
    config: NpeConfig
    psi: tuple
    r: int
    child_b: "ExecTreeNode | None"
    child_theta: "ExecTreeNode | None"
    batch_offset: int = 0
    neuron_offset: int = 0

    @property
    def leaf(self):
        return self.child_b is None and self.child_theta is None

    def total_rolls(self):
        return self.r + sum(c.total_rolls() for c in (self.child_b, self.child_theta) if c)


@dataclass(frozen=True)
class ScheduleEvent:
    """``rolls`` consecutive rolls of one configuration and load.

    Roll ``j`` covers the ``j``-th tile of a grid of ``load``-sized tiles over
    the event's batch/neuron region, neuron tiles varying fastest.
    """

    config: NpeConfig
    load: tuple
    rolls: int
    cycles_per_roll: int
    layer_index: int
    batch_offset: int
    neuron_offset: int
    pass_index: int = 0
    neuron_tiles: int = 1

    def roll_tiles(self):
        """Yield ``(batch_start, neuron_start)`` of every roll."""
        k, n = self.load
        for j in range(self.rolls):
            yield (self.batch_offset + (j // self.neuron_tiles) * k,
                   self.neuron_offset + (j % self.neuron_tiles) * n)


def enumerate_configs(shape, batches=None):
    """Legal NPE(K, N) configurations in descending N.

    K must divide the TG count (a TG serves one batch) and N may not be
    narrower than a TG. ``batches`` is accepted for interface symmetry but
    does not prune: a configuration with K > B can still be the best choice
    for a partially loaded roll.
    """
    total = shape.total
    configs = [NpeConfig(k, total // k) for k in range(1, shape.rows + 1)
               if shape.rows % k == 0 and total // k >= shape.cols]
    return sorted(configs, key=lambda c: (-c.N, -c.K))


def _split(batches, neurons, config):
    mb = min(batches, config.K)
    mt = min(neurons, config.N)
    rolls = (batches // mb) * (neurons // mt)
    return mb, mt, rolls, (batches % mb, neurons), (batches - batches % mb, neurons % mt)


def create_tree(batches, neurons, shape, configs=None):
    """Computational tree of every configuration choice for (batches, neurons)."""
    configs = tuple(configs or enumerate_configs(shape, batches))
    empty = TreeNode(0, 0, ())

    @lru_cache(maxsize=None)
    def build(b, t):
        if b == 0 or t == 0:
            return empty
        branches = []
        for cfg in configs:
            mb, mt, rolls, res_b, res_t = _split(b, t, cfg)
            branches.append(Branch(cfg, (mb, mt), rolls, build(*res_b), build(*res_t)))
        return TreeNode(b, t, tuple(branches))

    return build(batches, neurons)


def best_exec_tree(root):
    """Binary execution tree with the fewest total rolls.

    Ties keep the earlier branch, i.e. larger N, then larger K. Returns
    ``None`` for an empty problem.
    """
    memo = {}

    def cost(node):
        if node.empty:
            return 0, None
        key = (node.batches, node.neurons)
        if key not in memo:
            best = None
            for branch in node.branches:
                total = branch.rolls + cost(branch.child_b)[0] + cost(branch.child_theta)[0]
                if best is None or total < best[0]:
                    best = (total, branch)
            memo[key] = best
        return memo[key]

    def build(node, b0, n0):
        if node.empty:
            return None
        branch = cost(node)[1]
        mb, mt = branch.load
        return ExecTreeNode(
            batches=node.batches,
            neurons=node.neurons,
            config=branch.config,
            psi=branch.load,
            r=branch.rolls,
            child_b=build(branch.child_b, b0 + node.batches - node.batches % mb, n0),
            child_theta=build(branch.child_theta, b0, n0 + node.neurons - node.neurons % mt),
            batch_offset=b0,
            neuron_offset=n0,
        )

    return build(root, 0, 0)


def bfs_events(tree, inputs, layer_index=0, cycles_extra=1, batch_base=0, pass_index=0):
    """Breadth-first list of :class:`ScheduleEvent` for an execution tree."""
    events = []
    queue = deque([tree] if tree else [])
    while queue:
        node = queue.popleft()
        events.append(ScheduleEvent(
            config=node.config,
            load=node.psi,
            rolls=node.r,
            cycles_per_roll=inputs + cycles_extra,
            layer_index=layer_index,
            batch_offset=batch_base + node.batch_offset,
            neuron_offset=node.neuron_offset,
            pass_index=pass_index,
            neuron_tiles=node.neurons // node.psi[1],
        ))
        queue.extend(c for c in (node.child_b, node.child_theta) if c)
    return events


def layer_events(problem, shape, layer_index=0, configs=None, tcd=True,
                 batch_base=0, pass_index=0):
    """Events for one layer problem; ``configs`` restricts the legal set."""
    root = create_tree(problem.batches, problem.neurons, shape, configs)
    tree = best_exec_tree(root)
    return bfs_events(tree, problem.inputs, layer_index, 1 if tcd else 0, batch_base, pass_index)


def schedule(model, batches, shape, tcd=True, max_batches=None, configs=None):
    """Schedule every layer of ``model`` (layer sizes) for ``batches`` batches.

    When ``max_batches`` (B*) is smaller than ``batches`` the batches are
    split into ``ceil(B / B*)`` passes, each running the whole model.
    """
    sizes = [int(n) for n in model]
    if len(sizes) < 2:
        raise ValueError("model needs an input layer and at least one more layer")
    if batches < 1:
        raise ValueError("batch count must be >= 1")
    per_pass = max_batches or batches
    events = []
    for p, start in enumerate(range(0, batches, per_pass)):
        b = min(per_pass, batches - start)
        for l in range(1, len(sizes)):
            problem = LayerProblem(b, sizes[l - 1], sizes[l])
            events.extend(layer_events(problem, shape, l - 1, configs, tcd, start, p))
    return events


def total_rolls(events):
    return sum(e.rolls for e in events)


def utilization(events, problem, shape):
    """Useful neuron computations over PE slots offered by the scheduled rolls."""
    offered = total_rolls(events) * shape.total
    return problem.batches * problem.neurons / offered if offered else 0.0


def brute_force_min_rolls(batches, neurons, shape):
    """Exhaustive minimum roll count over all guillotine partitions.

    Independent of the tree recursion: a region that fits one configuration
    costs one roll, otherwise every split of its batches or its neurons into
    two parts is tried. Guarded to ``batches <= 16`` and ``neurons <= 64``.
    """
    if batches > 16 or neurons > 64:
        raise ValueError("brute force is limited to B <= 16 and Theta <= 64")
    configs = enumerate_configs(shape)

    @lru_cache(maxsize=None)
    def best(b, t):
        if b == 0 or t == 0:
            return 0
        if any(b <= c.K and t <= c.N for c in configs):
            return 1
        options = [best(x, t) + best(b - x, t) for x in range(1, b // 2 + 1)]
        options += [best(b, y) + best(b, t - y) for y in range(1, t // 2 + 1)]
        return min(options)

    return best(batches, neurons)

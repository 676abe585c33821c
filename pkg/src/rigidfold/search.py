"""Search strategies over the origami game: random sampling, depth- and
breadth-first branch-and-bound tree searches, Monte Carlo tree search and an
evolutionary strategy.  All methods share one interaction budget and track the
best pattern found.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .env import (
    EnvConfig,
    OrigamiEnv,
    Place,
    SeedSize,
    Select,
    Source,
    Terminate,
    action_to_dict,
)
from .pattern import playable_area

# Appendix-style constants.
TREE_RESTARTS = 10  # sub-searches per tree method
BRANCH_CAP = 10  # children sampled per node
MCTS_SIMULATIONS = 100  # full-episode simulations per real step
MCTS_DIRICHLET_EPS = 0.03
MCTS_DIRICHLET_ALPHA = 0.25
MCTS_TEMPERATURE = 1.5
MCTS_C_PUCT = 1.0
EVO_POPULATION = 128
EVO_PARENT_FRACTION = 0.25
EVO_SIGMA = (0.1, 0.5, 1.0)


class UnsupportedObjectiveError(ValueError):
    pass


@dataclass
class SearchBudget:
    max_interactions: int = 500_000
    rng_seed: int = 0
    # Optional early stop once the incumbent reaches a target return.  The
    # best-so-far is monotone, so stopping early cannot change whether the
    # target was reached; used by bounded acceptance runs.
    stop_at_return: Optional[float] = None


@dataclass
class BestPattern:
    best_return: float = -math.inf
    actions: list = field(default_factory=list)
    graph: object = None
    best_angle: Optional[float] = None
    found_at: int = 0  # interactions consumed when discovered
    interactions: int = 0
    wall_seconds: float = 0.0


class _Harness:
    """Budget accounting and best-pattern tracking shared by all methods."""

    def __init__(self, config: EnvConfig, budget: SearchBudget):
        self.env = OrigamiEnv(config)
        self.budget = budget
        self.used = 0
        self.best = BestPattern()
        self.t0 = time.time()

    @property
    def exhausted(self):
        if self.used >= self.budget.max_interactions:
            return True
        stop = self.budget.stop_at_return
        return stop is not None and self.best.best_return >= stop

    def step(self, state, action):
        self.used += 1
        state, reward, done = self.env.step(state, action)
        if done and state.done_reason != "non-foldable":
            self._consider(state)
        return state, reward, done

    def _consider(self, state):
        if state.reward_sum > self.best.best_return:
            self.best.best_return = state.reward_sum
            self.best.actions = [t["action"] for t in state.trace]
            self.best.graph = state.graph
            self.best.best_angle = state.terminal_angle
            self.best.found_at = self.used

    def finish(self):
        self.best.interactions = self.used
        self.best.wall_seconds = time.time() - self.t0
        return self.best


# ---------------------------------------------------------------------------
# Random search
# ---------------------------------------------------------------------------


def run_random(config: EnvConfig, budget: SearchBudget) -> BestPattern:
    h = _Harness(config, budget)
    rng = np.random.Generator(np.random.PCG64(budget.rng_seed))
    while not h.exhausted:
        state = h.env.reset()
        while state.status == "running" and not h.exhausted:
            acts = h.env.legal_actions(state)
            state, _, _ = h.step(state, acts[rng.integers(0, len(acts))])
    return h.finish()


# ---------------------------------------------------------------------------
# Depth-first branch and bound
# ---------------------------------------------------------------------------


def _require_shaping(config):
    if not config.objective.supports_shaping:
        raise UnsupportedObjectiveError(
            "branch-and-bound tree search needs the non-positive shaped-reward "
            "guarantee; this objective does not provide it"
        )


def run_dfts(
    config: EnvConfig,
    budget: SearchBudget,
    branch_cap: int = BRANCH_CAP,
    restarts: int = TREE_RESTARTS,
    prune: bool = True,
) -> BestPattern:
    _require_shaping(config)
    h = _Harness(config, budget)
    rng = np.random.Generator(np.random.PCG64(budget.rng_seed))
    quota = budget.max_interactions // restarts if restarts else budget.max_interactions
    for _ in range(restarts):
        sub_end = min(h.used + quota, budget.max_interactions)
        _dfts_subsearch(h, rng, branch_cap, sub_end, prune)
        if h.exhausted:
            break
    return h.finish()


def _dfts_subsearch(h, rng, cap, sub_end, prune):
    root = h.env.reset()
    stack = [[root, None, 0]]  # state, shuffled actions, children tried
    while stack and h.used < sub_end and not h.exhausted:
        node = stack[-1]
        state, actions, tried = node
        if prune and state.reward_sum < h.best.best_return:
            stack.pop()
            continue
        if actions is None:
            actions = list(h.env.legal_actions(state))
            rng.shuffle(actions)
            node[1] = actions
        if tried >= min(cap, len(actions)):
            stack.pop()
            continue
        node[2] += 1
        child = state.clone()
        child, _, done = h.step(child, actions[tried])
        if not done:
            stack.append([child, None, 0])


# ---------------------------------------------------------------------------
# Breadth-first (best-child-first) branch and bound
# ---------------------------------------------------------------------------


def run_bfts(
    config: EnvConfig,
    budget: SearchBudget,
    branch_cap: int = BRANCH_CAP,
    restarts: int = TREE_RESTARTS,
    prune: bool = True,
) -> BestPattern:
    _require_shaping(config)
    h = _Harness(config, budget)
    rng = np.random.Generator(np.random.PCG64(budget.rng_seed))
    quota = budget.max_interactions // restarts if restarts else budget.max_interactions
    for _ in range(restarts):
        sub_end = min(h.used + quota, budget.max_interactions)
        _bfts_subsearch(h, rng, branch_cap, sub_end, prune)
        if h.exhausted:
            break
    return h.finish()


def _bfts_subsearch(h, rng, cap, sub_end, prune):
    root = h.env.reset()
    stack = [[root, None, 0]]  # state, evaluated children, next index
    while stack and h.used < sub_end and not h.exhausted:
        node = stack[-1]
        state, children, nxt = node
        if prune and state.reward_sum < h.best.best_return:
            stack.pop()
            continue
        if children is None:
            acts = list(h.env.legal_actions(state))
            rng.shuffle(acts)
            acts = acts[: min(cap, len(acts))]
            children = []
            for a in acts:
                if h.used >= sub_end or h.exhausted:
                    break
                child = state.clone()
                child, _, done = h.step(child, a)
                if not done:
                    children.append((child.reward_sum, child))
            # Highest evaluation first; stable for determinism.
            children.sort(key=lambda t: -t[0])
            node[1] = children
            continue
        if nxt >= len(children):
            stack.pop()
            continue
        node[2] += 1
        stack.append([children[nxt][1], None, 0])

# ---------------------------------------------------------------------------
# Monte Carlo tree search
# ---------------------------------------------------------------------------


class _MctsNode:
    __slots__ = ("state", "actions", "priors", "children", "n", "w", "expanded")

    def __init__(self, state):
        self.state = state
        self.actions = None
        self.priors = None
        self.children = {}
        self.n = 0
        self.w = 0.0
        self.expanded = False


def _normalize_return(g, r_min):
    """Map episode returns into [-1, 1] via r_norm = 2 r / |r_min| + 1."""
    v = 2.0 * g / abs(r_min) + 1.0
    return max(-1.0, min(1.0, v))


def run_mcts(
    config: EnvConfig,
    budget: SearchBudget,
    simulations: int = MCTS_SIMULATIONS,
) -> BestPattern:
    h = _Harness(config, budget)
    rng = np.random.Generator(np.random.PCG64(budget.rng_seed))
    r_min = config.r_min

    def expand(node):
        node.actions = list(h.env.legal_actions(node.state))
        k = len(node.actions)
        noise = rng.dirichlet([MCTS_DIRICHLET_ALPHA] * k) if k > 1 else np.ones(1)
        pri = np.full(k, 1.0 / k) + MCTS_DIRICHLET_EPS * noise
        node.priors = pri / pri.sum()
        node.expanded = True

    def rollout(state):
        while state.status == "running" and not h.exhausted:
            acts = h.env.legal_actions(state)
            state, _, _ = h.step(state, acts[rng.integers(0, len(acts))])
        return state

    def simulate(root):
        path = [root]
        node = root
        # Selection by PUCT over the noised uniform priors.
        while node.expanded and node.state.status == "running":
            best_score, best_a = -math.inf, None
            sqrt_n = math.sqrt(node.n + 1)
            for idx, a in enumerate(node.actions):
                child = node.children.get(a)
                cn = child.n if child else 0
                q = (child.w / child.n) if child and child.n else 0.0
                score = q + MCTS_C_PUCT * node.priors[idx] * sqrt_n / (1 + cn)
                if score > best_score:
                    best_score, best_a = score, a
            child = node.children.get(best_a)
            if child is None:
                st = node.state.clone()
                st, _, _ = h.step(st, best_a)
                child = _MctsNode(st)
                node.children[best_a] = child
            node = child
            path.append(node)
            if h.exhausted:
                break
        if node.state.status == "running" and not node.expanded:
            expand(node)
        final = node.state
        if final.status == "running":
            final = rollout(final.clone())
        v = _normalize_return(final.reward_sum, r_min)
        for n in path:
            n.n += 1
            n.w += v
        return v

    while not h.exhausted:
        state = h.env.reset()
        root = _MctsNode(state)
        expand(root)
        # The simulation tree persists through the episode, re-rooted per move.
        while root.state.status == "running" and not h.exhausted:
            for _ in range(simulations):
                if h.exhausted:
                    break
                simulate(root)
            if h.exhausted:
                break
            visits = [
                (root.children[a].n if a in root.children else 0, -i)
                for i, a in enumerate(root.actions)
            ]
            best_i = max(range(len(visits)), key=lambda i: visits[i])
            action = root.actions[best_i]
            real = root.state.clone()
            real, _, done = h.step(real, action)
            nxt = root.children.get(action)
            if nxt is None or done:
                nxt = _MctsNode(real)
                if not done:
                    expand(nxt)
            else:
                nxt.state = real
            root = nxt
    return h.finish()


# ---------------------------------------------------------------------------
# Evolutionary strategy
# ---------------------------------------------------------------------------


def action_index(action, board) -> int:
    """Stable bijection from actions to genome indices.

    Indices [0, 2d) are (cell, mode) selection pairs over the playable area;
    [2d, 4d) are extension endpoints.  d is the playable-area size.
    """
    cells = sorted(playable_area(board))
    lookup = {c: i for i, c in enumerate(cells)}
    d = len(cells)
    if isinstance(action, Select):
        return 2 * lookup[action.cell] + (0 if action.mode == -1 else 1)
    if isinstance(action, Place):
        return 2 * d + lookup[action.cell]
    raise ValueError(f"no genome index for {action!r}")


class _GenomePolicy:
    """Greedy action choice by learned action values."""

    def __init__(self, board):
        self.cells = sorted(playable_area(board))
        self.lookup = {c: i for i, c in enumerate(self.cells)}
        self.d = len(self.cells)

    def genome_length(self):
        return 4 * self.d

    def value(self, q, action):
        # Actions outside the value list (terminate, sources, seed sizing)
        # compete at a fixed neutral value.
        if isinstance(action, Select):
            return q[2 * self.lookup[action.cell] + (0 if action.mode == -1 else 1)]
        if isinstance(action, Place):
            return q[2 * self.d + self.lookup[action.cell]]
        if isinstance(action, SeedSize):
            corner = (self.cells[0][0], self.cells[0][1])  # deterministic slot
            return q[2 * self.lookup[corner]] if corner in self.lookup else 0.0
        return 0.0

    def choose(self, q, actions):
        best_i = 0
        best_v = -math.inf
        for i, a in enumerate(actions):
            v = self.value(q, a)
            if v > best_v:
                best_v, best_i = v, i
        return actions[best_i]


def run_evo(
    config: EnvConfig,
    budget: SearchBudget,
    population: int = EVO_POPULATION,
    sigma: tuple = EVO_SIGMA,
) -> BestPattern:
    h = _Harness(config, budget)
    rng = np.random.Generator(np.random.PCG64(budget.rng_seed))
    policy = _GenomePolicy(h.env.board)
    m = policy.genome_length()
    pop = [rng.standard_normal(m) for _ in range(population)]
    n_parents = int(population * EVO_PARENT_FRACTION)

    def evaluate(q):
        state = h.env.reset()
        seq = []
        while state.status == "running" and not h.exhausted:
            acts = h.env.legal_actions(state)
            a = policy.choose(q, acts)
            seq.append(a)
            state, _, _ = h.step(state, a)
        if state.status != "done":
            return None, tuple(map(repr, seq))
        return state.reward_sum, tuple(map(repr, seq))

    while not h.exhausted:
        fitness = []
        seen_seqs = {}
        for q in pop:
            if h.exhausted:
                fitness.append(-math.inf)
                continue
            f, seq = evaluate(q)
            if f is None:
                f = -math.inf
            elif seq in seen_seqs:
                f = -math.inf  # duplicate rollout: keep the population diverse
            else:
                seen_seqs[seq] = True
            fitness.append(f)
        if h.exhausted:
            break
        order = sorted(range(population), key=lambda i: -fitness[i])
        parents = [pop[i] for i in order[:n_parents]]
        parents = [p + rng.normal(0.0, sigma[0], m) for p in parents]
        offspring = [p + rng.normal(0.0, sigma[1], m) for p in parents]
        offspring += [p + rng.normal(0.0, sigma[2], m) for p in parents]
        newcomers = [rng.standard_normal(m) for _ in range(population - 3 * n_parents)]
        pop = parents + offspring + newcomers
    return h.finish()


METHODS = {
    "rdm": run_random,
    "dfts": run_dfts,
    "bfts": run_bfts,
    "mcts": run_mcts,
    "evo": run_evo,
}

"""MCTS tree over prompt-score nodes."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional


class TreeError(Exception):
    pass


class NoChildren(TreeError):
    pass


class DepthExceeded(TreeError):
    pass


class EmptyTree(TreeError):
    pass


@dataclass
class SearchConfig:
    exploration_c: float = math.sqrt(2)
    simulations: int = 20
    max_children: int = 3
    max_depth: int = 8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.exploration_c >= 0:
            raise ValueError("exploration_c must be >= 0")
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if self.max_children < 1:
            raise ValueError("max_children must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass
class TreeNode:
    id: int
    prompt_text: str = ""
    prompt_score: Optional[int] = None
    q: float = 0.0
    visits: int = 0
    parent: Optional[int] = None
    children: list[int] = field(default_factory=list)
    depth: int = 0

    @property
    def mean(self) -> float:
        return self.q / self.visits if self.visits else 0.0


def uct_value(q: float, visits: int, parent_visits: int, c: float) -> float:
    if parent_visits < 1:
        raise ValueError("parent_visits must be >= 1")
    if visits == 0:
        return math.inf
    return q / visits + c * math.sqrt(math.log(parent_visits) / visits)


class SearchTree:
    """Prompt-score tree: nodes are addressed by integer id, root is 0."""

    def __init__(self, config: Optional[SearchConfig] = None) -> None:
        self.config = config or SearchConfig()
        self.nodes: list[TreeNode] = [TreeNode(id=0)]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def __getitem__(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def children(self, node_id: int) -> list[TreeNode]:
        return [self.nodes[c] for c in self.nodes[node_id].children]

    def select_child(self, node_id: int) -> int:
        node = self.nodes[node_id]
        if not node.children:
            raise NoChildren(f"node {node_id} has no children")
        parent_visits = node.visits
        best_id, best_val = None, -math.inf
        for cid in node.children:
            child = self.nodes[cid]
            val = uct_value(child.q, child.visits, parent_visits, self.config.exploration_c)
            # strict > keeps the lowest index on ties
            if best_id is None or val > best_val:
                best_id, best_val = cid, val
        return best_id

    def expand_or_reuse(self, parent_id: int, prompt_text: str, prompt_score: int) -> tuple[int, bool]:
        parent = self.nodes[parent_id]
        if parent.depth >= self.config.max_depth:
            raise DepthExceeded(f"node {parent_id} is at max depth {self.config.max_depth}")
        if not 0 <= prompt_score <= 10:
            raise ValueError(f"prompt_score {prompt_score} outside 0..10")
        siblings = self.children(parent_id)
        for child in siblings:
            if child.prompt_score == prompt_score:
                return child.id, True
        if len(siblings) < self.config.max_children:
            node = TreeNode(
                id=len(self.nodes),
                prompt_text=prompt_text,
                prompt_score=prompt_score,
                parent=parent_id,
                depth=parent.depth + 1,
            )
            self.nodes.append(node)
            parent.children.append(node.id)
            return node.id, False
        nearest = min(siblings, key=lambda c: (abs(c.prompt_score - prompt_score), c.prompt_score))
        return nearest.id, True

    def backpropagate(self, leaf_id: int, reward: float) -> None:
        node: Optional[TreeNode] = self.nodes[leaf_id]
        while node is not None:
            node.visits += 1
            node.q += reward
            node = self.nodes[node.parent] if node.parent is not None else None

    def path_to(self, node_id: int) -> list[int]:
        path = []
        cur: Optional[int] = node_id
        while cur is not None:
            path.append(cur)
            cur = self.nodes[cur].parent
        return path[::-1]

    def best_path(self) -> list[int]:
        if self.root.visits == 0:
            raise EmptyTree("root has not been visited")
        path = [0]
        node = self.root
        while True:
            visited = [c for c in self.children(node.id) if c.visits > 0]
            if not visited:
                return path
            node = max(visited, key=lambda c: c.mean)  # first max wins
            path.append(node.id)

    def snapshot(self) -> list[dict]:
        return [
            {
                "id": n.id,
                "parent": n.parent,
                "prompt_text": n.prompt_text,
                "prompt_score": n.prompt_score,
                "q": n.q,
                "visits": n.visits,
                "depth": n.depth,
            }
            for n in self.nodes
        ]

    def to_json(self) -> str:
        return json.dumps({"config": asdict(self.config), "nodes": self.snapshot()}, indent=2)

    @classmethod
    def from_snapshot(cls, nodes: list[dict], config: Optional[SearchConfig] = None) -> "SearchTree":
        tree = cls(config)
        tree.nodes = [
            TreeNode(
                id=d["id"], prompt_text=d["prompt_text"], prompt_score=d["prompt_score"],
                q=d["q"], visits=d["visits"], parent=d["parent"], depth=d["depth"],
            )
            for d in nodes
        ]
        for n in tree.nodes:
            if n.parent is not None:
                tree.nodes[n.parent].children.append(n.id)
        return tree

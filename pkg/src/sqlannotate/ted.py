"""Ordered tree edit distance (Zhang-Shasha) and AST-based retrieval.

Distance is the minimum number of unit-cost node insertions, deletions,
and relabelings. Similarity normalizes by the distance's tight upper
bound: 1 - d / (|a| + |b|).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .sqlast import AstNode, SqlQuery


class _Annotated:
    """Postorder arrays + leftmost-leaf descendants + keyroots."""

    def __init__(self, root: AstNode):
        self.labels: list[str] = []
        self.lmld: list[int] = []  # leftmost leaf descendant, postorder index
        self._index(root)
        n = len(self.labels)
        keyroot_for_lml: dict[int, int] = {}
        for i in range(n):
            keyroot_for_lml[self.lmld[i]] = i
        self.keyroots = sorted(keyroot_for_lml.values())

    def _index(self, node: AstNode) -> int:
        if not node.children:
            idx = len(self.labels)
            self.labels.append(node.label)
            self.lmld.append(idx)
            return idx
        child_indices = [self._index(child) for child in node.children]
        idx = len(self.labels)
        self.labels.append(node.label)
        self.lmld.append(self.lmld[child_indices[0]])
        return idx


def tree_edit_distance(a: AstNode, b: AstNode) -> int:
    """Zhang-Shasha dynamic program over keyroot pairs, unit costs."""
    ta, tb = _Annotated(a), _Annotated(b)
    m, n = len(ta.labels), len(tb.labels)
    treedist = [[0] * n for _ in range(m)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            _treedist(ta, tb, i, j, treedist)
    return treedist[m - 1][n - 1]


def _treedist(ta: _Annotated, tb: _Annotated, i: int, j: int, treedist) -> None:
    li, lj = ta.lmld[i], tb.lmld[j]
    m = i - li + 2
    n = j - lj + 2
    fd = [[0] * n for _ in range(m)]
    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + 1
    for x in range(1, m):
        for y in range(1, n):
            ai = li + x - 1
            bj = lj + y - 1
            if ta.lmld[ai] == li and tb.lmld[bj] == lj:
                cost = 0 if ta.labels[ai] == tb.labels[bj] else 1
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[x - 1][y - 1] + cost,
                )
                treedist[ai][bj] = fd[x][y]
            else:
                p = ta.lmld[ai] - li
                q = tb.lmld[bj] - lj
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[p][q] + treedist[ai][bj],
                )


def similarity(a: SqlQuery, b: SqlQuery) -> float:
    """1 - ted/(|a|+|b|); 1.0 iff structurally equal, always in [0,1]."""
    d = tree_edit_distance(a.ast, b.ast)
    return 1.0 - d / (a.ast.size() + b.ast.size())


@dataclass(frozen=True)
class RetrieverConfig:
    top_k: int = 5
    similarity_threshold: float = 0.5

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0,1]")


@dataclass(frozen=True)
class RetrievedExample:
    sql: SqlQuery
    question: str
    score: float


def retrieve_similar(
    query: SqlQuery,
    pool: list[tuple[SqlQuery, str]],
    config: RetrieverConfig = RetrieverConfig(),
) -> list[RetrievedExample]:
    """Top-k pool entries with similarity >= threshold, descending score.

    Ties keep pool order (stable sort). May return fewer than top_k.
    """
    scored = [
        RetrievedExample(sql=sql, question=question, score=similarity(query, sql))
        for sql, question in pool
    ]
    kept = [e for e in scored if e.score >= config.similarity_threshold]
    kept.sort(key=lambda e: -e.score)
    return kept[: config.top_k]

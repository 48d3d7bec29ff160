"""Retrieval model mapping post-synthesis region types back to pre-synthesis ones."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

from ..features import Seq, seq_to_str


class ReconModel:
    """Per sub size, post sequence -> multiset of pre sequences seen in training.

    A query looks up the exact post sequence in every store, largest sub
    size first.  Each store's candidates vote with their relative
    frequency; a candidate's score is the sum of votes from all stores
    whose candidate agrees with it on their common prefix.  No match in any
    store returns the post sequence itself.
    """

    def __init__(self, sub_sizes: Iterable[int] = (3, 5, 6)):
        self.sub_sizes = tuple(sorted(set(sub_sizes), reverse=True))
        self.stores: dict[int, dict[Seq, Counter]] = {s: {} for s in self.sub_sizes}

    def add(self, sub: int, post: Seq, pre: Seq, count: int = 1) -> None:
        self.stores[sub].setdefault(tuple(post), Counter())[tuple(pre)] += count

    def __len__(self) -> int:
        return sum(len(s) for s in self.stores.values())

    def candidates(self, posts: Mapping[int, Seq]) -> dict[Seq, float]:
        found: list[dict[Seq, float]] = []
        for s in self.sub_sizes:
            if s not in posts:
                continue
            c = self.stores[s].get(tuple(posts[s]))
            if c:
                tot = sum(c.values())
                found.append({p: v / tot for p, v in c.items()})
        scores: dict[Seq, float] = {}
        for votes in found:
            for cand in votes:
                if cand in scores:
                    continue
                scores[cand] = sum(
                    w for other in found for p, w in other.items()
                    if p[: min(len(p), len(cand))] == cand[: min(len(p), len(cand))]
                )
        return scores

    def reconstruct(self, posts: Mapping[int, Seq]) -> tuple[Seq, bool]:
        """Best pre sequence and whether any store matched."""
        scores = self.candidates(posts)
        if not scores:
            largest = max(posts)
            return tuple(posts[largest]), False
        best = sorted(scores.items(), key=lambda kv: (-kv[1], -len(kv[0]), seq_to_str(kv[0])))[0][0]
        return best, True

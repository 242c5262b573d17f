"""Set partitions of {1,...,k}: canonical form, enumeration, Gibbs neighborhoods.

Indices are 1-based at every interface. A partition is stored in canonical
form: elements sorted within blocks, blocks sorted by their smallest element.
The Bayesian sampler never enumerates partitions; enumeration exists as the
test oracle for the partition-sum density identity.
"""

import numpy as np

MAX_ENUM_K = 12  # Bell(12) ~ 4.2e6


class BoundedEnumerationError(ValueError):
    pass


class Partition:
    """Canonical set partition of a finite ground set of positive integers.

    The common case is a partition of {1,...,k}. Restrictions (drop one
    index, keep the original labels) live on a reduced ground set, so the
    ground set is stored explicitly.
    """

    __slots__ = ("blocks", "ground")

    def __init__(self, blocks, k=None):
        canon = []
        seen = set()
        for b in blocks:
            b = tuple(sorted(b))
            if not b:
                raise ValueError("empty block")
            for i in b:
                if not isinstance(i, (int, np.integer)) or i < 1:
                    raise ValueError(f"indices must be positive integers, got {i!r}")
                if i in seen:
                    raise ValueError(f"index {i} appears in more than one block")
                seen.add(i)
            canon.append(tuple(int(i) for i in b))
        canon.sort(key=lambda b: b[0])
        self.blocks = tuple(canon)
        self.ground = tuple(sorted(seen))
        if k is not None:
            if self.ground != tuple(range(1, k + 1)):
                raise ValueError(f"blocks do not partition {{1..{k}}}")

    @property
    def k(self):
        return len(self.ground)

    @property
    def n_blocks(self):
        return len(self.blocks)

    def block_of(self, i):
        for b in self.blocks:
            if i in b:
                return b
        raise KeyError(i)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return str(self)

    def __str__(self):
        return "{" + "|".join(",".join(str(i) for i in b) for b in self.blocks) + "}"

    def __iter__(self):
        return iter(self.blocks)

    @classmethod
    def parse(cls, text, k=None):
        """Inverse of str(): '{1,3|2}' -> Partition(((1,3),(2,)))."""
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"malformed partition string: {text!r}")
        blocks = [
            [int(tok) for tok in part.split(",")]
            for part in text[1:-1].split("|")
            if part
        ]
        return cls(blocks, k=k)

    @classmethod
    def singletons(cls, k):
        return cls([(i,) for i in range(1, k + 1)], k=k)

    @classmethod
    def one_block(cls, k):
        return cls([tuple(range(1, k + 1))], k=k)

    @classmethod
    def from_labels(cls, labels):
        """Build from a 0-based label array: labels[j] = block id of element j+1."""
        labels = np.asarray(labels)
        blocks = {}
        for j, lab in enumerate(labels):
            blocks.setdefault(int(lab), []).append(j + 1)
        return cls(list(blocks.values()))

    def to_labels(self):
        """0-based canonical block label per element; full partitions only."""
        if self.ground != tuple(range(1, self.k + 1)):
            raise ValueError("to_labels requires a partition of {1..k}")
        labels = np.empty(self.k, dtype=np.int64)
        for j, b in enumerate(self.blocks):
            for i in b:
                labels[i - 1] = j
        return labels


def enumerate_all(k):
    """All partitions of {1..k} in canonical lexicographic order (Bell(k) many).

    Generated through restricted-growth strings: a[0]=0 and
    a[j] <= 1 + max(a[:j]); lexicographic order of the strings gives the
    canonical order (blocks labeled by order of first appearance, i.e. by
    smallest element).
    """
    if not (1 <= k <= MAX_ENUM_K):
        raise BoundedEnumerationError(f"k must be in [1, {MAX_ENUM_K}], got {k}")
    out = []
    a = [0] * k

    def rec(j, m):
        if j == k:
            out.append(Partition.from_labels(a))
            return
        for v in range(m + 2):
            a[j] = v
            rec(j + 1, max(m, v))

    rec(1, 0)
    return out


def restriction(p, i):
    """Drop index i from its block; remove the block if emptied. No renumbering."""
    if i not in p.ground:
        raise IndexError(f"index {i} not in ground set {p.ground}")
    blocks = [tuple(x for x in b if x != i) for b in p.blocks]
    blocks = [b for b in blocks if b]
    if not blocks:
        raise ValueError("restriction of a singleton ground set is empty")
    return Partition(blocks)


def gibbs_neighborhood(p, i):
    """All partitions agreeing with p outside index i.

    Reallocate i to each block of the restriction or to a new singleton;
    the current partition is among the results. Deterministic order: blocks
    of the restriction in canonical order, then the singleton move last.
    """
    if i not in p.ground:
        raise IndexError(f"index {i} not in ground set {p.ground}")
    if p.k == 1:
        return [p]
    rest = restriction(p, i)
    out = []
    for j in range(rest.n_blocks):
        blocks = list(rest.blocks)
        blocks[j] = blocks[j] + (i,)
        out.append(Partition(blocks))
    out.append(Partition(list(rest.blocks) + [(i,)]))
    return out

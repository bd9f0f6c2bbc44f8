"""Distributed word-frequency counter: one Grouper node, N WordCounter nodes.

The Grouper shards an input file into Line objects and publishes them; each
WordCounter pulls its share of lines (every Nth), counts tokens into shared
WordCount objects, and pushes the counts back. Stop objects signal completion.

Two three-way merge functions are provided. ``buggy_merge`` adds the two
conflicting counts — double-counting the base whenever both sides incremented
the same word concurrently. ``fixed_merge`` subtracts the fork-point count so
only the actual increments combine.
"""

from __future__ import annotations

from collections import Counter

from .diff import ConflictTriple, update_not_conflicting
from .schema import State, dimension, primarykey


class Line:
    line_num = primarykey(int)
    line = dimension(str)

    def __init__(self, line_num, line):
        self.line_num = line_num
        self.line = line

    def process(self):
        # a simple tokenizer
        return self.line.strip().split()


class WordCount:
    word = primarykey(str)
    count = dimension(int)

    def __init__(self, word, count):
        self.word = word
        self.count = count


class Stop:
    index = primarykey(int)
    accepted = dimension(bool)

    def __init__(self, index):
        self.index = index
        self.accepted = False


WORDCOUNT_TYPES = [Line, WordCount, Stop]


def buggy_merge(conflicts: list[ConflictTriple], orig: State, yours: State, theirs: State) -> State:
    merged = update_not_conflicting(orig, yours, theirs)
    for c in conflicts:
        assert c.yours is not None and c.yours.type_name == "WordCount"
        merged = merged.with_dimension(
            "WordCount", c.pkey, "count", c.yours.dims["count"] + c.theirs.dims["count"]
        )
    return merged


def fixed_merge(conflicts: list[ConflictTriple], orig: State, yours: State, theirs: State) -> State:
    merged = update_not_conflicting(orig, yours, theirs)
    for c in conflicts:
        assert c.yours is not None and c.yours.type_name == "WordCount"
        count = c.yours.dims["count"] + c.theirs.dims["count"]
        if c.orig is not None:  # absent when both sides created the object
            count -= c.orig.dims["count"]
        merged = merged.with_dimension("WordCount", c.pkey, "count", count)
    return merged


MERGE_FUNCTIONS = {"buggy": buggy_merge, "fixed": fixed_merge}


def grouper_app(df, filename: str, num_count) -> list[str]:
    """Shard the file, wait for all workers to accept their Stop, print counts."""
    num_count = int(num_count)
    i = 0
    for line in open(filename):
        df.add_one(Line, Line(i, line))
        df.commit()
        i += 1
    df.add_many(Stop, [Stop(n) for n in range(num_count)])
    df.commit()
    while not all(s.accepted for s in df.read_all(Stop)):
        df.checkout()
    df.checkout()  # counts merged alongside the last acceptance
    order: dict[str, int] = {}
    for line in df.read_all(Line):
        for token in line.process():
            order.setdefault(token, len(order))
    counts = df.read_all(WordCount)
    output = [
        f"{w.word} {w.count}"
        for w in sorted(counts, key=lambda w: order.get(w.word, len(order)))
    ]
    for text in output:
        print(text)
    return output


def worker_app(df, index, num_count) -> None:
    """Count tokens on lines index, index+num_count, ... then accept the Stop."""
    index = int(index)
    num_count = int(num_count)
    line_num = index
    stop = None
    line = None
    while not stop or line:
        df.pull()
        line = df.read_one(Line, line_num)
        if line:
            for word in line.process():
                word_obj = df.read_one(WordCount, word)
                if not word_obj:
                    word_obj = WordCount(word, 0)
                    df.add_one(word_obj)
                word_obj.count += 1
            line_num += num_count
        stop = df.read_one(Stop, index)
        df.commit()
        df.push()
    stop.accepted = True
    df.commit()
    df.push()


def sequential_counts(lines) -> dict[str, int]:
    """Single-process frequency oracle the distributed run must match."""
    return dict(Counter(token for line in lines for token in line.strip().split()))


# Shared-type declarations for `got-node --app got.wordcount:...`
grouper_app.node_types = WORDCOUNT_TYPES
worker_app.node_types = WORDCOUNT_TYPES

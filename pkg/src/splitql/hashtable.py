"""Chained hash table over a heap segment, storing record ids only.

Layout inside one heap allocation:

    directory   capacity x u32    head node ordinal + 1 per bucket (0 = none)
    validity    ceil(capacity/8)  one bit per bucket; a key counts as present
                                  only when its bucket's bit is 1
    chain       n_nodes x node    node = [entry_count, rid_0..rid_7, next]
                                  (10 x u32; next is node ordinal + 1)

Resetting only clears the validity bitmap and rewinds the node cursor, so a
segment can be reused across queries for the cost of capacity/8 bytes of
writes. Directory slots and chain bytes may hold stale data from a previous
use; the validity bit gates them.

Buckets come from a fixed 32-bit mixer (the murmur3 finalizer) masked down to
the table size; probing therefore yields a superset per bucket and callers
re-verify real key equality through the record id.
"""

from __future__ import annotations

import numpy as np

NODE_RIDS = 8          # rids per chain node
NODE_U32 = NODE_RIDS + 2  # count + rids + next

_M1 = np.uint32(0x85EBCA6B)
_M2 = np.uint32(0xC2B2AE35)


class ChainExhausted(Exception):
    """Chain region full; segment was sized too small for the build side."""


def mix32(key: int) -> int:
    """Scalar avalanche mixer (murmur3 fmix32); keys taken mod 2**32."""
    h = key & 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


def bucket_of(key: int, mask: int) -> int:
    return mix32(key) & mask


def mix32_array(keys: np.ndarray) -> np.ndarray:
    """Vectorized mix32 over an integer array."""
    h = keys.astype(np.uint32, copy=True)
    h ^= h >> np.uint32(16)
    h *= _M1
    h ^= h >> np.uint32(13)
    h *= _M2
    h ^= h >> np.uint32(16)
    return h


def hash_strings(s_array: np.ndarray) -> np.ndarray:
    """32-bit polynomial hash of the raw bytes of an 'S' dtype array."""
    width = s_array.dtype.itemsize
    mat = s_array.view(np.uint8).reshape(-1, width)
    h = np.zeros(len(s_array), dtype=np.uint32)
    for j in range(width):
        h = h * np.uint32(31) + mat[:, j]
    return mix32_array(h)


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


class HashTableSegment:
    def __init__(self, heap, capacity: int, n_nodes: int):
        assert capacity & (capacity - 1) == 0, "capacity must be a power of two"
        self.heap = heap
        self.capacity = capacity
        self.mask = capacity - 1
        self.n_nodes = n_nodes
        self.bitmap_bytes = (capacity + 7) // 8
        self.directory_base = heap.alloc(capacity * 4, 4)
        self.validity_base = heap.alloc(self.bitmap_bytes, 1)
        self.chain_base = heap.alloc(n_nodes * NODE_U32 * 4, 4)
        self.directory = heap.view(np.uint32, self.directory_base, capacity)
        self.validity = heap.u8(self.validity_base, self.bitmap_bytes)
        self.chain = heap.view(np.uint32, self.chain_base, n_nodes * NODE_U32)
        self.next_free = 0
        self.last_reset_bytes = 0
        self.key_fn = None  # optional rid-array -> key-array binding for scan_groups
        self.reset()

    # ------------------------------------------------------------- scalar ops

    def reset(self) -> None:
        """Clear all validity bits and rewind the node cursor; O(capacity/8) writes."""
        self.validity[:] = 0
        self.next_free = 0
        self.last_reset_bytes = self.bitmap_bytes

    def _alloc_node(self) -> int:
        if self.next_free >= self.n_nodes:
            raise ChainExhausted(f"all {self.n_nodes} chain nodes in use")
        node = self.next_free
        self.next_free += 1
        base = node * NODE_U32
        self.chain[base] = 0          # entry count
        self.chain[base + NODE_U32 - 1] = 0  # next pointer; clears stale data
        return node

    def _bit(self, bucket: int) -> bool:
        return bool(self.validity[bucket >> 3] & (1 << (bucket & 7)))

    def _set_bit(self, bucket: int) -> None:
        self.validity[bucket >> 3] |= 1 << (bucket & 7)

    def insert(self, key: int, rid: int) -> None:
        bucket = bucket_of(key, self.mask)
        if not self._bit(bucket):
            node = self._alloc_node()
            self.directory[bucket] = node + 1
            self._set_bit(bucket)
        else:
            node = int(self.directory[bucket]) - 1
            while True:
                base = node * NODE_U32
                nxt = int(self.chain[base + NODE_U32 - 1])
                if nxt == 0:
                    break
                node = nxt - 1
        base = node * NODE_U32
        count = int(self.chain[base])
        if count == NODE_RIDS:
            fresh = self._alloc_node()
            self.chain[base + NODE_U32 - 1] = fresh + 1
            node, base, count = fresh, fresh * NODE_U32, 0
        self.chain[base + 1 + count] = rid
        self.chain[base] = count + 1

    def probe(self, key: int):
        """Yield every rid inserted under any key mapping to this bucket.

        Callers must re-verify real key equality via the rid; bucket equality
        admits false positives.
        """
        bucket = bucket_of(key, self.mask)
        if not self._bit(bucket):
            return
        node = int(self.directory[bucket]) - 1
        while node >= 0:
            base = node * NODE_U32
            count = int(self.chain[base])
            for i in range(count):
                yield int(self.chain[base + 1 + i])
            nxt = int(self.chain[base + NODE_U32 - 1])
            node = nxt - 1

    def scan_groups(self, key_fn=None):
        """Yield (key, rid list) per distinct inserted key, via the bitmap scan.

        key_fn maps a rid array back to its keys; defaults to the binding set
        at build time.
        """
        key_fn = key_fn or self.key_fn
        if key_fn is None:
            raise ValueError("scan_groups needs a rid -> key binding")
        buckets, rids = self._collect()
        if len(rids) == 0:
            return
        keys = np.asarray(key_fn(rids))
        order = np.argsort(keys, kind="stable")
        keys_sorted, rids_sorted = keys[order], rids[order]
        starts = np.flatnonzero(np.r_[True, keys_sorted[1:] != keys_sorted[:-1]])
        ends = np.r_[starts[1:], len(keys_sorted)]
        for s, e in zip(starts, ends):
            yield keys_sorted[s], rids_sorted[s:e].tolist()

    # --------------------------------------------------------- vectorized ops

    def _valid_buckets(self) -> np.ndarray:
        bits = np.unpackbits(self.validity, bitorder="little")[: self.capacity]
        return np.flatnonzero(bits)

    def _collect(self) -> tuple[np.ndarray, np.ndarray]:
        """All (bucket, rid) pairs reachable from set validity bits."""
        buckets = self._valid_buckets()
        if len(buckets) == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        out_b, out_r = [], []
        node = self.directory[buckets].astype(np.int64) - 1
        owner = buckets.astype(np.int64)
        while len(node):
            base = node * NODE_U32
            counts = self.chain[base].astype(np.int64)
            width = int(counts.max()) if len(counts) else 0
            if width:
                slots = base[:, None] + 1 + np.arange(width)[None, :]
                rid_mat = self.chain[slots]
                keep = np.arange(width)[None, :] < counts[:, None]
                out_b.append(np.repeat(owner, np.minimum(counts, width)))
                out_r.append(rid_mat[keep].astype(np.int64))
            nxt = self.chain[base + NODE_U32 - 1].astype(np.int64)
            alive = nxt > 0
            node = nxt[alive] - 1
            owner = owner[alive]
        if not out_b:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(out_b), np.concatenate(out_r)

    def bulk_insert(self, hashes: np.ndarray, rids: np.ndarray) -> None:
        """Insert many (pre-mixed hash, rid) pairs into an empty table at once.

        Produces the same layout as repeated insert(): per bucket, rids in
        input order, packed 8 per node.
        """
        assert self.next_free == 0, "bulk_insert requires a freshly reset segment"
        n = len(rids)
        if n == 0:
            return
        buckets = (hashes & np.uint32(self.mask)).astype(np.int64)
        order = np.argsort(buckets, kind="stable")
        b_sorted = buckets[order]
        r_sorted = np.asarray(rids)[order].astype(np.uint32)
        starts = np.flatnonzero(np.r_[True, b_sorted[1:] != b_sorted[:-1]])
        counts = np.diff(np.r_[starts, n])
        uniq = b_sorted[starts]
        nodes_per_bucket = (counts + NODE_RIDS - 1) // NODE_RIDS
        total_nodes = int(nodes_per_bucket.sum())
        if total_nodes > self.n_nodes:
            raise ChainExhausted(f"need {total_nodes} nodes, have {self.n_nodes}")
        node_base = np.r_[0, np.cumsum(nodes_per_bucket)[:-1]]

        # per-entry rank within its bucket -> node ordinal and slot
        rank = np.arange(n) - np.repeat(starts, counts)
        entry_node = np.repeat(node_base, counts) + rank // NODE_RIDS
        entry_slot = rank % NODE_RIDS
        self.chain[entry_node * NODE_U32 + 1 + entry_slot] = r_sorted

        # node headers: counts and next pointers
        all_nodes = np.arange(total_nodes)
        node_owner = np.repeat(np.arange(len(uniq)), nodes_per_bucket)
        local = all_nodes - node_base[node_owner]
        remaining = counts[node_owner] - local * NODE_RIDS
        self.chain[all_nodes * NODE_U32] = np.minimum(remaining, NODE_RIDS).astype(np.uint32)
        is_last = local == nodes_per_bucket[node_owner] - 1
        nxt = np.where(is_last, 0, all_nodes + 2).astype(np.uint32)
        self.chain[all_nodes * NODE_U32 + NODE_U32 - 1] = nxt

        self.directory[uniq] = (node_base + 1).astype(np.uint32)
        np.bitwise_or.at(self.validity, uniq >> 3, (1 << (uniq & 7)).astype(np.uint8))
        self.next_free = total_nodes

    def bulk_probe(self, hashes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """For each probe position, gather candidate rids from its bucket.

        Returns (probe positions, rids), one pair per candidate; key equality
        is NOT verified here.
        """
        n = len(hashes)
        if n == 0 or self.next_free == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        buckets = (hashes & np.uint32(self.mask)).astype(np.int64)
        live = (self.validity[buckets >> 3] >> (buckets & 7).astype(np.uint8)) & 1
        pos = np.flatnonzero(live)
        if len(pos) == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        out_p, out_r = [], []
        node = self.directory[buckets[pos]].astype(np.int64) - 1
        owner = pos
        while len(node):
            base = node * NODE_U32
            counts = self.chain[base].astype(np.int64)
            width = int(counts.max()) if len(counts) else 0
            if width:
                slots = base[:, None] + 1 + np.arange(width)[None, :]
                rid_mat = self.chain[slots]
                keep = np.arange(width)[None, :] < counts[:, None]
                out_p.append(np.repeat(owner, np.minimum(counts, width)))
                out_r.append(rid_mat[keep].astype(np.int64))
            nxt = self.chain[base + NODE_U32 - 1].astype(np.int64)
            alive = nxt > 0
            node = nxt[alive] - 1
            owner = owner[alive]
        if not out_p:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(out_p), np.concatenate(out_r)


class SegmentPool:
    """Reuses hash segments across queries; a reset costs capacity/8 byte writes."""

    def __init__(self, heap):
        self.heap = heap
        self.free: list[HashTableSegment] = []

    def acquire(self, rows: int) -> HashTableSegment:
        capacity = max(16, next_pow2(2 * max(rows, 1)))
        nodes = max(rows, 2)
        best = None
        for seg in self.free:
            if seg.capacity >= capacity and seg.n_nodes >= nodes:
                if best is None or seg.capacity < best.capacity:
                    best = seg
        if best is not None:
            self.free.remove(best)
            best.reset()
            return best
        return HashTableSegment(self.heap, capacity, nodes)

    def release(self, seg: HashTableSegment) -> None:
        seg.key_fn = None
        self.free.append(seg)


def pool_for(heap) -> SegmentPool:
    if heap._segments is None:
        heap._segments = SegmentPool(heap)
    return heap._segments

"""Counter-based Gaussian streams (Philox-4x32-10 + Box-Muller).

Every random draw in this package is a pure function of
``(master seed, stream id, position)``: the Philox block cipher is applied
to a 128-bit counter that encodes the stream id and the block index, keyed
by the 64-bit master seed.  Streams for distinct ids are independent by
construction and bit-identical regardless of evaluation order, chunking, or
worker count.  Generation is vectorised across streams, which is what makes
large Monte Carlo ensembles affordable in pure numpy.

Stream ids pack a small domain tag (which subsystem is drawing), two matrix
indices and a path index into one 64-bit word, see :func:`stream_id`.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_ROUNDS = 10

# domain tags keep unrelated subsystems on disjoint streams
DOMAIN_ENTRY = 0        # Gaussian entry paths (Cholesky sampler)
DOMAIN_CIRCULANT = 1    # circulant-embedding sampler
DOMAIN_SDE = 2          # eigenvalue SDE driving noise

_MAX_INDEX = 1 << 12    # matrix indices i, j must stay below this
_MAX_PATH = 1 << 36


def philox4x32(counter, key0: int, key1: int):
    """Apply the Philox-4x32-10 bijection to a batch of 128-bit counters.

    ``counter`` is a tuple of four equally-shaped uint64 arrays holding
    32-bit words; returns the four output words with the same shape.
    """
    x0, x1, x2, x3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    k0 = np.uint64(key0) & _MASK32
    k1 = np.uint64(key1) & _MASK32
    for _ in range(_ROUNDS):
        p0 = _M0 * x0
        p1 = _M1 * x2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK32
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return x0, x1, x2, x3


def stream_id(domain: int, i: int, j: int, path: int) -> int:
    """Pack (domain, i, j, path) into a 64-bit stream id."""
    if not (0 <= domain < 16):
        raise ValueError(f"stream domain {domain} out of range")
    if not (0 <= i < _MAX_INDEX and 0 <= j < _MAX_INDEX):
        raise ValueError(f"matrix index ({i},{j}) exceeds the supported {_MAX_INDEX - 1}")
    if not (0 <= path < _MAX_PATH):
        raise ValueError(f"path index {path} exceeds the supported {_MAX_PATH - 1}")
    return (domain << 60) | (i << 48) | (j << 36) | path


def entry_stream_ids(n: int, paths: np.ndarray, domain: int = DOMAIN_ENTRY) -> np.ndarray:
    """Stream ids for all upper-triangle entries (i <= j) x all paths.

    Returns a uint64 array of shape ``(len(paths), n*(n+1)//2)`` ordered
    row-major over the upper triangle, matching
    ``numpy.triu_indices(n)``.
    """
    iu, ju = np.triu_indices(n)
    base = (np.uint64(domain) << np.uint64(60)) \
        | (iu.astype(np.uint64) << np.uint64(48)) \
        | (ju.astype(np.uint64) << np.uint64(36))
    paths = np.asarray(paths, dtype=np.uint64)
    if paths.size and int(paths.max()) >= _MAX_PATH:
        raise ValueError("path index exceeds the supported range")
    return base[None, :] | paths[:, None]


def normals(seed: int, ids: np.ndarray, count: int, start: int = 0) -> np.ndarray:
    """Standard normal variates for each stream id.

    Returns shape ``ids.shape + (count,)`` holding positions
    ``[start, start + count)`` of each stream; ``start`` must be even
    (Philox blocks carry two normals).  Stream ``s`` yields the same
    values at the same positions no matter how the draw is chunked.
    """
    if start % 2:
        raise ValueError("start must be even (block aligned)")
    ids = np.asarray(ids, dtype=np.uint64)
    shape = ids.shape
    flat = ids.reshape(-1)
    n_blocks = (count + 1) // 2  # one Philox block -> two normals
    blocks = np.arange(start // 2, start // 2 + n_blocks, dtype=np.uint64)

    c0 = np.broadcast_to(blocks, (flat.size, n_blocks))
    c1 = np.broadcast_to((flat & _MASK32)[:, None], c0.shape)
    c2 = np.broadcast_to((flat >> np.uint64(32))[:, None], c0.shape)
    c3 = np.zeros(c0.shape, dtype=np.uint64)

    x0, x1, x2, x3 = philox4x32((c0, c1, c2, c3), seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)

    ua = (x0 << np.uint64(32)) | x1
    ub = (x2 << np.uint64(32)) | x3
    # (0,1] for the log, [0,1) for the angle
    u1 = ((ua >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
    u2 = (ub >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    z = np.empty((flat.size, 2 * n_blocks), dtype=np.float64)
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z[:, :count].reshape(shape + (count,))


def normals_single(seed: int, sid: int, count: int) -> np.ndarray:
    """Normals for one stream id; identical to the corresponding row of
    a batched :func:`normals` call."""
    return normals(seed, np.array([sid], dtype=np.uint64), count)[0]

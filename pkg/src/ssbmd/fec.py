"""Binary LDPC codes: alist I/O, systematic encoding and belief propagation.

Codewords are laid out data first, parity last: positions 0..k-1 carry the
data bits and positions k..n-1 the parity bits. LLRs use the natural log
and are positive when bit 0 is more likely.
"""

from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np
import scipy.sparse as sp

LLR_CLIP = 30.0
DEFAULT_MAX_ITERS = 50


class AlistError(ValueError):
    pass


class EncodabilityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# GF(2) linear algebra on dense boolean arrays


def gf2_rank(mat):
    a = np.array(mat, dtype=bool)
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        piv = np.flatnonzero(a[rank:, c])
        if piv.size == 0:
            continue
        p = rank + piv[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        hit = np.flatnonzero(a[:, c])
        hit = hit[hit != rank]
        a[hit] ^= a[rank]
        rank += 1
    return rank


def gf2_solve_map(left, rhs):
    """X with left @ X = rhs over GF(2) for a (rows >= r) x r ``left`` of
    full column rank; None if ``left`` is rank deficient or the redundant
    rows are inconsistent."""
    r = left.shape[1]
    aug = np.concatenate([np.array(left, dtype=bool), np.array(rhs, dtype=bool)], axis=1)
    for c in range(r):
        piv = np.flatnonzero(aug[c:, c])
        if piv.size == 0:
            return None
        p = c + piv[0]
        if p != c:
            aug[[c, p]] = aug[[p, c]]
        hit = np.flatnonzero(aug[:, c])
        hit = hit[hit != c]
        aug[hit] ^= aug[c]
    if aug[r:].any():
        return None
    return aug[:r, r:]


# ---------------------------------------------------------------------------
# codes


def _is_staircase(hp):
    """Dual-diagonal parity block: ones on the diagonal and the subdiagonal only."""
    r = hp.shape[0]
    if hp.nnz != 2 * r - 1:
        return False
    coo = hp.tocoo()
    d = coo.row - coo.col
    return bool(np.all((d == 0) | (d == 1)))


@dataclass(frozen=True)
class ParityCheckCode:
    """Sparse parity-check matrix H (checks x n) of rank n-k whose last n-k
    columns are linearly independent. Redundant checks are allowed; they do
    not change the code but give belief propagation a denser graph."""

    n: int
    k: int
    checks: tuple
    name: str = ""
    H: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = [np.unique(np.asarray(c, dtype=np.int64)) for c in self.checks]
        if any(r.size and (r.min() < 0 or r.max() >= self.n) for r in rows):
            raise ValueError("check index out of range")
        if not 0 < self.k < self.n or len(rows) < self.n - self.k:
            raise ValueError(f"need at least {self.n - self.k} checks for a ({self.n}, {self.k}) code")
        indptr = np.concatenate([[0], np.cumsum([r.size for r in rows])])
        indices = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        H = sp.csr_matrix((np.ones(indices.size, dtype=np.int8), indices, indptr), shape=(len(rows), self.n))
        object.__setattr__(self, "checks", tuple(tuple(int(i) for i in r) for r in rows))
        object.__setattr__(self, "H", H)

    @property
    def num_checks(self):
        return len(self.checks)

    @property
    def rate(self):
        return self.k / self.n

    @property
    def column_degrees(self):
        return np.asarray(self.H.sum(axis=0)).ravel().astype(np.int64)

    @property
    def row_degrees(self):
        return np.asarray(self.H.sum(axis=1)).ravel().astype(np.int64)

    @cached_property
    def _encoder(self):
        hd = self.H[:, : self.k]
        hp = self.H[:, self.k :]
        if hp.shape[0] == hp.shape[1] and _is_staircase(hp):
            return ("staircase", hd.tocsr(), None)
        dense = self.H.toarray().astype(bool)
        rank = gf2_rank(dense)
        if rank != self.n - self.k:
            raise EncodabilityError(f"parity-check matrix has rank {rank}, expected n - k = {self.n - self.k}")
        sol = gf2_solve_map(dense[:, self.k :], dense[:, : self.k])
        if sol is None:
            raise EncodabilityError("parity block is singular; systematic encoding would need data positions permuted")
        return ("dense", None, sol.astype(np.uint8))

    def verify(self):
        """Check full row rank and an invertible parity block; returns self."""
        self._encoder
        return self

    def syndrome(self, words):
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return (self.H @ words.T).T % 2

    def is_codeword(self, words):
        return ~np.any(self.syndrome(words), axis=1)


def encode_systematic(code, data_bits):
    """Codeword(s) [data | parity]; accepts a k-vector or a (batch, k) array."""
    data = np.asarray(data_bits)
    single = data.ndim == 1
    data = np.atleast_2d(data).astype(np.uint8)
    if data.shape[1] != code.k:
        raise ValueError(f"expected {code.k} data bits, got {data.shape[1]}")
    kind, hd, sol = code._encoder
    if kind == "staircase":
        s = (hd @ data.T.astype(np.int64)).T % 2
        parity = np.cumsum(s, axis=1) % 2
    else:
        parity = (data.astype(np.int64) @ sol.T.astype(np.int64)) % 2
    out = np.concatenate([data, parity.astype(np.uint8)], axis=1)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# alist format


def load_alist(text, name=""):
    """Parse an alist description (1-based indices, zero entries ignored).

    Layout: ``n m``, ``max_col_weight max_row_weight``, n column weights,
    m row weights, then n lines of check indices per column and m lines of
    column indices per row. The two adjacency lists must agree.
    """
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4:
        raise AlistError("alist text too short")
    try:
        n, m = (int(x) for x in lines[0][:2])
        int(lines[1][0]), int(lines[1][1])
        col_w = [int(x) for x in lines[2]]
        row_w = [int(x) for x in lines[3]]
        if len(col_w) != n or len(row_w) != m or len(lines) != 4 + n + m:
            raise AlistError("alist section sizes do not match the header")
        cols = [[int(x) - 1 for x in ln if int(x) != 0] for ln in lines[4 : 4 + n]]
        rows = [[int(x) - 1 for x in ln if int(x) != 0] for ln in lines[4 + n :]]
    except (ValueError, IndexError) as exc:
        if isinstance(exc, AlistError):
            raise
        raise AlistError(f"malformed alist: {exc}") from exc
    if [len(c) for c in cols] != col_w or [len(r) for r in rows] != row_w:
        raise AlistError("listed weights disagree with the adjacency lists")
    from_cols = sorted((r, c) for c, rs in enumerate(cols) for r in rs)
    from_rows = sorted((r, c) for r, cs in enumerate(rows) for c in cs)
    if from_cols != from_rows:
        raise AlistError("column and row lists describe different matrices")
    if any(not 0 <= c < n for r in rows for c in r):
        raise AlistError("column index out of range")
    indptr = np.concatenate([[0], np.cumsum([len(r) for r in rows])]).astype(np.int64)
    H = sp.csr_matrix((np.ones(int(indptr[-1]), dtype=np.int8), [c for r in rows for c in r], indptr), shape=(m, n))
    if m < n and _is_staircase(H[:, n - m :]):
        rank = m
    else:
        # redundant checks make the rank smaller than the number of rows
        rank = gf2_rank(H.toarray())
    if rank == 0 or rank >= n:
        raise EncodabilityError(f"parity-check matrix of rank {rank} does not define a code")
    code = ParityCheckCode(n, n - rank, tuple(rows), name=name)
    return code.verify()


def to_alist(code):
    cols = [[] for _ in range(code.n)]
    for r, row in enumerate(code.checks):
        for c in row:
            cols[c].append(r)
    out = [
        f"{code.n} {code.num_checks}",
        f"{max(map(len, cols))} {max(map(len, code.checks))}",
        " ".join(str(len(c)) for c in cols),
        " ".join(str(len(r)) for r in code.checks),
    ]
    out += [" ".join(str(r + 1) for r in c) for c in cols]
    out += [" ".join(str(c + 1) for c in r) for r in code.checks]
    return "\n".join(out) + "\n"


def read_alist(path):
    with open(path) as fh:
        return load_alist(fh.read(), name=str(path))


# ---------------------------------------------------------------------------
# construction of the bundled desk-scale codes


def _column_degrees(k, data_degree):
    """Per data column degree from an int or a {degree: fraction} profile;
    columns are listed in nondecreasing degree order."""
    if isinstance(data_degree, dict):
        degs = sorted(data_degree)
        counts = [int(round(data_degree[d] * k)) for d in degs]
        counts[0] += k - sum(counts)
        return np.repeat(degs, counts)
    return np.full(k, int(data_degree))


def staircase_peg(n, k, data_degree=3, seed=0):
    """LDPC code with a dual-diagonal parity part and data columns placed by
    progressive edge growth (each new edge goes to a check outside the
    current neighbourhood of the column, else to one at the largest
    distance; ties go to the lowest check degree, then to the seeded RNG).

    ``data_degree`` is a column degree or a {degree: fraction} profile.
    """
    r = n - k
    col_deg = _column_degrees(k, data_degree) if k > 0 else np.zeros(0, int)
    if r < 1 or k < 1 or col_deg.max() > r:
        raise ValueError("invalid code dimensions")
    rng = np.random.default_rng(seed)
    check_adj = [set() for _ in range(r)]
    var_adj = [set() for _ in range(n)]

    def add(c, v):
        check_adj[c].add(v)
        var_adj[v].add(c)

    for i in range(r):
        add(i, k + i)
        if i > 0:
            add(i, k + i - 1)
    degree = np.array([len(a) for a in check_adj])
    for v in range(k):
        for e in range(int(col_deg[v])):
            if e == 0:
                cand = np.flatnonzero(degree == degree.min())
            else:
                reached = np.zeros(r, dtype=bool)
                frontier = set(var_adj[v])
                reached[list(frontier)] = True
                last = reached.copy()
                while True:
                    nxt_vars = set()
                    for c in frontier:
                        nxt_vars |= check_adj[c]
                    new_checks = set()
                    for u in nxt_vars:
                        new_checks |= var_adj[u]
                    new_checks = {c for c in new_checks if not reached[c]}
                    if not new_checks:
                        break
                    last = reached.copy()
                    reached[list(new_checks)] = True
                    frontier = new_checks
                    if reached.all():
                        break
                pool = np.flatnonzero(~reached) if not reached.all() else np.flatnonzero(~last)
                pool = pool[[c not in var_adj[v] for c in pool]]
                if pool.size == 0:
                    pool = np.array([c for c in range(r) if c not in var_adj[v]])
                cand = pool[degree[pool] == degree[pool].min()]
            c = int(rng.choice(cand))
            add(c, v)
            degree[c] += 1
    checks = tuple(tuple(sorted(a)) for a in check_adj)
    return ParityCheckCode(n, k, checks, name=f"peg-{n}-{k}")


BUNDLED = {
    "hamming74": "hamming74.alist",
    "hamming74_full": "hamming74_full.alist",
    "peg1008_r34": "peg1008_r34.alist",
    "peg1002_r23": "peg1002_r23.alist",
}

# parameters that regenerate the bundled LDPC files; one data column in ten
# has degree 12, the rest degree 3
DESK_PROFILE = {3: 0.9, 12: 0.1}
BUNDLED_RECIPES = {
    "peg1008_r34": dict(n=1008, k=756, data_degree=DESK_PROFILE, seed=1),
    "peg1002_r23": dict(n=1002, k=668, data_degree=DESK_PROFILE, seed=1),
}


def bundled_code(name):
    if name not in BUNDLED:
        raise KeyError(f"unknown code {name!r}; bundled: {sorted(BUNDLED)}")
    text = resources.files("ssbmd").joinpath("codes", BUNDLED[name]).read_text()
    return load_alist(text, name=name)


def load_code(ref):
    """A bundled code by name, or an alist file by path."""
    return bundled_code(ref) if ref in BUNDLED else read_alist(ref)


# ---------------------------------------------------------------------------
# belief propagation


@dataclass
class DecodeResult:
    codeword: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    posterior: np.ndarray
    k: int

    @property
    def data(self):
        return self.codeword[..., : self.k]


class _Graph:
    def __init__(self, code):
        coo = code.H.tocoo()
        order = np.lexsort((coo.col, coo.row))
        self.edge_check = coo.row[order].astype(np.int64)
        self.edge_var = coo.col[order].astype(np.int64)
        self.num_edges = self.edge_check.size
        self.check_start = np.searchsorted(self.edge_check, np.arange(code.num_checks))
        ones = np.ones(self.num_edges)
        # (n x E) incidence: sums edge messages per variable
        self.var_sum = sp.csr_matrix((ones, (self.edge_var, np.arange(self.num_edges))), shape=(code.n, self.num_edges))
        self.check_sum = sp.csr_matrix(
            (ones, (self.edge_check, np.arange(self.num_edges))), shape=(code.num_checks, self.num_edges)
        )


def _phi(x):
    x = np.clip(x, 1e-12, 60.0)
    return -np.log(np.tanh(0.5 * x))


def decode_bp(code, llrs, max_iters=DEFAULT_MAX_ITERS, method="sum-product", clip=LLR_CLIP):
    """Flooding belief propagation over one frame or a (batch, n) array.

    A frame stops once its hard decisions satisfy every check and no
    posterior LLR is exactly zero (an all-zero input never counts as
    decoded). Returns a DecodeResult; for a single frame its fields are
    scalars/vectors.
    """
    if method not in ("sum-product", "min-sum"):
        raise ValueError("method must be 'sum-product' or 'min-sum'")
    if max_iters < 1:
        raise ValueError("need at least one iteration")
    llrs = np.asarray(llrs, dtype=float)
    single = llrs.ndim == 1
    llrs = np.atleast_2d(llrs)
    if llrs.shape[1] != code.n:
        raise ValueError(f"expected {code.n} LLRs per frame")
    if np.any(np.isnan(llrs)):
        raise ValueError("LLRs contain NaN")
    llrs = np.clip(llrs, -clip, clip)
    g = code.__dict__.get("_bp_graph")
    if g is None:
        g = _Graph(code)
        object.__setattr__(code, "_bp_graph", g)
    batch = llrs.shape[0]
    c2v = np.zeros((batch, g.num_edges))
    post = llrs.copy()
    hard = (post < 0).astype(np.uint8)
    done = np.zeros(batch, dtype=bool)
    iters = np.zeros(batch, dtype=np.int64)
    live = np.arange(batch)
    for it in range(1, max_iters + 1):
        v2c = post[live][:, g.edge_var] - c2v[live]
        mag = np.abs(v2c)
        neg = v2c < 0
        # parity of negative inputs per check, excluding the edge itself
        neg_count = np.add.reduceat(neg.astype(np.int64), g.check_start, axis=1)
        sign = np.where((neg_count[:, g.edge_check] - neg) % 2 == 1, -1.0, 1.0)
        if method == "sum-product":
            ph = _phi(mag)
            total = np.add.reduceat(ph, g.check_start, axis=1)
            new = sign * _phi(total[:, g.edge_check] - ph)
        else:
            new = sign * _min_excluding(mag, g)
        c2v[live] = new
        post_live = llrs[live] + (g.var_sum @ new.T).T
        post[live] = post_live
        hard_live = (post_live < 0).astype(np.uint8)
        hard[live] = hard_live
        synd = (g.check_sum @ hard_live[:, g.edge_var].T.astype(float)).T % 2
        ok = ~np.any(synd > 0, axis=1) & ~np.any(post_live == 0, axis=1)
        iters[live] = it
        done[live[ok]] = True
        live = live[~ok]
        if live.size == 0:
            break
    res = DecodeResult(hard, done, iters, post, code.k)
    if single:
        res = DecodeResult(hard[0], bool(done[0]), int(iters[0]), post[0], code.k)
    return res


def _min_excluding(mag, g):
    """Per edge, the smallest magnitude among the other edges of its check."""
    big = np.inf
    m1 = np.minimum.reduceat(mag, g.check_start, axis=1)
    first = m1[:, g.edge_check] == mag
    # second minimum: mask one occurrence of the minimum per check
    pos = np.arange(mag.shape[1])
    idx_first = np.where(first, pos, mag.shape[1])
    arg = np.minimum.reduceat(idx_first, g.check_start, axis=1)
    masked = mag.copy()
    rows = np.arange(mag.shape[0])[:, None]
    masked[rows, arg] = big
    m2 = np.minimum.reduceat(masked, g.check_start, axis=1)
    is_arg = pos[None, :] == arg[:, g.edge_check]
    return np.where(is_arg, m2[:, g.edge_check], m1[:, g.edge_check])

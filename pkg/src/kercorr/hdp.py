"""Two-group hierarchical Dirichlet Process: latent-table state,
restaurant-franchise predictive sampling, table Gibbs sweeps, exact
small-instance posteriors, and the prior closed forms.

The model couples two group-level Dirichlet processes through a shared
discrete root; the augmented representation attaches a latent *table*
label to every observation.  Tables are never shared across groups, and
all customers at one table eat the same dish (carry the same observation
value).  Table labels are fresh integers from a monotone counter, which
is distributionally equivalent to drawing labels from an atomless
distribution (labels are a.s. distinct) and keeps runs exactly
reproducible.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .distributions import NormalBase, UniformBase, parse_base  # noqa: F401
from .errors import CapacityError, DegenerateVarianceError, InputError, InternalError
from .moments import BlockSet, PairedBlock

ENUMERATION_LIMIT = 1_000_000


@dataclass(frozen=True)
class HdpParams:
    """Group concentration c, root concentration c0, and atomless base."""

    c: float
    c0: float
    p0: object = field(default_factory=UniformBase)

    def __post_init__(self):
        if self.c <= 0 or self.c0 <= 0:
            raise InputError("concentrations c and c0 must be positive")


def prior_corr_closed(params: HdpParams) -> float:
    """Prior correlation between the two group measures, (1+c)/(1+c+c0);
    the same value for every injective kernel."""
    return (1.0 + params.c) / (1.0 + params.c + params.c0)


def prior_lambda(params: HdpParams) -> float:
    """Variance factor: Var(P_i(A)) = lambda * P0(A)(1 - P0(A))."""
    return (1.0 + params.c + params.c0) / ((1.0 + params.c) * (1.0 + params.c0))


def prior_setwise_moments(params: HdpParams, p0A: float) -> tuple[float, float]:
    """Closed prior (variance, covariance) of the two groups' masses of a
    set with base mass p0A; their ratio is the prior correlation."""
    if not 0.0 < p0A < 1.0:
        raise DegenerateVarianceError("set mass in {0, 1} makes the variance vanish")
    bern = p0A * (1.0 - p0A)
    var = prior_lambda(params) * bern
    cov = bern / (1.0 + params.c0)
    return var, cov


# ---------------------------------------------------------------------------
# latent-table state


class HdpState:
    """Mutable seating state for the two groups.

    Single-owner mutable during Gibbs; run independent chains with
    disjoint random streams rather than sharing one state.
    """

    __slots__ = (
        "obs", "labels", "_table_count", "_table_dish", "_table_group",
        "_gd_tables", "_dish_tables", "_total_tables", "_next_label",
    )

    def __init__(self, group1=(), group2=(), labels=None):
        self.obs = [[float(v) for v in group1], [float(v) for v in group2]]
        self.labels = [[], []]
        self._table_count = {}
        self._table_dish = {}
        self._table_group = {}
        # per group: dish value -> insertion-ordered dict of table labels
        self._gd_tables = [{}, {}]
        self._dish_tables = {}  # dish value -> number of tables, both groups
        self._total_tables = 0
        self._next_label = 0
        if labels is None:
            # i.i.d. atomless initialisation: every customer alone at a
            # fresh table
            for g in (0, 1):
                for v in self.obs[g]:
                    self.labels[g].append(self._seat(g, v, self.new_label()))
        else:
            for g in (0, 1):
                if len(labels[g]) != len(self.obs[g]):
                    raise InputError("labels must align with observations")
                for v, t in zip(self.obs[g], labels[g]):
                    self.labels[g].append(self._seat(g, v, int(t)))
            self._next_label = 1 + max(
                (t for lab in self.labels for t in lab), default=-1
            )
            self.check_invariants()

    # -- low-level seating ---------------------------------------------------

    def new_label(self) -> int:
        label = self._next_label
        self._next_label += 1
        return label

    def _seat(self, g: int, v: float, label: int) -> int:
        count = self._table_count.get(label)
        if count is None:
            self._table_count[label] = 1
            self._table_dish[label] = v
            self._table_group[label] = g
            self._gd_tables[g].setdefault(v, {})[label] = None
            self._dish_tables[v] = self._dish_tables.get(v, 0) + 1
            self._total_tables += 1
        else:
            if self._table_group[label] != g:
                raise InternalError("a table cannot be shared across groups")
            if self._table_dish[label] != v:
                raise InternalError("customers at one table must share the dish")
            self._table_count[label] = count + 1
        return label

    def _unseat(self, g: int, label: int):
        count = self._table_count[label] - 1
        if count == 0:
            v = self._table_dish.pop(label)
            del self._table_count[label]
            del self._table_group[label]
            group_tables = self._gd_tables[g][v]
            del group_tables[label]
            if not group_tables:
                del self._gd_tables[g][v]
            remaining = self._dish_tables[v] - 1
            if remaining:
                self._dish_tables[v] = remaining
            else:
                del self._dish_tables[v]
            self._total_tables -= 1
        else:
            self._table_count[label] = count

    # -- public mutation -----------------------------------------------------

    def append(self, group: int, value: float, label: int):
        g = group - 1
        self.obs[g].append(float(value))
        self.labels[g].append(self._seat(g, float(value), label))

    def pop(self, group: int):
        g = group - 1
        value = self.obs[g].pop()
        label = self.labels[g].pop()
        self._unseat(g, label)
        return value, label

    # -- summaries -----------------------------------------------------------

    @property
    def n1(self) -> int:
        return len(self.obs[0])

    @property
    def n2(self) -> int:
        return len(self.obs[1])

    @property
    def total_tables(self) -> int:
        return self._total_tables

    @property
    def n_dishes(self) -> int:
        return len(self._dish_tables)

    def dish_order(self) -> list[float]:
        """Unique observation values, ordered by first appearance in
        group 1 then group 2 (a fixed, data-determined order)."""
        seen, order = set(), []
        for g in (0, 1):
            for v in self.obs[g]:
                if v not in seen:
                    seen.add(v)
                    order.append(v)
        return order

    def dish_summary(self):
        """(dish values, per-group dish counts (2, K), per-group table
        counts (2, K))."""
        order = self.dish_order()
        index = {v: h for h, v in enumerate(order)}
        K = len(order)
        n = np.zeros((2, K), dtype=int)
        for g in (0, 1):
            for v in self.obs[g]:
                n[g, index[v]] += 1
        ell = np.zeros((2, K), dtype=int)
        for label, v in self._table_dish.items():
            ell[self._table_group[label], index[v]] += 1
        return order, n, ell

    def table_counts_key(self) -> tuple:
        """Hashable ((l_{1,h}), (l_{2,h})) in dish order, for comparing
        against the exact enumeration."""
        _, _, ell = self.dish_summary()
        return tuple(ell[0]), tuple(ell[1])

    def check_invariants(self):
        n_total = self.n1 + self.n2
        if not self.n_dishes <= self._total_tables <= n_total:
            raise InternalError("table count outside [K, n1 + n2]")
        recount = Counter()
        for g in (0, 1):
            for v, t in zip(self.obs[g], self.labels[g]):
                if self._table_group.get(t) != g:
                    raise InternalError("label assigned to the wrong group")
                if self._table_dish.get(t) != v:
                    raise InternalError("label serving the wrong dish")
                recount[t] += 1
        if recount != Counter(self._table_count):
            raise InternalError("table occupancy counters are stale")

    # -- checkpointing -------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"obs": self.obs, "labels": self.labels})

    @classmethod
    def from_json(cls, text: str) -> "HdpState":
        d = json.loads(text)
        return cls(d["obs"][0], d["obs"][1], labels=d["labels"])


# ---------------------------------------------------------------------------
# predictive sampling and Gibbs


def predictive_step(state: HdpState, params: HdpParams, group: int, rng):
    """One draw from the joint one-step-ahead predictive for (X, T) in the
    requested group, given the current state.  The state is not modified;
    the caller appends the pair if it should persist.

    With probability 1/(c + n_i) per existing customer the draw copies
    their (value, table).  Otherwise a fresh table opens and its dish is
    an existing franchise dish with probability l_h / (c0 + |l|), or a
    fresh base-measure draw with probability c0 / (c0 + |l|).
    """
    g = group - 1
    n_g = len(state.obs[g])
    u = rng.random() * (params.c + n_g)
    if u < n_g:
        j = min(int(u), n_g - 1)
        return state.obs[g][j], state.labels[g][j]
    label = state.new_label()
    total = state._total_tables
    r = rng.random() * (params.c0 + total)
    if r < total:
        target = min(int(r), total - 1)
        acc = 0
        for v, lh in state._dish_tables.items():
            acc += lh
            if target < acc:
                return v, label
        raise InternalError("table walk exhausted")  # pragma: no cover
    return params.p0.sample_one(rng), label


def _resample_table(state: HdpState, params: HdpParams, g: int, j: int, rng):
    v = state.obs[g][j]
    state._unseat(g, state.labels[g][j])
    # candidates: same-group tables serving the same dish, weighted by
    # their occupancy in the remaining assignment
    candidates = state._gd_tables[g].get(v)
    lh = state._dish_tables.get(v, 0)
    w_new = params.c * lh / (params.c0 + state._total_tables)
    chosen = None
    if candidates:
        counts = state._table_count
        total = w_new + sum(counts[t] for t in candidates)
        u = rng.random() * total
        acc = 0.0
        for t in candidates:
            acc += counts[t]
            if u < acc:
                chosen = t
                break
    if chosen is None:
        # includes the forced case lh == 0: with an atomless base, a dish
        # nobody else serves can only sit at a fresh table
        chosen = state.new_label()
    state.labels[g][j] = state._seat(g, v, chosen)


def gibbs_sweep(state: HdpState, params: HdpParams, rng) -> HdpState:
    """Resample every table label once, in a fixed scan order (group 1
    ascending, then group 2).  The dish partition of the data never moves;
    only tables do."""
    for g in (0, 1):
        for j in range(len(state.obs[g])):
            _resample_table(state, params, g, j, rng)
    return state


def sample_posterior_block(state: HdpState, params: HdpParams, rng) -> PairedBlock:
    """One 2x2 predictive block given (X, T), then one table sweep.

    The four draws extend the state sequentially (tables retained within
    the block), are rolled back afterwards, and the persistent state's
    tables are refreshed with one Gibbs sweep.
    """
    draws = {}
    plan = [(1, "x11"), (1, "x12"), (2, "x21"), (2, "x22")]
    for group, slot in plan:
        value, label = predictive_step(state, params, group, rng)
        state.append(group, value, label)
        draws[slot] = value
    for group, _ in reversed(plan):
        state.pop(group)
    gibbs_sweep(state, params, rng)
    return PairedBlock(**draws)


def sample_blocks(state: HdpState, params: HdpParams, m: int, rng) -> BlockSet:
    """m successive 2x2 predictive blocks with one sweep between blocks."""
    x11 = np.empty(m)
    x21 = np.empty(m)
    x12 = np.empty(m)
    x22 = np.empty(m)
    for t in range(m):
        b = sample_posterior_block(state, params, rng)
        x11[t], x21[t], x12[t], x22[t] = b.x11, b.x21, b.x12, b.x22
    return BlockSet(x11=x11, x21=x21, x12=x12, x22=x22)


def generate_joint_data(params: HdpParams, n1: int, n2: int, rng):
    """Draw (n1, n2) observations from the joint two-group model a priori
    via the sequential predictive scheme."""
    state = HdpState()
    for group, count in ((1, n1), (2, n2)):
        for _ in range(count):
            value, label = predictive_step(state, params, group, rng)
            state.append(group, value, label)
    return np.asarray(state.obs[0]), np.asarray(state.obs[1])


def generate_single_group_data(params: HdpParams, n: int, rng) -> np.ndarray:
    """Draw n observations from one group's marginal (a franchise with a
    single restaurant)."""
    state = HdpState()
    for _ in range(n):
        value, label = predictive_step(state, params, 1, rng)
        state.append(1, value, label)
    return np.asarray(state.obs[0])


# ---------------------------------------------------------------------------
# exact small-instance posterior over table counts


def stirling_unsigned(n: int, l: int) -> int:
    """Signless Stirling number of the first kind, exact.

    Recurrence |s(n+1, l)| = n |s(n, l)| + |s(n, l-1)| with |s(0, 0)| = 1;
    zero for l > n or l < 0 (the configuration weight vanishes there).
    """
    if n < 0:
        raise InputError("stirling_unsigned needs n >= 0")
    if l < 0 or l > n:
        return 0
    row = [1]  # row for n = 0
    for m in range(n):
        new = [0] * (m + 2)
        for j, val in enumerate(row):
            new[j] += m * val
            new[j + 1] += val
        row = new
    return row[l]


def log_stirling_unsigned(n: int, l: int) -> float:
    value = stirling_unsigned(n, l)
    return math.log(value) if value else -math.inf


def _log_rising(a: float, q: int) -> float:
    return math.lgamma(a + q) - math.lgamma(a)


def enumerate_table_posterior(group1, group2, params: HdpParams) -> dict:
    """Exact posterior over per-group per-dish table counts given the data.

    The unnormalised weight of a configuration is
    c^{|l|} / (c0)_{|l|} * prod_h (l_h - 1)! |s(n_{1,h}, l_{1,h})|
    |s(n_{2,h}, l_{2,h})|; the data-constant prefactor cancels in the
    normalisation.  Keys are ((l_{1,h}), (l_{2,h})) tuples in dish order.
    """
    state = HdpState(group1, group2)
    if state.n1 + state.n2 == 0:
        raise InputError("enumeration needs at least one observation")
    _, n, _ = state.dish_summary()
    K = n.shape[1]

    options = []
    size = 1
    for g in (0, 1):
        for h in range(K):
            opts = list(range(1, n[g, h] + 1)) if n[g, h] else [0]
            options.append(opts)
            size *= len(opts)
            if size > ENUMERATION_LIMIT:
                raise CapacityError(
                    f"table-count enumeration exceeds {ENUMERATION_LIMIT} configurations"
                )

    log_c = math.log(params.c)
    keys, logw = [], []
    for combo in itertools.product(*options):
        ell1 = combo[:K]
        ell2 = combo[K:]
        total = sum(ell1) + sum(ell2)
        lw = total * log_c - _log_rising(params.c0, total)
        for h in range(K):
            lh = ell1[h] + ell2[h]
            lw += math.lgamma(lh)  # log (l_h - 1)!
            lw += log_stirling_unsigned(n[0, h], ell1[h])
            lw += log_stirling_unsigned(n[1, h], ell2[h])
        keys.append((tuple(ell1), tuple(ell2)))
        logw.append(lw)

    logw = np.asarray(logw)
    logw -= logw.max()
    probs = np.exp(logw)
    probs /= probs.sum()
    return dict(zip(keys, probs))

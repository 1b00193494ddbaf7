"""Credit-bureau network scenario with rule-based attackers.

Ten nodes, six binary features: the operating system (1 = Windows,
0 = Linux) and the presence of the SMTP, NetBIOS, HTTP, SQL, and Samba
services. Mail servers are cheap targets, database servers expensive ones.
Switching the observed operating system costs 5, SQL, Samba, and HTTP cost
2 each, SMTP and NetBIOS cost 1, and the deception budget is 10. Two hard
compatibility rules hold on every node: Samba is never shown on Windows,
and NetBIOS is never shown without Windows.

Attackers are requirement rules. The APT profile wants Linux, SMTP, and
SQL; the botnet profile wants Windows and NetBIOS. Attacks randomize
uniformly over the nodes satisfying the most requirements, so expected
losses are means of exact tenths and the whole analysis is done in rational
arithmetic. Floats appear only at the instance boundary.

The optimal plan search enumerates, for every node, the cheapest observable
row at each achievable requirement count (rows achieving the same count are
interchangeable to the attacker, so the cheapest representative dominates),
then scans all count assignments within budget. A classical-score
approximation of the rule attacker is also provided: a large weight on each
requirement feature, signed by the required value, reproduces the argmax
sets in the softmax limit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core import (FdpInstance, FeatureConfig, LinearConstraint,
                    ValidationError, deception_cost)
from ..models import Classical, RequirementRule
from ..planning import plan_milp_bs

__all__ = ["FEATURES", "PROFILES", "CaseStudyReport", "build_instance",
           "attacker_rule", "approx_weights", "published_plan",
           "rule_outcome", "optimal_plan", "run_case_study"]

FEATURES = ("os", "smtp", "netbios", "http", "sql", "samba")
_OS, _SMTP, _NETBIOS, _HTTP, _SQL, _SAMBA = range(6)

# node id -> (type, observed services, loss in tenths)
_NODES = (
    ("mail server", (_OS, _SMTP, _NETBIOS), 1),
    ("mail server", (_OS, _SMTP, _NETBIOS), 1),
    ("web server", (_OS, _HTTP), 2),
    ("app server", (_OS, _SQL, _NETBIOS), 3),
    ("app server", (_OS, _SQL, _NETBIOS), 3),
    ("database server", (_SMTP, _SQL, _SAMBA), 4),
    ("database server", (_SMTP, _SQL, _SAMBA), 4),
    ("database server", (_SMTP, _SQL, _SAMBA), 4),
    ("database server", (_SMTP, _SQL, _SAMBA), 8),
    ("database server", (_SMTP, _SQL, _SAMBA), 8),
)

_COSTS = (5.0, 1.0, 1.0, 2.0, 2.0, 2.0)
_BUDGET = 10.0

PROFILES = {
    "apt": ((_OS, 0.0), (_SMTP, 1.0), (_SQL, 1.0)),
    "botnet": ((_OS, 1.0), (_NETBIOS, 1.0)),
}


def _actual_matrix() -> np.ndarray:
    x = np.zeros((len(_NODES), len(FEATURES)))
    for i, (_, feats, _) in enumerate(_NODES):
        x[i, list(feats)] = 1.0
    return x


def exact_losses() -> tuple[Fraction, ...]:
    return tuple(Fraction(t, 10) for _, _, t in _NODES)


def build_instance() -> FdpInstance:
    n, m = len(_NODES), len(FEATURES)
    constraints = []
    for i in range(n):
        constraints.append(LinearConstraint(
            target=i, terms=((_OS, 1.0), (_SAMBA, 1.0)),
            relation="leq", rhs=1.0))
        constraints.append(LinearConstraint(
            target=i, terms=((_OS, -1.0), (_NETBIOS, 1.0)),
            relation="leq", rhs=0.0))
    return FdpInstance(
        n=n, m=m, kinds=("binary",) * m,
        actual=_actual_matrix(),
        losses=np.array([float(u) for u in exact_losses()]),
        radii=np.ones((n, m)),
        costs=np.tile(np.array(_COSTS), (n, 1)),
        budget=_BUDGET,
        linear_constraints=tuple(constraints))


def attacker_rule(profile: str) -> RequirementRule:
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r}")
    return RequirementRule(requirements=PROFILES[profile])


def approx_weights(profile: str, weight: float = 10.0) -> Classical:
    """Classical stand-in for a requirement rule.

    Weight +w on features required present, -w on features required absent,
    0 elsewhere gives score exp(w * satisfied + const), so for large w the
    softmax concentrates on the max-satisfaction nodes, matching the rule.
    """
    w = np.zeros(len(FEATURES))
    for k, v in PROFILES[profile]:
        w[k] = weight if v == 1.0 else -weight
    return Classical(weights=w)


def published_plan(profile: str) -> FeatureConfig:
    """The deception plan reported for each attacker profile.

    APT: node 1 shows Linux with SQL on and NetBIOS off, nodes 8 and 9 hide
    SMTP. Botnet: nodes 3 and 4 hide NetBIOS.
    """
    x = _actual_matrix()
    if profile == "apt":
        x[1, _OS] = 0.0
        x[1, _SQL] = 1.0
        x[1, _NETBIOS] = 0.0
        x[8, _SMTP] = 0.0
        x[9, _SMTP] = 0.0
    elif profile == "botnet":
        x[3, _NETBIOS] = 0.0
        x[4, _NETBIOS] = 0.0
    else:
        raise ValidationError(f"unknown profile {profile!r}")
    return FeatureConfig(values=x)


def rule_outcome(profile: str, config: FeatureConfig
                 ) -> tuple[tuple[int, ...], Fraction]:
    """Attacked-node set and exact expected loss under the rule attacker."""
    rule = attacker_rule(profile)
    counts = rule.counts(config.values).astype(int)
    top = counts == counts.max()
    support = tuple(int(i) for i in np.flatnonzero(top))
    losses = exact_losses()
    loss = sum((losses[i] for i in support), Fraction(0)) / len(support)
    return support, loss


@dataclass(frozen=True)
class _NodeOption:
    count: int
    cost: int
    row: tuple


def _node_options(profile: str) -> list[list[_NodeOption]]:
    """Cheapest observable row per node and requirement count."""
    reqs = PROFILES[profile]
    actual = _actual_matrix()
    out = []
    for i in range(len(_NODES)):
        best: dict[int, _NodeOption] = {}
        for bits in itertools.product((0.0, 1.0), repeat=len(FEATURES)):
            row = np.array(bits)
            if row[_OS] + row[_SAMBA] > 1.0:
                continue
            if row[_NETBIOS] > row[_OS]:
                continue
            count = sum(1 for k, v in reqs if row[k] == v)
            cost = int(np.abs(row - actual[i]) @ np.array(_COSTS))
            opt = best.get(count)
            if opt is None or cost < opt.cost:
                best[count] = _NodeOption(count, cost, bits)
        out.append([best[c] for c in sorted(best)])
    return out


def optimal_plan(profile: str) -> tuple[FeatureConfig, tuple[int, ...],
                                        Fraction, int]:
    """Exact minimum-loss plan against the rule attacker.

    Scans every assignment of requirement counts to nodes (cheapest
    realization each) that fits the budget. Returns the plan, its attacked
    set, the exact expected loss, and the plan cost.
    """
    options = _node_options(profile)
    n = len(options)
    sizes = [len(o) for o in options]
    combos = int(np.prod(sizes))
    # mixed-radix enumeration, vectorized: column i repeats each of node i's
    # options over the product of the later nodes' option counts
    counts = np.empty((combos, n), dtype=np.int8)
    costs = np.zeros(combos)
    after = combos
    before = 1
    for i, opts in enumerate(options):
        after //= sizes[i]
        col_counts = np.repeat([o.count for o in opts], after)
        col_costs = np.repeat([o.cost for o in opts], after)
        counts[:, i] = np.tile(col_counts, before)
        costs += np.tile(col_costs, before)
        before *= sizes[i]
    affordable = costs <= _BUDGET
    if not affordable.any():
        raise ValidationError("budget admits no plan, not even doing nothing")
    top = counts == counts.max(axis=1, keepdims=True)
    u = np.array([float(x) for x in exact_losses()])
    loss = (top @ u) / top.sum(axis=1)
    loss[~affordable] = np.inf
    pick = int(np.argmin(loss))
    levels = counts[pick]
    chosen = [options[i][int(np.searchsorted(
        [o.count for o in options[i]], levels[i]))] for i in range(n)]
    config = FeatureConfig(values=np.array([c.row for c in chosen]))
    support, exact = rule_outcome(profile, config)
    return config, support, exact, int(sum(c.cost for c in chosen))


@dataclass(frozen=True)
class CaseStudyReport:
    profile: str
    before_support: tuple
    before_loss: Fraction
    published_changes: tuple
    published_cost: float
    published_support: tuple
    published_loss: Fraction
    best_support: tuple
    best_loss: Fraction
    best_cost: int
    best_config: FeatureConfig
    approx_loss: Fraction

    def to_text(self) -> str:
        lines = [
            f"profile: {self.profile}",
            f"before: attacked {list(self.before_support)}, "
            f"loss {self.before_loss} = {float(self.before_loss)}",
            "published plan:",
        ]
        for node, feat, old, new in self.published_changes:
            lines.append(f"  node {node}: {feat} {old:g} -> {new:g}")
        lines += [
            f"published: cost {self.published_cost:g}, "
            f"attacked {list(self.published_support)}, "
            f"loss {self.published_loss} = {float(self.published_loss)}",
            f"optimal search: cost {self.best_cost}, "
            f"attacked {list(self.best_support)}, "
            f"loss {self.best_loss} = {float(self.best_loss)}",
            f"classical approximation: loss {float(self.approx_loss)}",
        ]
        return "\n".join(lines)


def run_case_study(profile: str, *, approx_weight: float = 10.0,
                   approx_eps: float = 0.1) -> CaseStudyReport:
    """Full before/after analysis for one attacker profile."""
    instance = build_instance()
    actual_cfg = FeatureConfig(values=instance.actual)
    before_support, before_loss = rule_outcome(profile, actual_cfg)

    pub = published_plan(profile)
    changes = []
    diff = pub.values != instance.actual
    for i, k in zip(*np.nonzero(diff)):
        changes.append((int(i), FEATURES[k], float(instance.actual[i, k]),
                        float(pub.values[i, k])))
    pub_cost = deception_cost(instance, pub)
    pub_support, pub_loss = rule_outcome(profile, pub)

    best_config, best_support, best_loss, best_cost = optimal_plan(profile)

    approx = plan_milp_bs(instance, approx_weights(profile, approx_weight),
                          eps=approx_eps)
    _, approx_loss = rule_outcome(profile, approx.config)

    return CaseStudyReport(
        profile=profile,
        before_support=before_support, before_loss=before_loss,
        published_changes=tuple(changes), published_cost=pub_cost,
        published_support=pub_support, published_loss=pub_loss,
        best_support=best_support, best_loss=best_loss, best_cost=best_cost,
        best_config=best_config, approx_loss=approx_loss)

"""Hardware-aware architecture search over UIB networks.

Candidates are a fixed stem (3x3 s2 conv + FusedIB s2), a list of searchable
UIB stages and the MobileNetV3 head. A genome is, per stage,
``(depth, filters, ((start_dw, mid_dw, expansion), ...))`` with one entry per
active block, so every genome maps to exactly one network.

Reward for a candidate with quality ``q`` and cost ``c``::

    q + beta * |c / cost_target - 1|

The optimiser is a small regularised evolution (population 32, tournament 4,
one-gene mutation). When the budget covers the whole space it enumerates
instead. All randomness flows from one seeded ``random.Random``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .cost import CostReport, network_cost
from .ir import Conv2D, DWConv, FusedIB, NetworkSpec, UIB
from .latency import bundled_latencies
from .metrics import geo_mean
from .roofline import HardwareTarget, predict_latency
from .zoo import REGISTRY, canonical_name, mobilenet_v3_head

DW_CHOICES = (None, 3, 5)
COARSE_BLOCK = (None, 3, 4)  # IB with a 3x3 mid DW, expansion 4

BlockGene = Tuple[Optional[int], Optional[int], float]
StageGene = Tuple[int, int, Tuple[BlockGene, ...]]
Genome = Tuple[StageGene, ...]


class SearchError(ValueError):
    pass


class EmptySpace(SearchError):
    pass


class UnknownModel(KeyError):
    pass


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- space


@dataclass(frozen=True)
class StageSpace:
    depths: Tuple[int, ...]
    filters: Tuple[int, ...]
    stride: int = 2
    start_dw: Tuple[Optional[int], ...] = DW_CHOICES
    mid_dw: Tuple[Optional[int], ...] = DW_CHOICES
    expansions: Tuple[float, ...] = (4,)

    def __post_init__(self):
        for name in ("depths", "filters", "start_dw", "mid_dw", "expansions"):
            if not getattr(self, name):
                raise EmptySpace(f"stage has no {name} choices")
        if min(self.depths) < 1:
            raise SearchError("depths must be >= 1")
        if min(self.filters) < 1 or min(self.expansions) <= 0:
            raise SearchError("filters and expansions must be positive")


@dataclass(frozen=True)
class SearchSpace:
    stages: Tuple[StageSpace, ...]
    input_res: int = 224
    stem_c: int = 32
    fused_expanded: int = 32
    fused_out: int = 32
    num_classes: int = 1000

    def __post_init__(self):
        if not self.stages:
            raise EmptySpace("search space has no stages")


@dataclass(frozen=True)
class _Domain:
    """Per-stage gene choices actually searched in one phase."""

    depths: Tuple[int, ...]
    filters: Tuple[int, ...]
    start: Tuple[Optional[int], ...]
    mid: Tuple[Optional[int], ...]
    exps: Tuple[float, ...]
    # per-block (start, mid) pinned by an earlier phase; requires a single depth
    pinned_dw: Optional[Tuple[Tuple[Optional[int], Optional[int]], ...]] = None

    def block_options(self, i: int) -> Tuple[Tuple, Tuple, Tuple]:
        if self.pinned_dw is not None:
            s, m = self.pinned_dw[i]
            return (s,), (m,), self.exps
        return self.start, self.mid, self.exps

    def size(self) -> int:
        total = 0
        for d in self.depths:
            per = 1
            for i in range(d):
                s, m, e = self.block_options(i)
                per *= len(s) * len(m) * len(e)
            total += len(self.filters) * per
        return total


def space_size(domains: Sequence[_Domain]) -> int:
    return math.prod(d.size() for d in domains)


def full_domains(space: SearchSpace) -> List[_Domain]:
    return [_Domain(s.depths, s.filters, s.start_dw, s.mid_dw, s.expansions) for s in space.stages]


def coarse_domains(space: SearchSpace) -> List[_Domain]:
    s0, m0, e0 = COARSE_BLOCK
    return [_Domain(s.depths, s.filters, (s0,), (m0,), (e0,)) for s in space.stages]


def fine_domains(space: SearchSpace, frozen: Genome) -> List[_Domain]:
    return [
        _Domain((d,), (f,), s.start_dw, s.mid_dw, (COARSE_BLOCK[2],))
        for s, (d, f, _) in zip(space.stages, frozen)
    ]


def expansion_domains(space: SearchSpace, frozen: Genome) -> List[_Domain]:
    return [
        _Domain((d,), (f,), (), (), s.expansions, pinned_dw=tuple((b[0], b[1]) for b in blocks))
        for s, (d, f, blocks) in zip(space.stages, frozen)
    ]


def build_network(space: SearchSpace, genome: Genome, name: str = "candidate") -> NetworkSpec:
    blocks = [Conv2D(3, 2, space.stem_c), FusedIB(3, 2, space.fused_expanded, space.fused_out)]
    c_in = space.fused_out
    for stage, (depth, filters, bgenes) in zip(space.stages, genome):
        for i, (start, mid, exp) in enumerate(bgenes):
            stride = stage.stride if i == 0 else 1
            blocks.append(UIB(start, mid, max(1, int(round(c_in * exp))), filters, stride))
            c_in = filters
    blocks += mobilenet_v3_head(space.num_classes)
    return NetworkSpec(name, space.input_res, tuple(blocks))


def genome_hash(genome: Genome) -> str:
    return hashlib.sha1(json.dumps(genome).encode()).hexdigest()[:12]


# ---------------------------------------------------------------- enumeration / sampling


def _stage_options(dom: _Domain) -> Iterator[StageGene]:
    for d in dom.depths:
        per_block = [list(itertools.product(*dom.block_options(i))) for i in range(d)]
        for f in dom.filters:
            for blocks in itertools.product(*per_block):
                yield (d, f, tuple(blocks))


def enumerate_space(domains: Sequence[_Domain]) -> Iterator[Genome]:
    return itertools.product(*[list(_stage_options(d)) for d in domains])


def _random_block(dom: _Domain, i: int, rng: random.Random) -> BlockGene:
    s, m, e = dom.block_options(i)
    return (rng.choice(s), rng.choice(m), rng.choice(e))


def random_genome(domains: Sequence[_Domain], rng: random.Random) -> Genome:
    out = []
    for dom in domains:
        d = rng.choice(dom.depths)
        f = rng.choice(dom.filters)
        out.append((d, f, tuple(_random_block(dom, i, rng) for i in range(d))))
    return tuple(out)


def _mutable_genes(domains: Sequence[_Domain], genome: Genome) -> List[Tuple]:
    genes = []
    for si, (dom, (d, _, _)) in enumerate(zip(domains, genome)):
        if len(dom.depths) > 1:
            genes.append(("depth", si))
        if len(dom.filters) > 1:
            genes.append(("filters", si))
        for bi in range(d):
            for slot, opts in enumerate(dom.block_options(bi)):
                if len(opts) > 1:
                    genes.append(("block", si, bi, slot))
    return genes


def _resample(options: Sequence, current, rng: random.Random):
    return rng.choice([o for o in options if o != current])


def mutate(domains: Sequence[_Domain], genome: Genome, rng: random.Random) -> Genome:
    """Resample exactly one searchable gene to a different value."""
    genes = _mutable_genes(domains, genome)
    if not genes:
        return genome
    gene = rng.choice(genes)
    stages = list(genome)
    si = gene[1]
    dom = domains[si]
    d, f, blocks = stages[si]
    if gene[0] == "depth":
        nd = _resample(dom.depths, d, rng)
        blocks = blocks[:nd] + tuple(_random_block(dom, i, rng) for i in range(d, nd))
        stages[si] = (nd, f, blocks)
    elif gene[0] == "filters":
        stages[si] = (d, _resample(dom.filters, f, rng), blocks)
    else:
        _, _, bi, slot = gene
        blk = list(blocks[bi])
        blk[slot] = _resample(dom.block_options(bi)[slot], blk[slot], rng)
        stages[si] = (d, f, blocks[:bi] + (tuple(blk),) + blocks[bi + 1:])
    return tuple(stages)


# ---------------------------------------------------------------- reward


@dataclass(frozen=True)
class CostFn:
    """Scalar cost of a network: ``macs``, ``roofline`` (one target) or ``geo_mean`` (several targets)."""

    kind: str = "macs"
    targets: Tuple[HardwareTarget, ...] = ()

    def __post_init__(self):
        if self.kind not in ("macs", "roofline", "geo_mean"):
            raise ConfigError(f"unknown cost function {self.kind!r}")
        if self.kind == "roofline" and len(self.targets) != 1:
            raise ConfigError("roofline cost needs exactly one target")
        if self.kind == "geo_mean" and not self.targets:
            raise ConfigError("geo_mean cost needs at least one target")

    def __call__(self, report: CostReport) -> float:
        if self.kind == "macs":
            return float(report.total_macs)
        lats = [predict_latency(report, t).total for t in self.targets]
        return lats[0] if self.kind == "roofline" else geo_mean(lats)


@dataclass(frozen=True)
class RewardConfig:
    cost_target: float
    beta: float = -0.5
    cost_fn: CostFn = CostFn()

    def __post_init__(self):
        if not self.cost_target > 0:
            raise ConfigError(f"cost_target must be > 0, got {self.cost_target}")
        if not self.beta < 0:
            raise ConfigError(f"beta must be < 0 so that missing the cost target is penalised, got {self.beta}")


def reward(quality: float, cost: float, cfg: RewardConfig) -> float:
    return quality + cfg.beta * abs(cost / cfg.cost_target - 1.0)


# ---------------------------------------------------------------- quality oracles


def _dw_layers(net: NetworkSpec) -> int:
    n = 0
    for b in net.blocks:
        if isinstance(b, UIB):
            n += (b.start_dw is not None) + (b.mid_dw is not None)
        elif isinstance(b, DWConv):
            n += 1
    return n


@dataclass(frozen=True)
class SyntheticCapacity:
    """Stand-in accuracy that grows with parameters, MACs and depthwise layers.

    ``alpha*log10(params) + gamma*log10(macs) + delta*n_dw/(n_dw + kappa)``,
    clipped to [0, 1]. Adding a shape-preserving block never lowers it.
    """

    alpha: float = 0.05
    gamma: float = 0.05
    delta: float = 0.02
    kappa: float = 8.0

    def __call__(self, net: NetworkSpec, report: CostReport) -> float:
        n_dw = _dw_layers(net)
        q = (
            self.alpha * math.log10(max(report.total_params, 1))
            + self.gamma * math.log10(max(report.total_macs, 1))
            + self.delta * n_dw / (n_dw + self.kappa)
        )
        return min(1.0, max(0.0, q))


class TableLookup:
    """Top-1 accuracy of a known model, looked up by name."""

    def __init__(self, table: Optional[Dict[str, float]] = None):
        if table is None:
            table = {}
            for key, build in REGISTRY.items():
                net = build()
                if net.top1_accuracy is not None:
                    table[key] = net.top1_accuracy
            table.update(bundled_latencies().accuracy)
        self.table = {canonical_name(k): v for k, v in table.items()}

    def lookup(self, name: str) -> float:
        try:
            return self.table[canonical_name(name)]
        except KeyError:
            raise UnknownModel(name) from None

    def __call__(self, net: NetworkSpec, report: CostReport) -> float:
        return self.lookup(net.name)


def table_lookup(name: str) -> float:
    return TableLookup().lookup(name)


# ---------------------------------------------------------------- search loop


@dataclass
class Candidate:
    genome: Genome
    net: NetworkSpec
    report: CostReport
    quality: float
    cost: float
    reward: float

    @property
    def id(self) -> str:
        return genome_hash(self.genome)


@dataclass(frozen=True)
class EvalRecord:
    stage: str
    index: int
    candidate: str
    quality: float
    cost: float
    reward: float
    generation: int


@dataclass
class SearchResult:
    best: Candidate
    log: List[EvalRecord] = field(default_factory=list)
    phases: Dict[str, Candidate] = field(default_factory=dict)

    @property
    def evaluations(self) -> int:
        return len(self.log)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "index", "candidate", "quality", "cost", "reward", "generation"])
        for r in self.log:
            w.writerow([r.stage, r.index, r.candidate, f"{r.quality:.6g}", f"{r.cost:.6g}", f"{r.reward:.6g}", r.generation])
        return buf.getvalue()


Oracle = Callable[[NetworkSpec, CostReport], float]


class _Evaluator:
    def __init__(self, space: SearchSpace, oracle: Oracle, cfg: RewardConfig, log: List[EvalRecord]):
        self.space, self.oracle, self.cfg, self.log = space, oracle, cfg, log

    def __call__(self, genome: Genome, stage: str, index: int, generation: int) -> Candidate:
        net = build_network(self.space, genome, name=f"cand-{genome_hash(genome)}")
        rep = network_cost(net)
        q = self.oracle(net, rep)
        c = self.cfg.cost_fn(rep)
        cand = Candidate(genome, net, rep, q, c, reward(q, c, self.cfg))
        self.log.append(EvalRecord(stage, index, cand.id, q, c, cand.reward, generation))
        return cand


def _search(
    domains: Sequence[_Domain],
    evaluate: _Evaluator,
    budget: int,
    rng: random.Random,
    stage: str,
    population_size: int = 32,
    tournament_size: int = 4,
) -> Candidate:
    if budget < 1:
        raise SearchError(f"budget must be >= 1, got {budget}")
    size = space_size(domains)
    if size == 0:
        raise EmptySpace("search space is empty")

    seen: Dict[Genome, Candidate] = {}
    best: Optional[Candidate] = None

    def run(g: Genome) -> Candidate:
        nonlocal best
        n = len(seen)
        cand = evaluate(g, stage, n, n // population_size)
        seen[g] = cand
        if best is None or cand.reward > best.reward:
            best = cand
        return cand

    if budget >= size:
        for g in enumerate_space(domains):
            run(g)
        return best

    def fresh(proposal: Callable[[], Genome], tries: int) -> Genome:
        for _ in range(tries):
            g = proposal()
            if g not in seen:
                return g
        # random-search fallback when mutation keeps revisiting known genomes
        for _ in range(1000):
            g = random_genome(domains, rng)
            if g not in seen:
                return g
        return next(g for g in enumerate_space(domains) if g not in seen)

    population: deque = deque()
    while len(seen) < budget and len(population) < population_size:
        population.append(run(fresh(lambda: random_genome(domains, rng), 1)))
    while len(seen) < budget:
        contenders = rng.sample(list(population), min(tournament_size, len(population)))
        parent = max(contenders, key=lambda c: c.reward)
        child = run(fresh(lambda: mutate(domains, parent.genome, rng), 20))
        population.append(child)
        population.popleft()
    return best


def one_stage_search(
    space: SearchSpace,
    oracle: Oracle,
    cfg: RewardConfig,
    budget: int,
    seed: int = 0,
    population_size: int = 32,
    tournament_size: int = 4,
) -> SearchResult:
    """Search depth, filters and every block's DW choices jointly."""
    rng = random.Random(seed)
    log: List[EvalRecord] = []
    ev = _Evaluator(space, oracle, cfg, log)
    best = _search(full_domains(space), ev, budget, rng, "one-stage", population_size, tournament_size)
    return SearchResult(best, log, {"one-stage": best})


def coarse_search(space, oracle, cfg, budget, rng, log, population_size=32, tournament_size=4) -> Candidate:
    """Depth and filters only; every block is an IB with a 3x3 DW and expansion 4."""
    return _search(coarse_domains(space), _Evaluator(space, oracle, cfg, log), budget, rng, "coarse",
                   population_size, tournament_size)


def fine_search(space, frozen: Genome, oracle, cfg, budget, rng, log, population_size=32, tournament_size=4) -> Candidate:
    """DW choices of each block with depth and filters frozen from `frozen`."""
    return _search(fine_domains(space, frozen), _Evaluator(space, oracle, cfg, log), budget, rng, "fine",
                   population_size, tournament_size)


def two_stage_search(
    space: SearchSpace,
    oracle: Oracle,
    cfg: RewardConfig,
    coarse_budget: int,
    fine_budget: int,
    seed: int = 0,
    expansion_budget: int = 0,
    population_size: int = 32,
    tournament_size: int = 4,
) -> SearchResult:
    """Coarse search, then fine search seeded with the coarse winner.

    With ``expansion_budget > 0`` a third phase searches per-block expansion
    ratios with the fine winner's DW choices pinned.
    """
    rng = random.Random(seed)
    log: List[EvalRecord] = []
    coarse = coarse_search(space, oracle, cfg, coarse_budget, rng, log, population_size, tournament_size)
    fine = fine_search(space, coarse.genome, oracle, cfg, fine_budget, rng, log, population_size, tournament_size)
    phases = {"coarse": coarse, "fine": fine}
    best = fine
    if expansion_budget > 0:
        ev = _Evaluator(space, oracle, cfg, log)
        exp = _search(expansion_domains(space, fine.genome), ev, expansion_budget, rng, "expansion",
                      population_size, tournament_size)
        phases["expansion"] = exp
        best = exp if exp.reward > fine.reward else fine
    return SearchResult(best, log, phases)


# ---------------------------------------------------------------- config


@dataclass
class SearchConfig:
    space: SearchSpace
    reward: RewardConfig
    oracle: Oracle
    seed: int = 0
    mode: str = "two-stage"
    coarse_budget: int = 2000
    fine_budget: int = 2000
    expansion_budget: int = 0
    budget: int = 4000  # one-stage
    population_size: int = 32
    tournament_size: int = 4

    def run(self) -> SearchResult:
        if self.mode == "one-stage":
            return one_stage_search(self.space, self.oracle, self.reward, self.budget, self.seed,
                                    self.population_size, self.tournament_size)
        if self.mode == "two-stage":
            return two_stage_search(self.space, self.oracle, self.reward, self.coarse_budget, self.fine_budget,
                                    self.seed, self.expansion_budget, self.population_size, self.tournament_size)
        raise ConfigError(f"unknown search mode {self.mode!r}")


def _dw_list(values) -> Tuple[Optional[int], ...]:
    return tuple(None if v in (None, 0, "none", "-") else int(v) for v in values)


def _stage_from_dict(d: dict, defaults: dict) -> StageSpace:
    return StageSpace(
        depths=tuple(int(x) for x in d["depths"]),
        filters=tuple(int(x) for x in d["filters"]),
        stride=int(d.get("stride", 2)),
        start_dw=_dw_list(d.get("start_dw", defaults.get("start_dw", DW_CHOICES))),
        mid_dw=_dw_list(d.get("mid_dw", defaults.get("mid_dw", DW_CHOICES))),
        expansions=tuple(d.get("expansions", defaults.get("expansions", (4,)))),
    )


def _target_from_dict(d: dict) -> HardwareTarget:
    return HardwareTarget(d.get("name", "target"), float(d["ridge_point"]), float(d.get("peak_macs_per_sec", 1.0)))


def config_from_dict(doc: dict) -> SearchConfig:
    try:
        sp = doc["space"]
        space = SearchSpace(
            stages=tuple(_stage_from_dict(s, sp) for s in sp["stages"]),
            input_res=int(sp.get("input_res", 224)),
            stem_c=int(sp.get("stem_c", 32)),
            fused_expanded=int(sp.get("fused_expanded", sp.get("stem_c", 32))),
            fused_out=int(sp.get("fused_out", sp.get("stem_c", 32))),
            num_classes=int(sp.get("num_classes", 1000)),
        )
        rw = doc["reward"]
        cf = rw.get("cost_fn", "macs")
        if isinstance(cf, str):
            cf = {"kind": cf}
        cost_fn = CostFn(cf["kind"], tuple(_target_from_dict(t) for t in cf.get("targets", ())))
        rcfg = RewardConfig(float(rw["cost_target"]), float(rw.get("beta", -0.5)), cost_fn)
        oc = dict(doc.get("oracle", {"kind": "synthetic"}))
        kind = oc.pop("kind", "synthetic")
        if kind == "synthetic":
            oracle: Oracle = SyntheticCapacity(**{k: float(v) for k, v in oc.items()})
        elif kind == "table":
            oracle = TableLookup(oc.get("table"))
        else:
            raise ConfigError(f"unknown oracle {kind!r}")
        b = doc.get("budgets", {})
        return SearchConfig(
            space=space,
            reward=rcfg,
            oracle=oracle,
            seed=int(doc.get("seed", 0)),
            mode=str(doc.get("mode", "two-stage")),
            coarse_budget=int(b.get("coarse", 2000)),
            fine_budget=int(b.get("fine", 2000)),
            expansion_budget=int(b.get("expansion", 0)),
            budget=int(b.get("one_stage", 4000)),
            population_size=int(doc.get("population_size", 32)),
            tournament_size=int(doc.get("tournament_size", 4)),
        )
    except KeyError as e:
        raise ConfigError(f"missing config field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def load_search_config(path: Union[str, Path]) -> SearchConfig:
    """Read a search config from TOML (``.toml``) or JSON."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from None
    return config_from_dict(doc)


def with_seed(cfg: SearchConfig, seed: int) -> SearchConfig:
    return replace(cfg, seed=seed)

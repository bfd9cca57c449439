"""Discrete-event session campaign engine.

Runs N sessions between a physical entity and its twin with a
configurable fraction of adversarial sessions, injects synthetic
per-message latency on a virtual clock (reported timings are virtual,
never wall time), and aggregates acceptance, false-acceptance, latency,
and operation-count/energy metrics into a report.

Determinism: every source of randomness is derived from the campaign
seed and the session index, so identical configs produce byte-identical
reports, serial or parallel.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .adversary import (
    AdversaryKind,
    AttackContext,
    attack_impersonate_twin,
    attack_kci,
    attack_mitm_tamper,
    attack_replay,
)
from .groups import Group, get_group
from .identity import EntityKeys, TwinKeyPair, derive_entity_keys, provision_identity, twin_keygen
from .protocol import (
    Challenge,
    EntitySession,
    IdentityProof,
    OpCounts,
    Phase,
    Response,
    Transcript,
    TwinSession,
    Verdict,
    run_interactive_session,
)
from .registration import BindingRecord, Registry

HONEST = "honest"

KIND_ORDER = (
    AdversaryKind.REPLAY.value,
    AdversaryKind.IMPERSONATE_TWIN.value,
    AdversaryKind.MITM_TAMPER.value,
    AdversaryKind.KCI_IMPERSONATE_PHYSICAL.value,
)

DEFAULT_ENERGY_WEIGHTS = {"group_exp": 10.0, "group_mul": 1.0, "hash": 1.0}

_BINDING_TIME = 1_700_000_000  # fixed registration timestamp for campaigns
_WARMUP_SESSIONS = 3


class ConfigError(ValueError):
    """Invalid campaign configuration; names the offending field."""

    def __init__(self, field_name: str, detail: str):
        super().__init__(f"{field_name}: {detail}")
        self.field_name = field_name


class SimulationError(RuntimeError):
    """A session failed to reach a terminal state (implementation bug)."""


@dataclass
class CampaignConfig:
    sessions: int
    adv_ratio: float = 0.0
    adversary_mix: Dict[str, float] = field(
        default_factory=lambda: {kind: 1.0 for kind in KIND_ORDER}
    )
    latency_range_ms: Tuple[float, float] = (10.0, 20.0)
    group_id: str = "p256"
    rng_seed: int = 0
    energy_weights: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ENERGY_WEIGHTS))

    def validate(self) -> None:
        if not isinstance(self.sessions, int) or self.sessions < 1:
            raise ConfigError("sessions", "must be an integer >= 1")
        if not 0.0 <= self.adv_ratio <= 1.0:
            raise ConfigError("adv_ratio", "must lie in [0, 1]")
        unknown = set(self.adversary_mix) - set(KIND_ORDER)
        if unknown:
            raise ConfigError("adversary_mix", f"unknown adversary kinds: {sorted(unknown)}")
        if any(w < 0 for w in self.adversary_mix.values()):
            raise ConfigError("adversary_mix", "weights must be nonnegative")
        if self.adv_ratio > 0 and not any(self.adversary_mix.values()):
            raise ConfigError("adversary_mix", "needs a positive weight when adv_ratio > 0")
        low, high = self.latency_range_ms
        if low < 0 or high < low:
            raise ConfigError("latency_range_ms", "requires 0 <= low <= high")
        try:
            get_group(self.group_id)
        except Exception:
            raise ConfigError("group_id", f"unknown group: {self.group_id!r}") from None
        if set(self.energy_weights) != set(DEFAULT_ENERGY_WEIGHTS):
            raise ConfigError(
                "energy_weights", f"must provide exactly {sorted(DEFAULT_ENERGY_WEIGHTS)}"
            )
        if any(w < 0 for w in self.energy_weights.values()):
            raise ConfigError("energy_weights", "weights must be nonnegative")
        if not isinstance(self.rng_seed, int):
            raise ConfigError("rng_seed", "must be an integer")

    def to_dict(self) -> dict:
        return {
            "sessions": self.sessions,
            "adv_ratio": self.adv_ratio,
            "adversary_mix": {k: self.adversary_mix.get(k, 0.0) for k in KIND_ORDER},
            "latency_range_ms": list(self.latency_range_ms),
            "group_id": self.group_id,
            "rng_seed": self.rng_seed,
            "energy_weights": {k: self.energy_weights[k] for k in sorted(self.energy_weights)},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CampaignConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config", "must be a JSON object")
        known = {
            "sessions",
            "adv_ratio",
            "adversary_mix",
            "latency_range_ms",
            "group_id",
            "rng_seed",
            "energy_weights",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        if "sessions" not in obj:
            raise ConfigError("sessions", "is required")
        kwargs = {"sessions": obj["sessions"]}
        if "adv_ratio" in obj:
            kwargs["adv_ratio"] = obj["adv_ratio"]
        if "adversary_mix" in obj:
            if not isinstance(obj["adversary_mix"], dict):
                raise ConfigError("adversary_mix", "must be an object of kind -> weight")
            kwargs["adversary_mix"] = {k: float(v) for k, v in obj["adversary_mix"].items()}
        if "latency_range_ms" in obj:
            rng_ms = obj["latency_range_ms"]
            if isinstance(rng_ms, (int, float)):
                rng_ms = [rng_ms, rng_ms]
            if not (isinstance(rng_ms, (list, tuple)) and len(rng_ms) == 2):
                raise ConfigError("latency_range_ms", "must be [low, high] or a single number")
            kwargs["latency_range_ms"] = (float(rng_ms[0]), float(rng_ms[1]))
        if "group_id" in obj:
            kwargs["group_id"] = obj["group_id"]
        if "rng_seed" in obj:
            kwargs["rng_seed"] = obj["rng_seed"]
        if "energy_weights" in obj:
            if not isinstance(obj["energy_weights"], dict):
                raise ConfigError("energy_weights", "must be an object of op -> weight")
            kwargs["energy_weights"] = {k: float(v) for k, v in obj["energy_weights"].items()}
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


@dataclass
class SessionMetrics:
    index: int
    kind: str
    accepted: bool
    auth_latency_ms: float
    key_establish_ms: Optional[float]
    ops_p: OpCounts
    ops_d: OpCounts
    key_agreement: Optional[bool] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "accepted": self.accepted,
            "auth_latency_ms": self.auth_latency_ms,
            "key_establish_ms": self.key_establish_ms,
            "key_agreement": self.key_agreement,
            "detail": self.detail,
            "ops": {"p": self.ops_p.as_dict(), "d": self.ops_d.as_dict()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SessionMetrics":
        return cls(
            index=obj["index"],
            kind=obj["kind"],
            accepted=obj["accepted"],
            auth_latency_ms=obj["auth_latency_ms"],
            key_establish_ms=obj["key_establish_ms"],
            ops_p=OpCounts(**obj["ops"]["p"]),
            ops_d=OpCounts(**obj["ops"]["d"]),
            key_agreement=obj.get("key_agreement"),
            detail=obj.get("detail", ""),
        )


@dataclass
class CampaignReport:
    config: CampaignConfig
    sessions: List[SessionMetrics]
    aggregates: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "sessions": [m.to_dict() for m in self.sessions],
            "aggregates": self.aggregates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "index",
                "kind",
                "accepted",
                "auth_latency_ms",
                "key_establish_ms",
                "p_group_exp",
                "p_group_mul",
                "p_hash",
                "d_group_exp",
                "d_group_mul",
                "d_hash",
            ]
        )
        for m in self.sessions:
            writer.writerow(
                [
                    m.index,
                    m.kind,
                    str(m.accepted).lower(),
                    repr(m.auth_latency_ms),
                    "" if m.key_establish_ms is None else repr(m.key_establish_ms),
                    m.ops_p.group_exp,
                    m.ops_p.group_mul,
                    m.ops_p.hash,
                    m.ops_d.group_exp,
                    m.ops_d.group_mul,
                    m.ops_d.hash,
                ]
            )
        return buf.getvalue()


# -- environment ------------------------------------------------------------


@dataclass
class CampaignEnv:
    """Keys, binding record, and frozen attack contexts for one campaign.

    Built once before the session loop; sessions never touch the
    registry again (the authority is initialization-only).
    """

    group: Group
    entity_keys: EntityKeys
    twin: TwinKeyPair
    record: BindingRecord
    replay_ctx: AttackContext
    public_ctx: AttackContext
    kci_ctx: AttackContext


def _spawn_rng(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


def build_env(config: CampaignConfig) -> CampaignEnv:
    group = get_group(config.group_id)
    setup_rng = _spawn_rng(config.rng_seed, "setup")
    identity = provision_identity(f"campaign-entity/{config.rng_seed}")
    entity_keys = derive_entity_keys(identity, group)
    twin = twin_keygen(group, setup_rng)
    registry = Registry(group)
    record = registry.register(entity_keys.pk_p, twin.pk_d, _BINDING_TIME)

    transcripts: List[Transcript] = []
    for i in range(_WARMUP_SESSIONS):
        rng = _spawn_rng(config.rng_seed, f"warmup/{i}")
        p = EntitySession(group, entity_keys, record, rng)
        d = TwinSession(group, twin, record, rng)
        transcripts.append(run_interactive_session(p, d))

    shared = dict(pk_p=entity_keys.pk_p, pk_d=twin.pk_d, zeta=record.zeta)
    return CampaignEnv(
        group=group,
        entity_keys=entity_keys,
        twin=twin,
        record=record,
        replay_ctx=AttackContext(recorded_transcripts=transcripts, **shared),
        public_ctx=AttackContext(recorded_transcripts=[], **shared),
        kci_ctx=AttackContext(recorded_transcripts=[], compromised_sk_d=twin.sk_d, **shared),
    )


# -- session execution --------------------------------------------------------


def allocate_kinds(
    sessions: int, adv_ratio: float, mix: Dict[str, float], rng: random.Random
) -> List[str]:
    """Deterministic session-kind assignment.

    Exactly ceil(sessions * adv_ratio) sessions are adversarial (exact
    arithmetic, so a 0.1 ratio of 5000 yields 500); kind counts follow
    the mix weights by largest remainder, and placement comes from one
    seeded shuffle.
    """
    n_adv = math.ceil(Fraction(str(adv_ratio)) * sessions) if adv_ratio else 0
    kinds = [HONEST] * sessions
    if n_adv == 0:
        return kinds
    weights = [(kind, mix.get(kind, 0.0)) for kind in KIND_ORDER]
    total = sum(w for _, w in weights)
    quotas = [(kind, Fraction(str(w)) * n_adv / Fraction(str(total))) for kind, w in weights]
    counts = {kind: math.floor(qt) for kind, qt in quotas}
    remainder = n_adv - sum(counts.values())
    by_fraction = sorted(quotas, key=lambda kv: (kv[1] - math.floor(kv[1])), reverse=True)
    for kind, _ in by_fraction[:remainder]:
        counts[kind] += 1
    adv_kinds: List[str] = []
    for kind in KIND_ORDER:
        adv_kinds.extend([kind] * counts[kind])
    rng.shuffle(adv_kinds)
    indices = list(range(sessions))
    rng.shuffle(indices)
    for idx, kind in zip(indices[:n_adv], adv_kinds):
        kinds[idx] = kind
    return kinds


def _latency_sum(rng: random.Random, low: float, high: float, messages: int) -> float:
    return sum(rng.uniform(low, high) for _ in range(messages))


def _run_honest(env: CampaignEnv, rng: random.Random, low: float, high: float) -> dict:
    p = EntitySession(env.group, env.entity_keys, env.record, rng)
    d = TwinSession(env.group, env.twin, env.record, rng)
    clock = 0.0

    msg = d.commit()
    clock += rng.uniform(low, high)
    replies = p.receive(msg)
    if len(replies) != 1 or not isinstance(replies[0], Challenge):
        raise SimulationError("honest session derailed at challenge")
    clock += rng.uniform(low, high)
    replies = d.receive(replies[0])
    if len(replies) != 1 or not isinstance(replies[0], Response):
        raise SimulationError("honest session derailed at response")
    clock += rng.uniform(low, high)
    replies = p.receive(replies[0])
    if len(replies) != 1 or not isinstance(replies[0], IdentityProof):
        raise SimulationError("honest session derailed at identity proof")
    clock += rng.uniform(low, high)
    replies = d.receive(replies[0])
    if len(replies) != 1 or not isinstance(replies[0], Verdict):
        raise SimulationError("honest session derailed at closing verdict")
    p.receive(replies[0])  # closing verdict: zero injected delay

    established = p.phase is Phase.KEY_ESTABLISHED and d.phase is Phase.KEY_ESTABLISHED
    agree = established and p.session_key.k_pd == d.session_key.k_pd
    return {
        "accepted": established and agree,
        "auth_latency_ms": clock,
        "key_establish_ms": clock if established else None,
        "ops_p": p.ops,
        "ops_d": d.ops,
        "key_agreement": agree,
        "detail": "",
    }


def _run_adversarial(
    env: CampaignEnv, kind: str, rng: random.Random, low: float, high: float
) -> dict:
    group = env.group
    if kind == AdversaryKind.REPLAY.value:
        target = EntitySession(group, env.entity_keys, env.record, rng)
        outcome = attack_replay(env.replay_ctx, target, rng)
        ops_p, ops_d = target.ops, outcome.ops
    elif kind == AdversaryKind.IMPERSONATE_TWIN.value:
        target = EntitySession(group, env.entity_keys, env.record, rng)
        outcome = attack_impersonate_twin(env.public_ctx, rng, target)
        ops_p, ops_d = target.ops, outcome.ops
    elif kind == AdversaryKind.KCI_IMPERSONATE_PHYSICAL.value:
        target = TwinSession(group, env.twin, env.record, rng)
        outcome = attack_kci(env.kci_ctx, rng, target)
        ops_p, ops_d = outcome.ops, target.ops
    elif kind == AdversaryKind.MITM_TAMPER.value:
        p = EntitySession(group, env.entity_keys, env.record, rng)
        d = TwinSession(group, env.twin, env.record, rng)
        outcome = attack_mitm_tamper(env.public_ctx, rng, p, d)
        ops_p, ops_d = p.ops, d.ops
    else:
        raise SimulationError(f"unknown session kind: {kind!r}")
    clock = _latency_sum(rng, low, high, outcome.messages)
    return {
        "accepted": outcome.verdict.accept,
        "auth_latency_ms": clock,
        "key_establish_ms": None,
        "ops_p": ops_p,
        "ops_d": ops_d,
        "key_agreement": None,
        "detail": outcome.detail,
    }


def run_session(
    config: CampaignConfig,
    kind: str,
    rng: random.Random,
    env: Optional[CampaignEnv] = None,
    index: int = 0,
) -> SessionMetrics:
    """Run one session of the given kind on the virtual clock."""
    if env is None:
        env = build_env(config)
    low, high = config.latency_range_ms
    if kind == HONEST:
        fields = _run_honest(env, rng, low, high)
    else:
        fields = _run_adversarial(env, kind, rng, low, high)
    return SessionMetrics(index=index, kind=kind, **fields)


def run_campaign(config: CampaignConfig, workers: int = 1) -> CampaignReport:
    """Run the full campaign; deterministic for a fixed config, and
    identical whether sessions execute serially or in parallel."""
    config.validate()
    env = build_env(config)
    kinds = allocate_kinds(
        config.sessions, config.adv_ratio, config.adversary_mix, _spawn_rng(config.rng_seed, "alloc")
    )

    def one(index: int) -> SessionMetrics:
        rng = _spawn_rng(config.rng_seed, f"session/{index}")
        try:
            return run_session(config, kinds[index], rng, env, index)
        except Exception as exc:
            raise SimulationError(f"session {index} ({kinds[index]}): {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            metrics = list(pool.map(one, range(config.sessions)))
    else:
        metrics = [one(i) for i in range(config.sessions)]

    aggregates = compute_aggregates(metrics, config.energy_weights)
    return CampaignReport(config=config, sessions=metrics, aggregates=aggregates)


# -- metrics -------------------------------------------------------------------


def energy_proxy(op_totals: Dict[str, int], weights: Dict[str, float]) -> float:
    """Weighted operation count standing in for energy cost."""
    if any(w < 0 for w in weights.values()):
        raise ValueError("energy weights must be nonnegative")
    return float(sum(op_totals.get(op, 0) * w for op, w in weights.items()))


def far(report: CampaignReport) -> Optional[float]:
    """False acceptance rate: accepted adversarial / attempted adversarial."""
    adversarial = [m for m in report.sessions if m.kind != HONEST]
    if not adversarial:
        return None
    return sum(m.accepted for m in adversarial) / len(adversarial)


def _p95(values: List[float]) -> Optional[float]:
    if not values:
        return None
    ordered = sorted(values)
    rank = max(1, math.ceil(0.95 * len(ordered)))
    return ordered[rank - 1]


def compute_aggregates(metrics: List[SessionMetrics], weights: Dict[str, float]) -> dict:
    honest = [m for m in metrics if m.kind == HONEST]
    adversarial = [m for m in metrics if m.kind != HONEST]
    kind_counts = {HONEST: len(honest)}
    kind_accepted = {HONEST: sum(m.accepted for m in honest)}
    far_by_kind: Dict[str, Optional[float]] = {}
    for kind in KIND_ORDER:
        of_kind = [m for m in metrics if m.kind == kind]
        kind_counts[kind] = len(of_kind)
        kind_accepted[kind] = sum(m.accepted for m in of_kind)
        far_by_kind[kind] = (
            sum(m.accepted for m in of_kind) / len(of_kind) if of_kind else None
        )
    latencies = [m.auth_latency_ms for m in metrics]
    key_times = [m.key_establish_ms for m in metrics if m.key_establish_ms is not None]
    op_totals = {"group_exp": 0, "group_mul": 0, "hash": 0}
    for m in metrics:
        for ops in (m.ops_p, m.ops_d):
            op_totals["group_exp"] += ops.group_exp
            op_totals["group_mul"] += ops.group_mul
            op_totals["hash"] += ops.hash
    return {
        "sessions": len(metrics),
        "honest_count": len(honest),
        "adversarial_count": len(adversarial),
        "kind_counts": kind_counts,
        "kind_accepted": kind_accepted,
        "honest_accept_rate": (
            sum(m.accepted for m in honest) / len(honest) if honest else None
        ),
        "key_agreement_rate": (
            sum(bool(m.key_agreement) for m in honest) / len(honest) if honest else None
        ),
        "far": (
            sum(m.accepted for m in adversarial) / len(adversarial) if adversarial else None
        ),
        "far_by_kind": far_by_kind,
        "mean_auth_latency_ms": sum(latencies) / len(latencies) if latencies else None,
        "p95_auth_latency_ms": _p95(latencies),
        "mean_key_establish_ms": sum(key_times) / len(key_times) if key_times else None,
        "op_totals": op_totals,
        "energy_proxy": energy_proxy(op_totals, weights),
    }

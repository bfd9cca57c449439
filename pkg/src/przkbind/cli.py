"""Operator command line: provision keys, register bindings, run a single
authentication, execute campaigns, and inspect reports.

Exit codes: 0 success, 1 usage/config error, 2 runtime error,
3 verification or integrity failure.
"""

from __future__ import annotations

import json
import os
import random
import stat
import sys
from pathlib import Path

import click

from .groups import GroupError, get_group
from .identity import (
    IdentitySource,
    PhysicalIdentity,
    TwinKeyPair,
    derive_entity_keys,
    provision_identity,
    twin_keygen,
)
from .protocol import (
    EntitySession,
    ProtocolError,
    TwinSession,
    fiat_shamir_prove,
    fiat_shamir_verify,
)
from .registration import (
    RegistrationError,
    Registry,
    RegistryIOError,
    load_registry,
    save_registry,
)
from .simulator import (
    HONEST,
    KIND_ORDER,
    CampaignConfig,
    ConfigError,
    SessionMetrics,
    SimulationError,
    compute_aggregates,
    run_campaign,
)

CONFIG_ENV_VAR = "PRZKBIND_CONFIG"


class IntegrityFailure(Exception):
    """A verification step or stored-aggregate cross-check failed."""


def _seeded_rng(seed: str, label: str) -> random.Random:
    import hashlib

    digest = hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


def _write_json(path: Path, obj: dict, secret: bool = False) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    if secret:
        path.chmod(stat.S_IRUSR | stat.S_IWUSR)


def _load_json(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@click.group()
def cli() -> None:
    """Physically rooted zero-knowledge twin binding: keys, registration,
    authentication sessions, and adversarial campaign simulation."""


@cli.command()
@click.option("--seed", required=True, help="Provisioning seed; fixed seed, fixed keys.")
@click.option("--group", "group_id", default="p256", show_default=True, help="Group backend (toy or p256).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def keygen(seed: str, group_id: str, out_dir: Path) -> None:
    """Provision the entity identity and the twin key pair into key files."""
    group = get_group(group_id)
    identity = provision_identity(seed)
    keys = derive_entity_keys(identity, group)
    twin = twin_keygen(group, _seeded_rng(seed, "twin-keygen"))

    out_dir.mkdir(parents=True, exist_ok=True)
    gid = group.group_id
    _write_json(out_dir / "entity.pub.json", {"group": gid, "pk_p": group.encode(keys.pk_p).hex()})
    _write_json(
        out_dir / "entity.key.json",
        {"group": gid, "s_p": identity.s_p.hex(), "source": identity.source.value},
        secret=True,
    )
    _write_json(out_dir / "twin.pub.json", {"group": gid, "pk_d": group.encode(twin.pk_d).hex()})
    _write_json(
        out_dir / "twin.key.json",
        {"group": gid, "sk_d": group.encode_scalar(twin.sk_d).hex()},
        secret=True,
    )
    click.echo(f"wrote {out_dir / 'entity.pub.json'}")
    click.echo(f"wrote {out_dir / 'entity.key.json'} (secret, permissions 0600)")
    click.echo(f"wrote {out_dir / 'twin.pub.json'}")
    click.echo(f"wrote {out_dir / 'twin.key.json'} (secret, permissions 0600)")


@cli.command()
@click.option("--entity-pub", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--twin-pub", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--registry", "registry_path", required=True, type=click.Path(path_type=Path))
@click.option("--time", "timestamp", type=int, default=None, help="Binding timestamp (default: now).")
def register(entity_pub: Path, twin_pub: Path, registry_path: Path, timestamp: int | None) -> None:
    """Mint the binding record for a key pair and append it to the registry."""
    entity_obj = _load_json(entity_pub)
    twin_obj = _load_json(twin_pub)
    if entity_obj["group"] != twin_obj["group"]:
        raise click.UsageError("entity and twin key files use different groups")
    group = get_group(entity_obj["group"])
    pk_p = group.decode(bytes.fromhex(entity_obj["pk_p"]))
    pk_d = group.decode(bytes.fromhex(twin_obj["pk_d"]))
    if timestamp is None:
        import time as _time

        timestamp = int(_time.time())
    if registry_path.exists():
        registry = load_registry(group, registry_path)
    else:
        registry = Registry(group)
    record = registry.register(pk_p, pk_d, timestamp)
    save_registry(registry, registry_path)
    click.echo(f"bound pk_p={entity_obj['pk_p'][:16]}… pk_d={twin_obj['pk_d'][:16]}… t={timestamp}")
    click.echo(f"zeta={record.zeta.hex()}")


@cli.command()
@click.option("--entity-key", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--twin-key", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed", default="authenticate", show_default=True, help="Session randomness seed.")
@click.option("--fiat-shamir", is_flag=True, help="Run the non-interactive proof instead.")
def authenticate(entity_key: Path, twin_key: Path, registry_path: Path, seed: str, fiat_shamir: bool) -> None:
    """Run one local authentication session and print its transcript."""
    entity_obj = _load_json(entity_key)
    twin_obj = _load_json(twin_key)
    if entity_obj["group"] != twin_obj["group"]:
        raise click.UsageError("entity and twin key files use different groups")
    group = get_group(entity_obj["group"])
    identity = PhysicalIdentity(bytes.fromhex(entity_obj["s_p"]), IdentitySource(entity_obj["source"]))
    keys = derive_entity_keys(identity, group)
    sk_d = group.decode_scalar(bytes.fromhex(twin_obj["sk_d"]))
    twin = TwinKeyPair(sk_d, group.exp(group.g, sk_d))

    registry = load_registry(group, registry_path)
    record = registry.get(keys.pk_p, twin.pk_d)
    if record is None:
        raise IntegrityFailure("no binding record for this key pair in the registry")

    if fiat_shamir:
        alpha, z = fiat_shamir_prove(group, twin.sk_d, record.zeta, twin.pk_d, _seeded_rng(seed, "fs"))
        ok = fiat_shamir_verify(group, twin.pk_d, record.zeta, alpha, z)
        click.echo(f"proof alpha={group.encode(alpha).hex()}")
        click.echo(f"proof z={group.encode_scalar(z).hex()}")
        click.echo(f"verified: {ok}")
        if not ok:
            raise IntegrityFailure("non-interactive proof rejected")
        return

    p = EntitySession(group, keys, record, _seeded_rng(seed, "entity"))
    d = TwinSession(group, twin, record, _seeded_rng(seed, "twin"))

    from collections import deque

    from .protocol import Transcript

    transcript = Transcript()
    first = d.commit()
    click.echo(f"D: -> commit            phase={d.phase.value}")
    transcript.note(first, 0.0)
    queue = deque([(p, first)])
    labels = {
        "commit": "commit",
        "challenge": "challenge",
        "response": "response",
        "identity_proof": "identity proof",
        "verdict": "verdict",
    }
    while queue:
        recipient, msg = queue.popleft()
        replies = recipient.receive(msg)
        who = "P" if recipient is p else "D"
        peer = d if recipient is p else p
        for reply in replies:
            transcript.note(reply, 0.0)
            label = labels[transcript.timestamps[-1][0]]
            click.echo(f"{who}: -> {label:<17} phase={recipient.phase.value}")
            queue.append((peer, reply))
    click.echo(f"P terminal phase: {p.phase.value}")
    click.echo(f"D terminal phase: {d.phase.value}")
    click.echo(transcript.to_json(group))
    accepted = transcript.verdict is not None and transcript.verdict.accept
    if accepted and p.session_key and d.session_key and p.session_key.k_pd == d.session_key.k_pd:
        click.echo("session established: keys agree")
    else:
        raise IntegrityFailure(
            f"authentication failed: {transcript.verdict.reason.name if transcript.verdict and transcript.verdict.reason else 'no verdict'}"
        )


def _parse_latency(value: str) -> tuple[float, float]:
    parts = value.split(":")
    try:
        if len(parts) == 1:
            ms = float(parts[0])
            return (ms, ms)
        if len(parts) == 2:
            return (float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise click.UsageError(f"--latency expects 'low:high' or a single value, got {value!r}")


def _parse_mix(value: str) -> dict:
    mix = {}
    for item in value.split(","):
        if not item:
            continue
        if "=" not in item:
            raise click.UsageError(f"--mix expects kind=weight pairs, got {item!r}")
        kind, _, weight = item.partition("=")
        try:
            mix[kind.strip()] = float(weight)
        except ValueError:
            raise click.UsageError(f"--mix weight must be numeric in {item!r}") from None
    return mix


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help=f"Campaign config JSON (default: ${CONFIG_ENV_VAR}).")
@click.option("--sessions", type=int, default=None)
@click.option("--adv-ratio", type=float, default=None)
@click.option("--latency", default=None, help="Per-message delay in ms: 'low:high' or one value.")
@click.option("--seed", type=int, default=None)
@click.option("--group", "group_id", default=None)
@click.option("--mix", default=None, help="Adversary mix, e.g. 'replay=1,mitm_tamper=2'.")
@click.option("--out", "out_prefix", default="report", show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True)
def simulate(config_path, sessions, adv_ratio, latency, seed, group_id, mix, out_prefix, parallel):
    """Run a session campaign and write JSON and CSV reports."""
    base: dict = {}
    if config_path is None:
        env_path = os.environ.get(CONFIG_ENV_VAR)
        if env_path:
            config_path = Path(env_path)
    if config_path is not None:
        base = _load_json(config_path)
    if sessions is not None:
        base["sessions"] = sessions
    if adv_ratio is not None:
        base["adv_ratio"] = adv_ratio
    if latency is not None:
        base["latency_range_ms"] = list(_parse_latency(latency))
    if seed is not None:
        base["rng_seed"] = seed
    if group_id is not None:
        base["group_id"] = group_id
    if mix is not None:
        base["adversary_mix"] = _parse_mix(mix)
    if "sessions" not in base:
        raise click.UsageError("a session count is required (--sessions or config file)")
    config = CampaignConfig.from_dict(base)
    if parallel < 1:
        raise click.UsageError("--parallel must be >= 1")

    report = run_campaign(config, workers=parallel)

    json_path = Path(f"{out_prefix}.json")
    csv_path = Path(f"{out_prefix}.csv")
    json_path.write_text(report.to_json(), encoding="utf-8")
    csv_path.write_text(report.to_csv(), encoding="utf-8")

    _echo_summary(report.config, report.aggregates)
    click.echo(f"wrote {json_path} and {csv_path}")


def _fmt_rate(value) -> str:
    return "n/a" if value is None else f"{value * 100:.4f}%"


def _fmt_ms(value) -> str:
    return "n/a" if value is None else f"{value:.3f} ms"


def _echo_summary(config: CampaignConfig, agg: dict) -> None:
    click.echo(f"{'sessions':<24}{agg['sessions']}")
    click.echo(f"{'honest / adversarial':<24}{agg['honest_count']} / {agg['adversarial_count']}")
    click.echo(f"{'honest acceptance':<24}{_fmt_rate(agg['honest_accept_rate'])}")
    click.echo(f"{'FAR (overall)':<24}{_fmt_rate(agg['far'])}")
    for kind in KIND_ORDER:
        attempts = agg["kind_counts"].get(kind, 0)
        accepted = agg["kind_accepted"].get(kind, 0)
        click.echo(f"  {kind:<22}{accepted}/{attempts}")
    click.echo(f"{'mean auth latency':<24}{_fmt_ms(agg['mean_auth_latency_ms'])} (virtual)")
    click.echo(f"{'p95 auth latency':<24}{_fmt_ms(agg['p95_auth_latency_ms'])} (virtual)")
    click.echo(f"{'mean key establish':<24}{_fmt_ms(agg['mean_key_establish_ms'])} (virtual)")
    click.echo(f"{'energy proxy':<24}{agg['energy_proxy']:.1f} weighted ops")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="table",
              show_default=True)
def report(in_path: Path, fmt: str) -> None:
    """Cross-check a report's stored aggregates and reprint it."""
    obj = _load_json(in_path)
    try:
        config = CampaignConfig.from_dict(obj["config"])
        metrics = [SessionMetrics.from_dict(s) for s in obj["sessions"]]
        stored = obj["aggregates"]
    except (KeyError, TypeError) as exc:
        raise IntegrityFailure(f"malformed report file: {exc}") from exc
    recomputed = compute_aggregates(metrics, config.energy_weights)
    for metric, value in recomputed.items():
        if metric not in stored:
            raise IntegrityFailure(f"aggregate mismatch: {metric} missing from report")
        if stored[metric] != value:
            raise IntegrityFailure(f"aggregate mismatch: {metric}")

    if fmt == "json":
        from .simulator import CampaignReport

        click.echo(CampaignReport(config, metrics, recomputed).to_json(), nl=False)
    elif fmt == "csv":
        from .simulator import CampaignReport

        click.echo(CampaignReport(config, metrics, recomputed).to_csv(), nl=False)
    else:
        click.echo(f"{'kind':<26}{'sessions':>10}{'accepted':>10}{'rate':>10}")
        for kind in (HONEST, *KIND_ORDER):
            attempts = recomputed["kind_counts"].get(kind, 0)
            accepted = recomputed["kind_accepted"].get(kind, 0)
            rate = f"{accepted / attempts * 100:.2f}%" if attempts else "n/a"
            click.echo(f"{kind:<26}{attempts:>10}{accepted:>10}{rate:>10}")
        click.echo(f"{'FAR (overall)':<26}{_fmt_rate(recomputed['far']):>30}")
        click.echo(f"{'mean auth latency':<26}{_fmt_ms(recomputed['mean_auth_latency_ms']):>30}")
        click.echo(f"{'energy proxy':<26}{recomputed['energy_proxy']:>28.1f}  weighted ops")


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except ConfigError as exc:
        click.echo(f"error: invalid config: {exc}", err=True)
        return 1
    except (IntegrityFailure, RegistryIOError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except (ProtocolError, GroupError, RegistrationError, SimulationError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()

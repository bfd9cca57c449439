"""Executable attacker strategies run against honest state machines.

Each strategy models one capability from the threat model and drives a
target session to its verdict:

* replay: resend a recorded (alpha, z) against a fresh challenge
* twin impersonation: answer the challenge blind, without sk_d
* MITM tampering: flip one bit of one in-flight message of an honest run
* KCI: holding a stolen sk_d, impersonate the physical entity to the twin

An attack context carries only what an eavesdropper sees (transcripts,
public keys, zeta), plus the stolen twin key in the KCI case.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from .groups import Element, Group, scalar_random, scalar_random_nonzero
from .protocol import (
    Challenge,
    Commit,
    EntitySession,
    IdentityProof,
    OpCounts,
    Phase,
    Response,
    Transcript,
    TwinSession,
    Verdict,
    encode_message,
)


class AdversaryKind(Enum):
    REPLAY = "replay"
    IMPERSONATE_TWIN = "impersonate_twin"
    MITM_TAMPER = "mitm_tamper"
    KCI_IMPERSONATE_PHYSICAL = "kci_impersonate_physical"


class AttackError(ValueError):
    """The attack context lacks what the strategy needs."""


@dataclass
class AttackContext:
    """Adversary knowledge: public transcript history and public keys only.

    The stolen twin secret is present exactly when modelling key
    compromise; no context ever holds the identity secret or ephemerals.
    """

    recorded_transcripts: List[Transcript] = field(default_factory=list)
    pk_p: Element = None
    pk_d: Element = None
    zeta: bytes = b""
    compromised_sk_d: Optional[int] = None


@dataclass
class AttackOutcome:
    """What the strategy achieved, plus the attacker-side operation tally."""

    verdict: Verdict
    messages: int  # in-flight protocol messages the attack exchanged
    ops: OpCounts = field(default_factory=OpCounts)
    detail: str = ""


def attack_replay(ctx: AttackContext, target: EntitySession, rng) -> AttackOutcome:
    """Replay a recorded commitment and response against a fresh verifier.

    Succeeds only if the fresh challenge collides with the recorded one,
    which the nonce-bound challenge makes vanishingly rare outside the
    toy group.
    """
    usable = [t for t in ctx.recorded_transcripts if t.alpha is not None and t.z is not None]
    if not usable:
        raise AttackError("no recorded transcripts to replay")
    recorded = usable[rng.randrange(len(usable))]
    ops = OpCounts()
    replies = target.receive(Commit(recorded.alpha))
    if not replies or not isinstance(replies[0], Challenge):
        verdict = replies[0] if replies else Verdict(False, target.failure)
        return AttackOutcome(verdict, 1, ops, "commitment rejected")
    replies = target.receive(Response(recorded.z))
    if target.schnorr_verified:
        # the deceived verifier sends its identity proof: a 4th in-flight message
        return AttackOutcome(Verdict(True), 4, ops, "challenge collision")
    verdict = replies[0] if replies and isinstance(replies[0], Verdict) else Verdict(False)
    return AttackOutcome(verdict, 3, ops)


def attack_impersonate_twin(ctx: AttackContext, rng, target: EntitySession) -> AttackOutcome:
    """Run the proof without sk_d: random commitment, then a blind response.

    Without solving the discrete log, exactly one response per challenge
    verifies, so the success rate is 1/q.
    """
    group = target.group
    ops = OpCounts()
    alpha = group.exp(group.g, scalar_random_nonzero(group, rng))
    ops.group_exp += 1
    replies = target.receive(Commit(alpha))
    if not replies or not isinstance(replies[0], Challenge):
        verdict = replies[0] if replies else Verdict(False, target.failure)
        return AttackOutcome(verdict, 1, ops, "commitment rejected")
    z = scalar_random(group, rng)
    replies = target.receive(Response(z))
    if target.schnorr_verified:
        return AttackOutcome(Verdict(True), 4, ops, "blind response verified")
    verdict = replies[0] if replies and isinstance(replies[0], Verdict) else Verdict(False)
    return AttackOutcome(verdict, 3, ops)


def attack_kci(ctx: AttackContext, rng, target: TwinSession) -> AttackOutcome:
    """Impersonate the physical entity to a twin whose sk_d leaked.

    The stolen key is required by the scenario but useless for this
    direction: passing the identity check needs the discrete log of
    pk_p, so the adversary can only guess h_sp. The context must hold no
    observed identity proofs; reusing an observed h_sp is classified as
    replay, not key compromise.
    """
    if ctx.compromised_sk_d is None:
        raise AttackError("key-compromise attack requires the stolen twin secret")
    if any(t.h_sp is not None for t in ctx.recorded_transcripts):
        raise AttackError("context with observed identity proofs models replay, not KCI")
    group = target.group
    ops = OpCounts()
    target.commit()
    c = scalar_random(group, rng)
    target.receive(Challenge(c))
    h_sp_guess = scalar_random(group, rng)
    r_a = scalar_random(group, rng)
    r_pub = group.exp(group.g, r_a)
    ops.group_exp += 1
    replies = target.receive(IdentityProof(h_sp_guess, r_pub))
    if target.identity_verified:
        return AttackOutcome(Verdict(True), 4, ops, "identity guess accepted")
    verdict = replies[0] if replies and isinstance(replies[0], Verdict) else Verdict(False)
    return AttackOutcome(verdict, 4, ops)


# -- MITM tampering -----------------------------------------------------------

# The would-be honest session carries these five in-flight messages.
MITM_SLOTS = ("commit", "challenge", "response", "identity_proof", "verdict")

# Fields whose verification binds them; flips elsewhere (the ephemeral
# share, the closing verdict) are disruption, not credential forgery.
_CREDENTIAL_SLOTS = frozenset({"commit", "challenge", "response", "identity_proof"})


def _flip_bit(data: bytes, bit_index: int) -> bytes:
    out = bytearray(data)
    out[bit_index // 8] ^= 1 << (7 - bit_index % 8)
    return bytes(out)


def _is_credential_bit(group: Group, slot: str, bit_index: int) -> bool:
    """True if the flipped bit lands in a credential field.

    For the identity-proof message only the h_sp bytes are credential;
    the trailing ephemeral share is key material the identity check does
    not bind.
    """
    if slot not in _CREDENTIAL_SLOTS:
        return False
    if slot != "identity_proof":
        return True
    header_bits = 5 * 8
    return bit_index < header_bits + group.scalar_size * 8


def attack_mitm_tamper(
    ctx: AttackContext,
    rng,
    entity: EntitySession,
    twin: TwinSession,
    slot: Optional[int] = None,
    bit: Optional[int] = None,
) -> AttackOutcome:
    """Run an honest session but flip one bit of one in-flight message.

    Slot and bit are drawn uniformly unless pinned (tests enumerate
    them). The outcome counts as a false acceptance only when a
    credential bit was flipped and the verifier consuming that message
    still established a key.
    """
    group = entity.group
    slot = rng.randrange(len(MITM_SLOTS)) if slot is None else slot
    slot_name = MITM_SLOTS[slot]
    tampered_bit = bit
    tampered = False
    messages = 0

    def slot_of(msg) -> str:
        if isinstance(msg, Commit):
            return "commit"
        if isinstance(msg, Challenge):
            return "challenge"
        if isinstance(msg, Response):
            return "response"
        if isinstance(msg, IdentityProof):
            return "identity_proof"
        return "verdict"

    def hop(recipient, msg, name: str) -> List:
        nonlocal messages, tampered_bit, tampered
        if name != "verdict":
            messages += 1  # verdicts deliver with zero injected delay
        raw = encode_message(group, msg)
        if name == slot_name and not tampered:
            if tampered_bit is None:
                tampered_bit = rng.randrange(len(raw) * 8)
            raw = _flip_bit(raw, tampered_bit)
            tampered = True
        return recipient.receive_bytes(raw)

    queue = deque([(twin, twin.commit())])
    while queue:
        emitter, msg = queue.popleft()
        recipient = entity if emitter is twin else twin
        for reply in hop(recipient, msg, slot_of(msg)):
            queue.append((recipient, reply))

    verifier = entity if slot_name in ("commit", "challenge", "response") else twin
    accepted = (
        tampered_bit is not None
        and _is_credential_bit(group, slot_name, tampered_bit)
        and verifier.phase is Phase.KEY_ESTABLISHED
    )
    detail = f"slot={slot_name} bit={tampered_bit}"
    if slot_name == "verdict":
        detail += " post-auth"
    return AttackOutcome(Verdict(accepted), messages, OpCounts(), detail)

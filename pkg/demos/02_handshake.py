"""The authentication handshake end to end, outside the simulator: build a
signed context-bound request, verify it at a fog, pass the threshold,
derive matching session keys, and watch the replay cache and the fallback
challenge do their jobs.

Run: python3 demos/02_handshake.py
"""

from ztmaf import (
    ContextVector,
    Decision,
    NodeId,
    ReplayCache,
    build_request,
    decide,
    derive_session_key,
    establish_session,
    keypair_from_seed,
    provision_shared_secret,
    verify_request,
)
from ztmaf.crypto import ChallengeStream, NonceStream
from ztmaf.protocol import answer_challenge, fallback_challenge, judge_fallback
from ztmaf.simkernel import derive_rng

vehicle = NodeId.vehicle(7)
fog = NodeId.fog(2)
master_secret = b"\x01" * 32

keypair = keypair_from_seed(b"\x42" * 32)
registry = {vehicle.label: keypair.public}
shared = provision_shared_secret(master_secret, vehicle.label, fog.label)
nonces = NonceStream(derive_rng(1, "nonce", 7))
cache = ReplayCache(ttl_s=30.0)

# ---------------------------------------------------------------------------
# 1. Vehicle side: hash the canonical encoding of (id, context, trust) and
#    sign the digest. The preimage is bit-exact, so both sides agree.

ctx = ContextVector(speed_mps=12.4, location=(420.0, 250.0), behavior=1.0, timestamp_s=10.0)
request = build_request(vehicle, ctx, local_trust=0.71, keypair=keypair, nonces=nonces, sent_at_s=10.0)
print("request digest:", request.request_digest.hex()[:32], "...")
print("nonce         :", request.nonce.bytes.hex())

# ---------------------------------------------------------------------------
# 2. Fog side: identity -> signature -> freshness, then the trust threshold.

result = verify_request(request, registry, cache, now_s=10.001)
print("verification  :", "Verified" if result.verified else result.reason.value)

updated_trust = 0.71  # in the simulator the fog recomputes this itself
decision = decide(updated_trust, theta=0.65)
print("decision      :", decision.value)

record, token = establish_session(
    request, shared, fog, now_s=10.13, lifetime_s=120.0, trust_at_grant=updated_trust
)
vehicle_key = derive_session_key(shared, request.nonce, established_s=10.13, lifetime_s=120.0)
print("keys match    :", record.key.bytes == vehicle_key.bytes)
print("ack token     :", len(token), "bytes, opaque")

# ---------------------------------------------------------------------------
# 3. Replay defense: the same bytes again are refused while the nonce is
#    resident in the cache.

replay = verify_request(request, registry, cache, now_s=11.0)
print("replayed bytes:", replay.reason.value)

# ---------------------------------------------------------------------------
# 4. Fallback: a vehicle below the threshold gets one challenge-response
#    round to prove key possession. Honest vehicles pass; an attacker
#    without the private key cannot forge the response.

low_trust = decide(0.58, theta=0.65)
print("\nlow-trust decision:", low_trust.value)
challenges = ChallengeStream(derive_rng(1, "challenge", 2))
challenge = fallback_challenge(challenges)
response = answer_challenge(challenge, vehicle.label, keypair)
print("honest response accepted:", judge_fallback(challenge, response, vehicle.label, keypair.public))

imposter = keypair_from_seed(b"\x66" * 32)
forged = answer_challenge(challenge, vehicle.label, imposter)
print("imposter response accepted:", judge_fallback(challenge, forged, vehicle.label, keypair.public))

"""Zero-trust mobility-aware authentication for vehicular fog networks.

A protocol library (context-bound signed session requests, exponential trust
filtering, threshold acceptance, HMAC session keys, replay defense) plus a
deterministic discrete-event simulator with adversary models, comparison
baselines, and a metrics suite.
"""

from .config import ConfigError, ScenarioConfig, echo_config, load_config, parse_config_text
from .crypto import (
    KeyPair,
    Nonce,
    NonceStream,
    SessionKey,
    SharedSecret,
    canonical_encode,
    derive_session_key,
    hash_request,
    keypair_from_seed,
    provision_shared_secret,
    sign,
    verify,
)
from .domain import (
    ContextVector,
    NodeId,
    NodeKind,
    TopologyGraph,
    TrustState,
    nearest_fog,
    rebuild_links,
)
from .metrics import (
    AttemptRecord,
    MetricsLedger,
    Outcome,
    auth_latency,
    convergence_report,
    detection_rate,
    end_to_end_delay,
    recount,
    security_index,
    session_success_rate,
    summarize,
)
from .mobility import (
    KraussParams,
    RoadLoop,
    Trajectory,
    krauss_step,
    load_trace,
    sample,
    save_trace,
    synth_fleet,
)
from .protocol import (
    AuthRequest,
    Decision,
    RejectReason,
    ReplayCache,
    SessionRecord,
    answer_challenge,
    build_request,
    decide,
    establish_session,
    fallback_challenge,
    judge_fallback,
    verify_request,
)
from .runner import InvariantViolation, Simulation, compare, run, sweep
from .simkernel import ChannelModel, CostTable, EventKernel, derive_rng
from .threats import (
    AttackKind,
    AttackPlan,
    BaselineKind,
    BaselineModel,
    baseline_authenticate,
    replay_attempt,
    spoof_attempt,
    sybil_spawn,
)
from .trust import TrustParams, convergence_time, psi, update_trust

__version__ = "0.1.0"

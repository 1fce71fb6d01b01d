"""Secure distributed dot products and matrix products over homomorphic ciphers."""

from .adversary import (
    AttackOutcome,
    AttackScenario,
    attack_alice_key,
    attack_charlie_key,
    attack_sandwich,
    mean_occurrences_to_safety,
    run_scenario,
    wiretap_breach_probability,
)
from .dot import DotProductInstance, run_dsdp, run_esdp, run_mpwp, run_pmpwp
from .errors import (
    AlgebraError,
    ConfigurationError,
    HypothesisError,
    KeyGenerationError,
    KeyMismatchError,
    ParameterError,
    ProtocolAbort,
    RangeError,
    RingdotError,
    RoutingError,
)
from .hom_cipher import (
    Ciphertext,
    ModulusChain,
    build_modulus_chain,
    decrypt,
    encrypt,
    hom_add,
    hom_scale,
    paillier_keygen,
    shared_modulus_keygen,
)
from .matmul import (
    avg_bound_thm4,
    partition_blocks,
    random_ring_order,
    run_pdsmm,
    run_pdsmm_trust,
    run_wiretap,
    worst_bound_prop1,
)
from .netsim import PAILLIER_CHAIN, SHARED_MODULUS, Network, create_network
from .trust import TrustPair, par_agg, par_invert, seq_agg

__version__ = "0.1.0"

import random

import pytest
from hypothesis import given, settings, strategies as st

from ringdot.codec import encode_payload
from ringdot.dot import (
    DotProductInstance,
    network_for,
    pmpwp_moduli_ok,
    run_dsdp,
    run_esdp,
    run_mpwp,
    run_pmpwp,
)
from ringdot.errors import HypothesisError, ParameterError, ProtocolAbort
from ringdot.group import default_group
from ringdot.hom_cipher import DEFAULT_SEARCH_BOUND, ModulusChain, _paillier_from_primes, decrypt, encrypt
from ringdot.netsim import (
    PAILLIER_CHAIN,
    SHARED_MODULUS,
    AdversaryHook,
    Network,
    attach_adversary,
    default_shared_modulus,
    directory_from_chain,
)
from ringdot.zkp import ChainedCheckState, make_affine_proof, verify_affine_step

MODES = (PAILLIER_CHAIN, SHARED_MODULUS)


def count(net, phase):
    return sum(1 for m in net.transcript if f"/{phase}" in m.tag)


# ---------------------------------------------------------------------------
# DSDP
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", MODES)
def test_dsdp_worked_example(mode):
    res = run_dsdp(DotProductInstance(3, [2, 3, 4], [5, 6, 7], 10, mode=mode))
    assert res.S == 56
    assert res.metrics.message_count == 6


@pytest.mark.parametrize("mode", MODES)
def test_dsdp_zero_vector(mode):
    assert run_dsdp(DotProductInstance(3, [0, 0, 0], [9, 8, 7], 10, mode=mode)).S == 0


@pytest.mark.parametrize("n", [3, 4, 5, 6, 8])
def test_dsdp_message_and_round_counts(n):
    rng = random.Random(n)
    res = run_dsdp(DotProductInstance.random(n, 20, rng, seed=n))
    assert res.metrics.message_count == 3 * n - 3
    assert res.metrics.round_count == n + 1


def test_dsdp_phase_breakdown():
    inst = DotProductInstance.random(6, 20, random.Random(1))
    net = network_for(inst)
    run_dsdp(inst, net)
    assert (count(net, "c/"), count(net, "alpha/"), count(net, "beta/"), count(net, "gamma")) == (5, 5, 4, 1)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 7), B=st.sampled_from([1, 10, 1 << 8, 1 << 16]), mode=st.sampled_from(MODES),
       seed=st.integers(0, 10_000))
def test_dsdp_matches_integer_dot(n, B, mode, seed):
    inst = DotProductInstance.random(n, B, random.Random(seed), mode=mode, seed=seed)
    # power-of-two M decrypts digit by digit, so a larger bound stays cheap
    bound = max(DEFAULT_SEARCH_BOUND, default_shared_modulus(n, B))
    assert run_dsdp(inst, network_for(inst, search_bound=bound)).S == sum(u * v for u, v in zip(inst.U, inst.V))


def _replay_chain(moduli, master_N, U, V, masks):
    deltas, acc = [], 0
    for N, u, v, r in zip(moduli, U, V, masks):
        acc = (acc + u * v + r) % N
        deltas.append(acc)
    trace = [acc % master_N]
    for N, r in zip(reversed(moduli), reversed(masks)):
        trace.append((trace[-1] - r) % N)
    return deltas, trace


@pytest.mark.parametrize("n", [3, 5, 7])
def test_dsdp_unwind_trace_matches_replay(n):
    inst = DotProductInstance.random(n, 50, random.Random(n), seed=n)
    net = network_for(inst)
    res = run_dsdp(inst, net)
    ring = range(2, n + 1)
    moduli = [net.keys.ring_pk(p).N for p in ring]
    masks = [res.masks[k] for k in ring]
    deltas, trace = _replay_chain(moduli, net.keys.master_pk(1).N, inst.U[1:], inst.V[1:], masks)
    assert [res.deltas[k] for k in ring] == deltas
    assert res.trace == trace
    assert trace[-1] == inst.ring_dot()
    # after removing masks m..i the value is the partial sum before i plus the remaining products
    prior = [0] + deltas
    for step, i in enumerate(range(n, 1, -1), start=1):
        rest = sum(u * v for u, v in zip(inst.U[i - 1:], inst.V[i - 1:]))
        assert trace[step] == prior[i - 2] + rest


def test_dsdp_rejects_bad_inputs():
    with pytest.raises(HypothesisError):
        run_dsdp(DotProductInstance(3, [1, 2, 11], [1, 1, 1], 10))
    with pytest.raises(ParameterError):
        run_dsdp(DotProductInstance(2, [1, 2], [1, 1], 10))
    with pytest.raises(HypothesisError):
        run_dsdp(DotProductInstance(3, [2, 1, 3], [1, 1, 1], 10, proofs=True))


def _undersized_network(seed=0):
    pk2, sk2 = _paillier_from_primes(11, 13)
    pk3, sk3 = _paillier_from_primes(17, 19)
    chain = ModulusChain((pk2, pk3), 10, 1, (sk2, sk3))
    assert chain.violations() == [2]
    return Network(3, directory_from_chain(3, chain, seed), seed)


def test_undersized_chain_is_rejected_and_wraps():
    inst = DotProductInstance(3, [0, 10, 10], [0, 10, 10], 10)
    with pytest.raises(HypothesisError):
        run_dsdp(inst, _undersized_network())
    assert run_dsdp(inst, _undersized_network(), check=False).S == 200 % 143


@pytest.mark.parametrize("mode", MODES)
def test_signed_run_succeeds(mode):
    inst = DotProductInstance(4, [2, 3, 4, 5], [5, 6, 7, 8], 10, mode=mode, signatures=True)
    net = network_for(inst)
    assert run_dsdp(inst, net).S == inst.dot()
    assert all(m.signature for m in net.transcript)


# ---------------------------------------------------------------------------
# ESDP
# ---------------------------------------------------------------------------

def _esdp_net(m, mode=PAILLIER_CHAIN, B=10):
    return network_for(DotProductInstance(m + 1, [0] * (m + 1), [0] * (m + 1), B, mode=mode))


@pytest.mark.parametrize("mode", MODES)
def test_esdp_examples(mode):
    res = run_esdp(1, [2, 3], [3, 4], [5, 6], _esdp_net(2, mode))
    assert res.S == 39 and res.metrics.round_count == 4
    assert run_esdp(1, [2, 3], [0, 0], [5, 6], _esdp_net(2, mode)).S == 0
    res3 = run_esdp(1, [2, 3, 4], [3, 4, 5], [5, 6, 7], _esdp_net(3, mode))
    assert res3.S == 74 and res3.metrics.round_count == 5


def test_esdp_length_mismatch():
    with pytest.raises(ParameterError):
        run_esdp(1, [2, 3], [1], [1, 2], _esdp_net(2))


# ---------------------------------------------------------------------------
# affine proofs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def group():
    return default_group()


def test_affine_worked_example(group, paillier512):
    pk, sk = paillier512
    rng = random.Random(0)
    bundle = make_affine_proof(3, 5, encrypt(pk, 4, rng), group, rng)
    delta = decrypt(sk, bundle.alpha)
    assert delta == 17
    assert group.exp(17) == group.mul(group.power(bundle.mu, 4), bundle.rho)
    check = verify_affine_step(bundle.mu, bundle.rho, 4, delta, None, group, pk.N)
    assert check and check.state.delta_prev == group.exp(17)


@pytest.mark.parametrize("u", [0, 1])
def test_affine_rejects_trivial_u(group, u):
    mu, rho = group.exp(u), group.exp(5)
    assert not verify_affine_step(mu, rho, 4, 4 * u + 5, None, group)


def test_affine_rejects_trivial_r(group):
    assert not verify_affine_step(group.exp(3), group.exp(1), 4, 13, None, group)


def test_chained_check(group):
    first = verify_affine_step(group.exp(3), group.exp(5), 4, 17, None, group)
    second = verify_affine_step(group.exp(2), group.exp(7), 6, 17 + 12 + 7, first.state, group)
    assert second
    forged = verify_affine_step(group.exp(2), group.exp(7), 6, 17 + 12 + 7, ChainedCheckState(1), group)
    assert not forged


@pytest.mark.parametrize("n", [3, 4, 6])
def test_honest_run_with_proofs(n):
    inst = DotProductInstance.random(n, 30, random.Random(n), proofs=True, seed=n)
    net = network_for(inst)
    assert run_dsdp(inst, net).S == inst.dot()
    alphas = [m for m in net.transcript if "/alpha/" in m.tag]
    assert all({"mu", "rho"} <= set(m.fields()) for m in alphas)
    betas = [m for m in net.transcript if "/beta/" in m.tag]
    assert all("delta" in m.fields() for m in betas)


def test_substituted_alpha_fails_check():
    inst = DotProductInstance(4, [2, 3, 4, 5], [5, 6, 7, 8], 10, proofs=True)
    net = network_for(inst)
    rng = random.Random(9)

    def substitute(msg, net):
        if msg.tag.endswith("/alpha/3"):
            fields = msg.fields()
            fields["alpha"] = encrypt(net.keys.ring_pk(3), 0, rng).value
            return [msg.replace(payload=encode_payload(fields))]
        return [msg]

    attach_adversary(net, AdversaryHook("active", set(), substitute))
    with pytest.raises(ProtocolAbort) as info:
        run_dsdp(inst, net)
    assert info.value.player == 3 and info.value.step == "affine-check"


# ---------------------------------------------------------------------------
# MPWP and P-MPWP
# ---------------------------------------------------------------------------

def test_mpwp_example():
    inst = DotProductInstance(3, [0, 2, 3], [0, 4, 5], 10, mode=SHARED_MODULUS)
    assert run_mpwp(inst).S == 23


def test_mpwp_needs_shared_modulus():
    with pytest.raises(ParameterError):
        run_mpwp(DotProductInstance(3, [0, 2, 3], [0, 4, 5], 10))


@pytest.mark.parametrize("seed", range(5))
def test_mpwp_random(seed):
    inst = DotProductInstance.random(5, 30, random.Random(seed), mode=SHARED_MODULUS, seed=seed)
    assert run_mpwp(inst).S == inst.ring_dot()


def test_pmpwp_example_and_share_count():
    inst = DotProductInstance(4, [0, 1, 2, 3], [0, 4, 5, 6], 10)
    net = network_for(inst)
    assert run_pmpwp(inst, net).S == 32
    assert count(net, "share/") == 6


@pytest.mark.parametrize("seed", range(5))
def test_pmpwp_random(seed):
    inst = DotProductInstance.random(6, 40, random.Random(seed), seed=seed)
    assert run_pmpwp(inst).S == inst.ring_dot()


def test_pmpwp_strict_modulus_bound():
    n, B = 4, 10
    edge = (n - 1) * (B * B + B)
    assert not pmpwp_moduli_ok(n, B, edge, [1000] * 3)
    assert pmpwp_moduli_ok(n, B, edge + 1, [1000] * 3)
    assert not pmpwp_moduli_ok(n, B, edge + 1, [(n - 1) * B] * 3)


def test_pmpwp_rejects_small_master_key():
    pk, sk = _paillier_from_primes(11, 13)
    inst = DotProductInstance(4, [0, 1, 2, 3], [0, 4, 5, 6], 10)
    net = network_for(inst)
    net.keys.players[1].master = (pk, sk)
    with pytest.raises(HypothesisError):
        run_pmpwp(inst, net)


def test_volume_growth_orders():
    def volume(run, n, mode):
        inst = DotProductInstance.random(n, 10, random.Random(n), mode=mode)
        return run(inst).metrics.total_bytes

    assert volume(run_mpwp, 8, SHARED_MODULUS) > 4 * volume(run_mpwp, 4, SHARED_MODULUS)
    pm4, pm8 = volume(run_pmpwp, 4, PAILLIER_CHAIN), volume(run_pmpwp, 8, PAILLIER_CHAIN)
    assert 2.5 * pm4 < pm8


def test_instance_json_roundtrip():
    inst = DotProductInstance.random(5, 100, random.Random(3), proofs=True, seed=4)
    assert DotProductInstance.from_json(inst.to_json()) == inst

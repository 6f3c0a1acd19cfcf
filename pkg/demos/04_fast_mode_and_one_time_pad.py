"""
20000 pulses per bit and a one-time pad
========================================

Longer blocks nearly remove empty blocks. Encrypt a bundled 100x100 bitmap
with Alice's key and decrypt it with Bob's noisy copy.
"""
import numpy as np

from pingpong_qkd import _rng
from pingpong_qkd.harness import logo_bits, preset, random_key, report
from pingpong_qkd.protocol import Decision, otp_roundtrip, transmit_key, with_overrides

config = preset("mode2", seed=7)
message = logo_bits()
alice = random_key(message.size, seed=7)
stats, results = transmit_key(alice, config)
print(report(stats=stats)[0])

# Bob uses every block: ties and empty blocks become coin flips.
coin = _rng.stream(7, _rng.TIES)
bob = np.array([r.bob_bit if r.decision is not Decision.NO_CLICK else coin.integers(2) for r in results])
cipher, _ = otp_roundtrip(message.ravel(), alice)
recovered, _ = otp_roundtrip(cipher, bob)
print(f"recovered bit error rate: {100 * np.mean(recovered != message.ravel()):.2f}%")


def show(bits, step=4):
    rows = bits.reshape(message.shape)[::step, ::step]
    return "\n".join("".join("#" if b else "." for b in row) for row in rows)


print(show(recovered))

# Without synchronisation errors the error rate drops.
clean = with_overrides(config, **{"bsa.sync_error_prob": 0.0})
print(f"QBER without sync errors: {100 * transmit_key(alice[:3000], clean)[0].qber:.2f}%")

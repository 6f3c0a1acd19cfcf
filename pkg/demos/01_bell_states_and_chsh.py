"""
Bell states, colored noise and the CHSH value
=============================================

Build the two Bell states used as the key alphabet, add colored noise and
watch visibility and the CHSH value fall together.
"""
import numpy as np

from pingpong_qkd.quantum_state import (
    BellSign,
    apply_pockels,
    bell_state,
    calibrate_mixture_for_s,
    chsh_s,
    mix_colored,
    partial_trace,
    visibility,
)

psi_plus = bell_state(BellSign.PLUS)
print("psi+ density matrix (HH, HV, VH, VV):")
print(np.round(psi_plus.rho.real, 3))

# The Pockels cell on the travel photon turns psi+ into psi-.
psi_minus = apply_pockels(psi_plus, voltage_on=True)
print("Pockels on -> psi-:", psi_minus.allclose(bell_state(BellSign.MINUS)))

# The travel photon alone looks the same for both bits.
print("travel photon, psi+:", np.round(partial_trace(psi_plus).rho.real, 3).tolist())
print("travel photon, psi-:", np.round(partial_trace(psi_minus).rho.real, 3).tolist())

# Colored noise: a share m of the pairs lose their HV/VH coherence.
for m in (0.0, 0.07, 0.25, 0.5, 1.0):
    s = mix_colored(psi_plus, m)
    print(f"m={m:4.2f}  visibility={visibility(s):.3f}  S={chsh_s(s):.4f}")

# Which mixture gives S = 2.51?
m = calibrate_mixture_for_s(2.51)
print(f"S = 2.51 needs m = {m:.4f}, i.e. visibility {visibility(mix_colored(psi_plus, m)):.3f}")

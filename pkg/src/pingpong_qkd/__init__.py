"""Simulation of two-way entanglement-based (ping-pong) quantum key distribution."""
from .adversary import (
    AttackReport,
    InterceptResend,
    LossHiding,
    NoAttack,
    TrojanHorse,
    assess,
    loss_hiding_feasible,
    one_click_check,
)
from .harness import (
    PRESETS,
    CalibrationResult,
    CalibrationTargets,
    ConfigError,
    ScenarioConfig,
    calibrate,
    preset,
    report,
    run_scenario,
)
from .optics_bsa import (
    BsaParams,
    ClickEvent,
    Detector,
    HomCurvePoint,
    Signature,
    classify_signature,
    coincidence_probs,
    contrast,
    generate_clicks,
    hom_curve,
    read_hom_csv,
    write_hom_csv,
)
from .photon_source import PulseEmission, SourceParams, correlation_coefficient, sample_emission
from .protocol import (
    BlockResult,
    Category,
    ControlVerdict,
    ProtocolConfig,
    TransmissionStats,
    confirmation_mode_transmit,
    control_run,
    decide,
    otp_roundtrip,
    qber,
    transmit_bit,
    transmit_key,
)
from .quantum_state import (
    BellSign,
    Polarization,
    SingleQubitState,
    StateError,
    TwoQubitState,
    apply_pockels,
    bell_state,
    chsh_s,
    encode,
    fidelity,
    measure_z,
    mix_colored,
    partial_trace,
    visibility,
)

__version__ = "0.1.0"

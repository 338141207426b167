"""Crossed-cavity single-photon node and two-node network simulator.

A single node is two orthogonal optical cavities sharing their waists
with one atom; classical fields and the atom's transit turn it into a
controllable beam splitter for a single photon.  Two nodes joined by a
fiber mode form a network segment on which one- and two-qubit pulse
protocols run in the single-excitation sector.

Modules:
    model_core  Hamiltonian matrices, dark states, loss model
    pulses      pulse profiles, protocols, frame sampling
    propagator  adaptive/fixed-step integration, effective unitary
    two_node    20-state two-node system and its dark states
    analysis    fidelity, velocity sweeps, calibration, decay fits
    cli         config-driven command line front end
"""

from .model_core import (
    DerivedCouplings,
    NodeParams,
    SectorLabel,
    apply_losses,
    beam_splitter_hamiltonian,
    build_full_matrix,
    dark_state_full,
    effective_linewidths,
    effective_three_level,
    sector_basis_labels,
)
from .pulses import (
    NodeChannels,
    NodePulseSpec,
    ParameterFrame,
    PulseProfile,
    PulseProtocol,
    StaticNodeSettings,
    TransitProfile,
    eval_profile,
    replace_transit_velocity,
    sample_protocol,
    splitter_protocol,
    stationary_transfer_protocol,
    two_node_protocol,
    velocity_to_physical,
)
from .propagator import (
    EffectiveUnitary,
    IntegrationError,
    IntegratorControl,
    Trajectory,
    effective_unitary,
    integrate,
    norm_history,
    run_protocol,
)
from .two_node import (
    TWO_NODE_BASIS,
    TWO_NODE_LABELS,
    TwoNodeParams,
    build_matrix_from_params,
    build_two_node_matrix,
    dark_states_two_node,
    run_protocol_two_node,
)
from .analysis import (
    CalibrationError,
    CalibrationResult,
    DecayFit,
    SweepTable,
    calibrate_velocity,
    extract_decay_rate,
    fidelity,
    stationary_atom_transfer,
    velocity_sweep,
)

__version__ = "0.1.0"

//! Variational Monte Carlo ground-state search.

mod hamiltonian;
mod optimize;

pub use hamiltonian::{
    exact_ground_energy, local_energies, local_energy, Hamiltonian, HamiltonianKind, DENSE_ENERGY_CAP, EXACT_ENERGY_CAP,
};
pub use optimize::{
    adam_step, energy_and_gradient, energy_and_gradient_net, exact_energy, exact_energy_and_gradient, load_checkpoint,
    save_checkpoint, vmc_optimize, write_trace_csv, AdamConfig, AdamState, EnergyGradient, VmcConfig, VmcResult,
};

//! Entanglement, level statistics and correlations of wavefunctions.

mod correlations;
mod entropy;
mod spectrum;

pub use correlations::{
    average_curves, connected_correlations, connected_correlations_net, exact_connected_correlations, CorrelationCurve,
    Correlations, CORRELATION_BATCHES,
};
pub use entropy::{
    exact_state_vector, exact_state_vector_capped, purity_from_state, reduced_density_matrix, renyi2_exact,
    renyi2_exact_state, renyi2_swap, renyi2_swap_net, state_vector_of, EntanglementReport, EntropyMethod, EntropyRecord,
    Partition, StateVector, RDM_CAP, STATE_VECTOR_CAP, SWAP_BATCHES, TRACE_TOL,
};
pub use spectrum::{
    entanglement_spectrum, gap_ratios, marchenko_pastur_aspect, marchenko_pastur_density, marchenko_pastur_support,
    mean_r_min, reference_density, write_spectrum_csv, EntanglementSpectrum, GapRatios, Histogram, ReferenceDistribution,
    ReferenceKind, DEFAULT_CUTOFF, GAP_TOL,
};

use crate::error::Result;
use crate::models::Network;

/// Exact `S_2` together with the entanglement spectrum and its gap ratios.
///
/// Gap ratios are left empty when fewer than three levels survive the cutoff.
pub fn exact_entanglement_with_spectrum(
    net: &Network,
    part: &Partition,
    cutoff: f64,
) -> Result<(EntanglementReport, EntanglementSpectrum, GapRatios)> {
    let state = state_vector_of(net)?;
    let rho = reduced_density_matrix(&state.amplitudes, part)?;
    let mut report = renyi2_exact_from_rho(&rho)?;
    let spec = entanglement_spectrum(&rho, cutoff)?;
    let ratios = match gap_ratios(&spec.energies) {
        Ok(g) => g,
        Err(crate::Error::SpectrumTooSmall(_)) | Err(crate::Error::DegenerateGaps) => GapRatios::default(),
        Err(e) => return Err(e),
    };
    report.spectrum = Some(spec.energies.clone());
    report.gap_ratios = Some(ratios.r.clone());
    Ok((report, spec, ratios))
}

fn renyi2_exact_from_rho(rho: &nalgebra::DMatrix<num_complex::Complex64>) -> Result<EntanglementReport> {
    let s2 = renyi2_exact(rho)?;
    Ok(EntanglementReport {
        s2,
        s2_stderr: 0.0,
        method: EntropyMethod::Exact,
        purity: (-s2).exp(),
        purity_stderr: 0.0,
        imag_mean: None,
        spectrum: None,
        gap_ratios: None,
    })
}

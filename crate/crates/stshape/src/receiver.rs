//! Max-SINR space-time receive filtering, symbol detection, and empirical
//! SINR/BER measurement validating the analytic link equations by
//! Monte-Carlo.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ModulationOrder, OccupancyMatrix, SpaceTimeSignature};
use crate::occupancy::{occupancy_snapshot, InterfererSpec};
use crate::qam::QamGrid;

/// The linear receive filter `f = O⁻¹ g`.
#[derive(Clone, Debug)]
pub struct ReceiveFilter {
    f: DVector<Complex64>,
}

impl ReceiveFilter {
    pub fn vector(&self) -> &DVector<Complex64> {
        &self.f
    }

    /// A rescaled copy; SINR and detection are invariant to filter scale.
    pub fn scaled(&self, c: Complex64) -> ReceiveFilter {
        ReceiveFilter { f: &self.f * c }
    }
}

/// One simulated block of symbols and their received space-time vectors.
#[derive(Clone, Debug)]
pub struct SymbolFrame {
    tx_labels: Vec<u32>,
    tx_symbols: Vec<Complex64>,
    rx: Vec<DVector<Complex64>>,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.tx_symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_symbols.is_empty()
    }

    pub fn tx_symbols(&self) -> &[Complex64] {
        &self.tx_symbols
    }

    pub fn rx_vectors(&self) -> &[DVector<Complex64>] {
        &self.rx
    }
}

/// Max-SINR filter for signature `g` under occupancy `o`: `f = O⁻¹g`.
pub fn max_sinr_filter(o: &OccupancyMatrix, g: &SpaceTimeSignature) -> Result<ReceiveFilter> {
    if g.vector().norm() == 0.0 {
        return Err(Error::Contract(
            "signature must be nonzero for max_sinr_filter".to_string(),
        ));
    }
    Ok(ReceiveFilter {
        f: o.solve(g.vector())?,
    })
}

/// Simulates `count` symbol intervals: each received vector is
/// `√(e_t/m) · b · g + interference + noise` with `b` drawn uniformly from
/// the unit-average-energy constellation.
#[allow(clippy::too_many_arguments)]
pub fn simulate_frame<R: Rng + ?Sized>(
    g: &SpaceTimeSignature,
    specs: &[InterfererSpec],
    n_rx: usize,
    code_len: usize,
    sigma2: f64,
    e_t: f64,
    m_tx: usize,
    order: ModulationOrder,
    count: usize,
    rng: &mut R,
) -> Result<SymbolFrame> {
    if !(e_t >= 0.0) {
        return Err(Error::Contract(format!(
            "transmit energy must be non-negative, got {e_t}"
        )));
    }
    if count == 0 {
        return Err(Error::Contract("frame length must be at least 1".to_string()));
    }
    if g.dim() != n_rx * code_len {
        return Err(Error::dimension(
            "simulate_frame",
            format!("signature has length {}, expected {}", g.dim(), n_rx * code_len),
        ));
    }
    let grid = QamGrid::new(order);
    let amp = Complex64::new((e_t / m_tx as f64).sqrt(), 0.0);
    let mut tx_labels = Vec::with_capacity(count);
    let mut tx_symbols = Vec::with_capacity(count);
    let mut rx = Vec::with_capacity(count);
    for _ in 0..count {
        let (label, b) = grid.draw(rng);
        let mut y = occupancy_snapshot(specs, n_rx, code_len, sigma2, rng)?;
        y.axpy(amp * b, g.vector(), Complex64::new(1.0, 0.0));
        tx_labels.push(label);
        tx_symbols.push(b);
        rx.push(y);
    }
    Ok(SymbolFrame {
        tx_labels,
        tx_symbols,
        rx,
    })
}

/// Genie-aided empirical SINR: signal power from the known-symbol
/// projection, interference-plus-noise power from the residuals
/// `z_k − fᴴg·√(e_t/m)·b_k`.
pub fn measure_empirical_sinr(
    frame: &SymbolFrame,
    filter: &ReceiveFilter,
    g: &SpaceTimeSignature,
    e_t: f64,
    m_tx: usize,
) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::Contract("frame must be nonempty".to_string()));
    }
    let gain = filter.f.dotc(g.vector()) * Complex64::new((e_t / m_tx as f64).sqrt(), 0.0);
    let mut sig = 0.0;
    let mut noise = 0.0;
    for (y, b) in frame.rx.iter().zip(frame.tx_symbols.iter()) {
        let z = filter.f.dotc(y);
        let expected = gain * b;
        sig += expected.norm_sqr();
        noise += (z - expected).norm_sqr();
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sig / noise)
}

/// Minimum-distance detection of the normalized filter outputs against the
/// Gray-labelled QAM grid; returns (symbol error rate, bit error rate).
pub fn detect_and_ber(
    frame: &SymbolFrame,
    filter: &ReceiveFilter,
    g: &SpaceTimeSignature,
    e_t: f64,
    m_tx: usize,
    order: ModulationOrder,
) -> Result<(f64, f64)> {
    if frame.is_empty() {
        return Err(Error::Contract("frame must be nonempty".to_string()));
    }
    let grid = QamGrid::new(order);
    let gain = filter.f.dotc(g.vector()) * Complex64::new((e_t / m_tx as f64).sqrt(), 0.0);
    let normalize = gain.norm_sqr() > 0.0;
    let mut symbol_errors = 0usize;
    let mut bit_errors = 0usize;
    for (k, y) in frame.rx.iter().enumerate() {
        let z = filter.f.dotc(y);
        let stat = if normalize { z / gain } else { z };
        let detected = grid.slice(stat);
        let truth = frame.tx_labels[k];
        if detected != truth {
            symbol_errors += 1;
            bit_errors += (detected ^ truth).count_ones() as usize;
        }
    }
    let n = frame.len() as f64;
    let bits = grid.bits_per_symbol() as f64;
    Ok((symbol_errors as f64 / n, bit_errors as f64 / (n * bits)))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

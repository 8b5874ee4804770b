//! Synthesis of the occupied-band interference environment and estimation
//! of the space-time occupancy autocorrelation matrix.
//!
//! The model is symbol-synchronous and chip-sampled: interferer symbols
//! align with the link's symbol intervals, so every interference snapshot
//! is `√E_i · b · (code_i ⊗ h_iᵀw_i)` with `b` a unit-average-energy 64-QAM
//! symbol, and the analytic autocorrelation is available in closed form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BeamWeights, CodeVector, ModulationOrder, OccupancyMatrix};
use crate::qam::QamGrid;
use crate::rng::{chacha, complex_normal};

/// Loading factor used by the automatic diagonal-loading policy:
/// `AUTO_LOADING_FACTOR · trace(Ô) / (N·L)`.
pub const AUTO_LOADING_FACTOR: f64 = 1e-6;

/// Default snapshot count for estimation experiments: `4 · NL · 10`.
pub fn default_snapshot_count(dim: usize) -> usize {
    40 * dim
}

// ---------------------------------------------------------------------------
// Interferer specification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterfererKind {
    /// Symbol-long pulse occupying the band; its chip-rate projection is
    /// the constant vector `(1, …, 1)/√L`.
    Narrowband,
    /// Spread-spectrum co-channel link with its own fixed quaternary code.
    SpreadSpectrum,
}

impl InterfererKind {
    pub fn label(self) -> &'static str {
        match self {
            InterfererKind::Narrowband => "narrowband",
            InterfererKind::SpreadSpectrum => "spread_spectrum",
        }
    }
}

/// One co-channel interferer as sensed by our receive array.
#[derive(Clone, Debug)]
pub struct InterfererSpec {
    pub kind: InterfererKind,
    /// Energy per interferer symbol over N0, in dB.
    pub e_i_db: f64,
    w_i: DVector<Complex64>,
    h_i: DMatrix<Complex64>,
    code_i: DVector<Complex64>,
    pub seed: u64,
}

impl InterfererSpec {
    pub fn new(
        kind: InterfererKind,
        e_i_db: f64,
        w_i: DVector<Complex64>,
        h_i: DMatrix<Complex64>,
        code_i: DVector<Complex64>,
        seed: u64,
    ) -> Result<Self> {
        if !e_i_db.is_finite() {
            return Err(Error::Contract("interferer energy must be finite".to_string()));
        }
        let m_i = w_i.len();
        if h_i.nrows() != m_i {
            return Err(Error::dimension(
                "interferer spec",
                format!("weights have {} entries but channel has {} rows", m_i, h_i.nrows()),
            ));
        }
        linalg::ensure_finite_mat("interferer channel", &h_i)?;
        linalg::ensure_finite_vec("interferer weights", &w_i)?;
        linalg::ensure_finite_vec("interferer code", &code_i)?;
        let norm_sq = w_i.norm_squared();
        if (norm_sq - m_i as f64).abs() > 1e-8 * m_i as f64 {
            return Err(Error::Contract(format!(
                "interferer weights must satisfy ‖w_i‖² = {m_i}, got {norm_sq}"
            )));
        }
        if (code_i.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(
                "interferer chip signature must be unit norm".to_string(),
            ));
        }
        // full row rank of h_i through the spectrum of h_i·h_iᴴ
        let gram = &h_i * h_i.adjoint();
        let (vals, _) = linalg::hermitian_eigen("interferer gram", &gram)?;
        if !(vals[0] > 1e-10 * vals[vals.len() - 1]) {
            return Err(Error::Contract(
                "interferer channel is rank deficient".to_string(),
            ));
        }
        Ok(InterfererSpec {
            kind,
            e_i_db,
            w_i,
            h_i,
            code_i,
            seed,
        })
    }

    /// Draws the interferer's channel, beam weights, and (for the
    /// spread-spectrum kind) quaternary code from its seed.
    pub fn draw(
        kind: InterfererKind,
        e_i_db: f64,
        m_i: usize,
        n_rx: usize,
        code_len: usize,
        seed: u64,
    ) -> Result<Self> {
        if m_i == 0 || n_rx == 0 || code_len == 0 {
            return Err(Error::Contract(
                "interferer dimensions must be positive".to_string(),
            ));
        }
        if m_i > n_rx {
            return Err(Error::Contract(format!(
                "interferer antenna count {m_i} exceeds receive antennas {n_rx}"
            )));
        }
        let mut rng = chacha(seed);
        let h_i = DMatrix::from_fn(m_i, n_rx, |_, _| complex_normal(&mut rng, 1.0));
        let raw_w = DVector::from_fn(m_i, |_, _| complex_normal(&mut rng, 1.0));
        let w_i = BeamWeights::from_unnormalized(&raw_w)?.vector().clone();
        let code_i = match kind {
            InterfererKind::Narrowband => CodeVector::constant(code_len)?.as_vector(),
            InterfererKind::SpreadSpectrum => CodeVector::random(code_len, &mut rng)?.as_vector(),
        };
        InterfererSpec::new(kind, e_i_db, w_i, h_i, code_i, seed)
    }

    pub fn e_i_linear(&self) -> f64 {
        10f64.powf(self.e_i_db / 10.0)
    }

    /// Effective space-time signature `g_i = code_i ⊗ (h_iᵀ w_i)`.
    pub fn signature(&self) -> DVector<Complex64> {
        let steered = self.h_i.transpose() * &self.w_i;
        let mut out = DVector::zeros(self.code_i.len() * steered.len());
        linalg::kron_into(self.code_i.as_slice(), steered.as_slice(), &mut out);
        out
    }

    /// Same interferer (channel, weights, code) at a different energy;
    /// used by sweeps that scale `E_i` over a fixed interference subspace.
    pub fn with_e_i_db(&self, e_i_db: f64) -> Self {
        InterfererSpec {
            e_i_db,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.code_i.len() * self.h_i.ncols()
    }
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

/// A batch of per-symbol interference-plus-noise vectors.
#[derive(Clone, Debug)]
pub struct SnapshotBatch {
    snapshots: Vec<DVector<Complex64>>,
}

impl SnapshotBatch {
    pub fn new(snapshots: Vec<DVector<Complex64>>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Contract("snapshot batch must be nonempty".to_string()));
        }
        let dim = snapshots[0].len();
        for (i, s) in snapshots.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::dimension(
                    "snapshot batch",
                    format!("snapshot {i} has length {}, expected {dim}", s.len()),
                ));
            }
            linalg::ensure_finite_vec("snapshot", s)?;
        }
        Ok(SnapshotBatch { snapshots })
    }

    pub fn count(&self) -> usize {
        self.snapshots.len()
    }

    pub fn dim(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn snapshots(&self) -> &[DVector<Complex64>] {
        &self.snapshots
    }
}

/// White-noise space-time snapshot: i.i.d. CN(0, sigma2) per component.
pub fn noise_snapshot<R: Rng + ?Sized>(
    n_rx: usize,
    code_len: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if n_rx == 0 || code_len == 0 {
        return Err(Error::dimension("noise_snapshot", "dimensions must be positive"));
    }
    Ok(DVector::from_fn(n_rx * code_len, |_, _| {
        complex_normal(rng, sigma2)
    }))
}

/// One interferer's contribution for one symbol interval:
/// `√E_i · b · g_i` with `b` drawn uniformly from unit-average-energy 64-QAM.
pub fn interferer_snapshot<R: Rng + ?Sized>(
    spec: &InterfererSpec,
    rng: &mut R,
) -> DVector<Complex64> {
    let grid = QamGrid::new(ModulationOrder::Q64);
    let (_, b) = grid.draw(rng);
    let amp = spec.e_i_linear().sqrt();
    spec.signature() * (b * amp)
}

/// Total interference-plus-noise snapshot for one symbol interval.
pub fn occupancy_snapshot<R: Rng + ?Sized>(
    specs: &[InterfererSpec],
    n_rx: usize,
    code_len: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    let mut o = noise_snapshot(n_rx, code_len, sigma2, rng)?;
    for spec in specs {
        if spec.dim() != o.len() {
            return Err(Error::dimension(
                "occupancy_snapshot",
                format!("interferer dimension {} vs {}", spec.dim(), o.len()),
            ));
        }
        o += interferer_snapshot(spec, rng);
    }
    Ok(o)
}

// ---------------------------------------------------------------------------
// Autocorrelation
// ---------------------------------------------------------------------------

/// Sample estimate `(1/S)·Σ o oᴴ + loading·I` of the occupancy
/// autocorrelation; Hermitian by construction.
pub fn estimate_occupancy(batch: &SnapshotBatch, loading: f64) -> Result<OccupancyMatrix> {
    if !(loading >= 0.0) {
        return Err(Error::Contract(format!(
            "diagonal loading must be non-negative, got {loading}"
        )));
    }
    let dim = batch.dim();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    let one = Complex64::new(1.0, 0.0);
    for o in batch.snapshots() {
        acc.gerc(one, o, o, one);
    }
    let mut est = acc.scale(1.0 / batch.count() as f64);
    for i in 0..dim {
        est[(i, i)] += Complex64::new(loading, 0.0);
    }
    OccupancyMatrix::new(est)
}

/// Diagonal loading under the automatic policy:
/// `AUTO_LOADING_FACTOR · trace(Ô)/(N·L)` for the batch's raw estimate.
pub fn auto_loading(batch: &SnapshotBatch) -> f64 {
    let mean_energy: f64 = batch
        .snapshots()
        .iter()
        .map(|o| o.norm_squared())
        .sum::<f64>()
        / batch.count() as f64;
    AUTO_LOADING_FACTOR * mean_energy / batch.dim() as f64
}

/// Analytic occupancy autocorrelation under the symbol-synchronous model:
/// `Σ_i E_i · g_i g_iᴴ + sigma2 · I`.
pub fn true_occupancy(specs: &[InterfererSpec], sigma2: f64) -> Result<OccupancyMatrix> {
    if !(sigma2 > 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if specs.is_empty() {
        return Err(Error::Contract(
            "true_occupancy needs the space-time dimension; pass at least one interferer \
             or use a white OccupancyMatrix directly"
                .to_string(),
        ));
    }
    let dim = specs[0].dim();
    let mut o = DMatrix::<Complex64>::identity(dim, dim).scale(sigma2);
    for spec in specs {
        if spec.dim() != dim {
            return Err(Error::dimension(
                "true_occupancy",
                format!("interferer dimensions disagree: {} vs {dim}", spec.dim()),
            ));
        }
        let g = spec.signature();
        o.gerc(Complex64::new(spec.e_i_linear(), 0.0), &g, &g, Complex64::new(1.0, 0.0));
    }
    OccupancyMatrix::new(o)
}

/// Analytic occupancy for a known dimension, tolerating an empty
/// interferer list (pure noise).
pub fn true_occupancy_with_dim(
    specs: &[InterfererSpec],
    dim: usize,
    sigma2: f64,
) -> Result<OccupancyMatrix> {
    if specs.is_empty() {
        if !(sigma2 > 0.0) {
            return Err(Error::Contract(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        return OccupancyMatrix::new(DMatrix::identity(dim, dim).scale(sigma2));
    }
    if specs[0].dim() != dim {
        return Err(Error::dimension(
            "true_occupancy_with_dim",
            format!("interferer dimension {} vs requested {dim}", specs[0].dim()),
        ));
    }
    true_occupancy(specs, sigma2)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

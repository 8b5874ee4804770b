//! Domain types of the discrete MIMO link model and the analytic SINR and
//! energy relations evaluated on the space-time signature.
//!
//! All energies throughout the crate are expressed as multiples of the
//! noise floor N0 (noise variance defaults to 1), and SINR targets are
//! stored in dB at the configuration boundary and converted to linear
//! exactly once at construction.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, HpdFactor};
use crate::rng::complex_normal;

/// Relative tolerance on the `‖w‖² = M` beam-weight norm constraint.
pub const WEIGHT_NORM_REL_TOL: f64 = 1e-10;
/// Relative floor on the smallest eigenvalue of `H·Hᴴ` for rank checks.
pub const CHANNEL_RANK_REL_TOL: f64 = 1e-10;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

// ---------------------------------------------------------------------------
// Link configuration
// ---------------------------------------------------------------------------

/// Continuous-time pulse parameters carried as metadata only; the model
/// operates in the symbol-synchronous chip-sampled domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseMeta {
    pub roll_off: f64,
    pub chip_duration_s: f64,
    pub carrier_hz: f64,
}

impl Default for PulseMeta {
    fn default() -> Self {
        PulseMeta {
            roll_off: 0.25,
            chip_duration_s: 1.5e-10,
            carrier_hz: 900.0e6,
        }
    }
}

/// Constellation order of the link's digital modulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModulationOrder {
    Q4,
    Q16,
    Q64,
}

impl ModulationOrder {
    pub fn from_order(q: usize) -> Result<Self> {
        match q {
            4 => Ok(ModulationOrder::Q4),
            16 => Ok(ModulationOrder::Q16),
            64 => Ok(ModulationOrder::Q64),
            other => Err(Error::Contract(format!(
                "constellation order must be one of 4, 16, 64; got {other}"
            ))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            ModulationOrder::Q4 => 4,
            ModulationOrder::Q16 => 16,
            ModulationOrder::Q64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationOrder::Q4 => 2,
            ModulationOrder::Q16 => 4,
            ModulationOrder::Q64 => 6,
        }
    }
}

/// Static description of the MIMO link being shaped.
#[derive(Clone, Debug)]
pub struct LinkConfig {
    pub m_tx: usize,
    pub n_rx: usize,
    pub code_len: usize,
    pub constellation: ModulationOrder,
    pub gamma_db: f64,
    gamma_linear: f64,
    pub et_max: f64,
    pub pulse: PulseMeta,
}

impl LinkConfig {
    pub fn new(
        m_tx: usize,
        n_rx: usize,
        code_len: usize,
        constellation: ModulationOrder,
        gamma_db: f64,
        et_max: f64,
        pulse: PulseMeta,
    ) -> Result<Self> {
        if m_tx == 0 || n_rx == 0 {
            return Err(Error::Contract(
                "antenna counts must be positive".to_string(),
            ));
        }
        if n_rx < m_tx {
            // H*Hᵀ must be invertible, which requires rank(H) = M and N ≥ M
            return Err(Error::Contract(format!(
                "n_rx ({n_rx}) must be at least m_tx ({m_tx})"
            )));
        }
        if code_len == 0 {
            return Err(Error::Contract("code length must be at least 1".to_string()));
        }
        if !gamma_db.is_finite() {
            return Err(Error::Contract("gamma_db must be finite".to_string()));
        }
        if !(et_max > 0.0) || !et_max.is_finite() {
            return Err(Error::Contract(format!(
                "et_max must be positive and finite, got {et_max}"
            )));
        }
        Ok(LinkConfig {
            m_tx,
            n_rx,
            code_len,
            constellation,
            gamma_db,
            gamma_linear: db_to_linear(gamma_db),
            et_max,
            pulse,
        })
    }

    /// Target SINR in linear scale, converted once at construction.
    pub fn gamma_linear(&self) -> f64 {
        self.gamma_linear
    }

    /// Space-time dimension `N·L`.
    pub fn dim(&self) -> usize {
        self.n_rx * self.code_len
    }

    pub fn with_et_max(&self, et_max: f64) -> Result<Self> {
        LinkConfig::new(
            self.m_tx,
            self.n_rx,
            self.code_len,
            self.constellation,
            self.gamma_db,
            et_max,
            self.pulse,
        )
    }
}

// ---------------------------------------------------------------------------
// Channel
// ---------------------------------------------------------------------------

/// The `M×N` complex channel between transmit and receive arrays, full row
/// rank by contract.
#[derive(Clone, Debug)]
pub struct ChannelMatrix {
    h: DMatrix<Complex64>,
}

impl ChannelMatrix {
    pub fn new(h: DMatrix<Complex64>) -> Result<Self> {
        linalg::ensure_finite_mat("channel matrix", &h)?;
        let (m, n) = (h.nrows(), h.ncols());
        if m == 0 || n == 0 || n < m {
            return Err(Error::dimension(
                "channel matrix",
                format!("got {m}x{n}, need 1 <= M <= N"),
            ));
        }
        // rank(H) = M checked through the spectrum of H·Hᴴ
        let gram = &h * h.adjoint();
        let (vals, _) = linalg::hermitian_eigen("H·Hᴴ", &gram)?;
        let largest = vals[vals.len() - 1];
        let smallest = vals[0];
        if !(smallest > CHANNEL_RANK_REL_TOL * largest) {
            return Err(Error::Contract(format!(
                "channel matrix is rank deficient (eigenvalue spread {smallest:.3e} / {largest:.3e})"
            )));
        }
        Ok(ChannelMatrix { h })
    }

    /// Draws an i.i.d. CN(0,1) Rayleigh channel.
    pub fn draw<R: Rng + ?Sized>(m_tx: usize, n_rx: usize, rng: &mut R) -> Result<Self> {
        let h = DMatrix::from_fn(m_tx, n_rx, |_, _| complex_normal(rng, 1.0));
        ChannelMatrix::new(h)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn m_tx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_rx(&self) -> usize {
        self.h.ncols()
    }
}

// ---------------------------------------------------------------------------
// Quaternary code
// ---------------------------------------------------------------------------

/// One chip of the quaternary alphabet, stored symbolically so codes are
/// exact and never accumulate rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chip {
    PlusOne,
    MinusOne,
    PlusJ,
    MinusJ,
}

impl Chip {
    /// Enumeration order used by the candidate search.
    pub fn from_index(k: u8) -> Chip {
        match k & 3 {
            0 => Chip::PlusOne,
            1 => Chip::MinusOne,
            2 => Chip::PlusJ,
            _ => Chip::MinusJ,
        }
    }

    /// The unit alphabet point before the `1/√L` scale.
    pub fn unit(self) -> Complex64 {
        match self {
            Chip::PlusOne => Complex64::new(1.0, 0.0),
            Chip::MinusOne => Complex64::new(-1.0, 0.0),
            Chip::PlusJ => Complex64::new(0.0, 1.0),
            Chip::MinusJ => Complex64::new(0.0, -1.0),
        }
    }

    /// (Re, Im) of the unit point as integers, for lexicographic ordering.
    pub fn lex_key(self) -> (i8, i8) {
        match self {
            Chip::PlusOne => (1, 0),
            Chip::MinusOne => (-1, 0),
            Chip::PlusJ => (0, 1),
            Chip::MinusJ => (0, -1),
        }
    }

    /// Multiplication by `+j`.
    pub fn rotated_j(self) -> Chip {
        match self {
            Chip::PlusOne => Chip::PlusJ,
            Chip::PlusJ => Chip::MinusOne,
            Chip::MinusOne => Chip::MinusJ,
            Chip::MinusJ => Chip::PlusOne,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Chip::PlusOne => "+1",
            Chip::MinusOne => "-1",
            Chip::PlusJ => "+j",
            Chip::MinusJ => "-j",
        }
    }

    pub fn parse(token: &str) -> Result<Chip> {
        match token.trim() {
            "+1" | "1" => Ok(Chip::PlusOne),
            "-1" => Ok(Chip::MinusOne),
            "+j" | "j" => Ok(Chip::PlusJ),
            "-j" => Ok(Chip::MinusJ),
            other => Err(Error::Contract(format!(
                "invalid chip token `{other}` (expected +1, -1, +j, -j)"
            ))),
        }
    }
}

/// Length-`L` pulse code with every chip in `{±1/√L, ±j/√L}` and unit norm
/// by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeVector {
    chips: Vec<Chip>,
}

impl CodeVector {
    pub fn new(chips: Vec<Chip>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::dimension("code vector", "length must be >= 1"));
        }
        Ok(CodeVector { chips })
    }

    /// The all-`+1/√L` code.
    pub fn constant(code_len: usize) -> Result<Self> {
        CodeVector::new(vec![Chip::PlusOne; code_len])
    }

    /// Uniform random code.
    pub fn random<R: Rng + ?Sized>(code_len: usize, rng: &mut R) -> Result<Self> {
        let chips = (0..code_len)
            .map(|_| Chip::from_index(rng.random_range(0..4u8)))
            .collect();
        CodeVector::new(chips)
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn chips(&self) -> &[Chip] {
        &self.chips
    }

    /// Chip-sampled vector `s` with `‖s‖ = 1`.
    pub fn as_vector(&self) -> DVector<Complex64> {
        let scale = 1.0 / (self.chips.len() as f64).sqrt();
        DVector::from_iterator(
            self.chips.len(),
            self.chips.iter().map(|&ch| ch.unit() * scale),
        )
    }

    /// The code rotated by a global phase of `+j`.
    pub fn rotated_j(&self) -> CodeVector {
        CodeVector {
            chips: self.chips.iter().map(|c| c.rotated_j()).collect(),
        }
    }

    /// Lexicographic order over the (Re, Im) chip encodings.
    pub fn lex_cmp(&self, other: &CodeVector) -> Ordering {
        for (a, b) in self.chips.iter().zip(other.chips.iter()) {
            let ord = a.lex_key().cmp(&b.lex_key());
            if ord != Ordering::Equal {
                return ord;
            }
        }
        self.chips.len().cmp(&other.chips.len())
    }

    pub fn display(&self) -> String {
        self.chips
            .iter()
            .map(|c| c.symbol())
            .collect::<Vec<_>>()
            .join(",")
    }
}

// ---------------------------------------------------------------------------
// Beam weights
// ---------------------------------------------------------------------------

/// Per-antenna complex gains under the `‖w‖² = M` norm constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamWeights {
    w: DVector<Complex64>,
}

impl BeamWeights {
    pub fn new(w: DVector<Complex64>) -> Result<Self> {
        linalg::ensure_finite_vec("beam weights", &w)?;
        if w.is_empty() {
            return Err(Error::dimension("beam weights", "length must be >= 1"));
        }
        let m = w.len() as f64;
        let norm_sq = w.norm_squared();
        if (norm_sq - m).abs() > WEIGHT_NORM_REL_TOL * m {
            return Err(Error::Contract(format!(
                "beam weight norm constraint violated: ‖w‖² = {norm_sq}, expected {m}"
            )));
        }
        Ok(BeamWeights { w })
    }

    /// Scales an arbitrary nonzero vector onto the constraint sphere
    /// `‖w‖² = M`.
    pub fn from_unnormalized(raw: &DVector<Complex64>) -> Result<Self> {
        linalg::ensure_finite_vec("beam weights", raw)?;
        if raw.is_empty() {
            return Err(Error::dimension("beam weights", "length must be >= 1"));
        }
        let norm = raw.norm();
        if norm <= 1e-12 {
            return Err(Error::Degenerate(
                "weight vector is numerically zero".to_string(),
            ));
        }
        let scale = (raw.len() as f64).sqrt() / norm;
        Ok(BeamWeights {
            w: raw * Complex64::new(scale, 0.0),
        })
    }

    /// The all-ones weight vector (already on the constraint sphere).
    pub fn uniform(m_tx: usize) -> Result<Self> {
        BeamWeights::new(DVector::from_element(m_tx, Complex64::new(1.0, 0.0)))
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.w
    }

    pub fn m_tx(&self) -> usize {
        self.w.len()
    }
}

// ---------------------------------------------------------------------------
// Space-time signature and occupancy
// ---------------------------------------------------------------------------

/// The length-`NL` vector `s ⊗ (Hᵀw)` describing how one symbol appears
/// across receive antennas and chips.
#[derive(Clone, Debug)]
pub struct SpaceTimeSignature {
    g: DVector<Complex64>,
}

impl SpaceTimeSignature {
    pub(crate) fn from_raw(g: DVector<Complex64>) -> Self {
        SpaceTimeSignature { g }
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }
}

/// The `NL×NL` Hermitian space-time interference-plus-noise autocorrelation.
///
/// Construction enforces the Hermitian contract and symmetrizes exactly;
/// the positive-definite contract is enforced when a solve is requested
/// (a noise floor or diagonal loading guarantees it in practice, but e.g.
/// a single-snapshot estimate is legitimately rank deficient).
#[derive(Clone, Debug)]
pub struct OccupancyMatrix {
    o: DMatrix<Complex64>,
    factor: Option<HpdFactor>,
}

impl OccupancyMatrix {
    pub fn new(o: DMatrix<Complex64>) -> Result<Self> {
        linalg::ensure_finite_mat("occupancy matrix", &o)?;
        if !o.is_square() || o.is_empty() {
            return Err(Error::dimension(
                "occupancy matrix",
                format!("got {}x{}", o.nrows(), o.ncols()),
            ));
        }
        if !linalg::is_hermitian(&o) {
            return Err(Error::NotHermitian {
                matrix: "occupancy matrix".to_string(),
            });
        }
        let sym = (&o + o.adjoint()).scale(0.5);
        let factor = HpdFactor::new("occupancy matrix", &sym).ok();
        Ok(OccupancyMatrix { o: sym, factor })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.o
    }

    pub fn dim(&self) -> usize {
        self.o.nrows()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.factor.is_some()
    }

    /// The cached Cholesky factor, or a singularity error.
    pub fn factor(&self) -> Result<&HpdFactor> {
        self.factor.as_ref().ok_or_else(|| Error::Singular {
            matrix: "occupancy matrix".to_string(),
            estimate: f64::INFINITY,
        })
    }

    /// Applies `O⁻¹` to a vector.
    pub fn solve(&self, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if b.len() != self.dim() {
            return Err(Error::dimension(
                "occupancy solve",
                format!("matrix is {0}x{0} but rhs has length {1}", self.dim(), b.len()),
            ));
        }
        Ok(self.factor()?.solve_vec(b))
    }

    /// Whitened energy `gᴴ O⁻¹ g`.
    pub fn quad_form_inv(&self, g: &DVector<Complex64>) -> Result<f64> {
        if g.len() != self.dim() {
            return Err(Error::dimension(
                "occupancy quadratic form",
                format!("matrix is {0}x{0} but vector has length {1}", self.dim(), g.len()),
            ));
        }
        Ok(self.factor()?.quad_form_inv(g))
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Builds the space-time signature `g = s ⊗ (Hᵀw)`; block `l` equals
/// `s_l · (Hᵀw)`.
pub fn assemble_signature(
    s: &CodeVector,
    w: &BeamWeights,
    h: &ChannelMatrix,
) -> Result<SpaceTimeSignature> {
    if w.m_tx() != h.m_tx() {
        return Err(Error::dimension(
            "assemble_signature",
            format!("weights have {} entries but channel has {} tx antennas", w.m_tx(), h.m_tx()),
        ));
    }
    let steered = h.matrix().transpose() * w.vector();
    let g = linalg::kron(&s.as_vector(), &steered)?;
    Ok(SpaceTimeSignature::from_raw(g))
}

/// Output SINR of the max-SINR space-time receiver: `(e_t/m) · gᴴ O⁻¹ g`,
/// strictly linear in the transmit energy.
pub fn analytic_sinr(
    g: &SpaceTimeSignature,
    o: &OccupancyMatrix,
    e_t: f64,
    m_tx: usize,
) -> Result<f64> {
    if !(e_t >= 0.0) {
        return Err(Error::Contract(format!(
            "transmit energy must be non-negative, got {e_t}"
        )));
    }
    let quad = o.quad_form_inv(g.vector())?;
    Ok(e_t / m_tx as f64 * quad)
}

/// Total transmit energy required to meet a linear SINR target:
/// `γ·m / (gᴴ O⁻¹ g)`.
pub fn required_energy(
    g: &SpaceTimeSignature,
    o: &OccupancyMatrix,
    gamma: f64,
    m_tx: usize,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Contract(format!(
            "SINR target must be positive, got {gamma}"
        )));
    }
    if g.vector().norm() == 0.0 {
        return Err(Error::Contract(
            "signature must be nonzero for required_energy".to_string(),
        ));
    }
    let quad = o.quad_form_inv(g.vector())?;
    Ok(gamma * m_tx as f64 / quad)
}

/// Total transmit energy per symbol `e_s · Σ|w_m|²`; equals `e_s·M` under
/// the norm constraint.
pub fn total_energy(e_s: f64, w: &BeamWeights) -> Result<f64> {
    if !(e_s >= 0.0) {
        return Err(Error::Contract(format!(
            "per-antenna energy must be non-negative, got {e_s}"
        )));
    }
    Ok(e_s * w.vector().norm_squared())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

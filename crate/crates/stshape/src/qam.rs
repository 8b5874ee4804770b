//! Gray-coded square QAM grids, normalized to unit average symbol energy.
//!
//! Shared by the receiver (detection and BER counting) and the occupancy
//! synthesizer (interferer symbol streams).

use num_complex::Complex64;
use rand::Rng;

use crate::model::ModulationOrder;

/// Gray code of a level index.
pub fn gray_encode(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Inverse Gray code.
pub fn gray_decode(mut g: u32) -> u32 {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Square `Q`-QAM grid with per-axis Gray bit labels.
#[derive(Clone, Copy, Debug)]
pub struct QamGrid {
    side: u32,
    half_bits: u32,
    /// Per-axis amplitude step such that E[|symbol|²] = 1.
    scale: f64,
}

impl QamGrid {
    pub fn new(order: ModulationOrder) -> Self {
        let q = order.order() as u32;
        let side = (q as f64).sqrt() as u32;
        debug_assert_eq!(side * side, q);
        let half_bits = (order.bits_per_symbol() / 2) as u32;
        // unnormalized grid has average energy 2(Q−1)/3
        let scale = (3.0 / (2.0 * (q as f64 - 1.0))).sqrt();
        QamGrid { side, half_bits, scale }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        2 * self.half_bits
    }

    pub fn symbol_count(&self) -> u32 {
        self.side * self.side
    }

    /// Per-axis amplitude for a level index `0..side`.
    fn amplitude(&self, level: u32) -> f64 {
        (2.0 * level as f64 - (self.side as f64 - 1.0)) * self.scale
    }

    /// Constellation point for a bit label; the high half of the bits is
    /// Gray-mapped onto the in-phase axis, the low half onto quadrature.
    pub fn point(&self, label: u32) -> Complex64 {
        let i_bits = label >> self.half_bits;
        let q_bits = label & ((1 << self.half_bits) - 1);
        Complex64::new(
            self.amplitude(gray_decode(i_bits)),
            self.amplitude(gray_decode(q_bits)),
        )
    }

    /// Uniform random symbol; returns the bit label and the point.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, Complex64) {
        let label = rng.random_range(0..self.symbol_count());
        (label, self.point(label))
    }

    /// Nearest level index on one axis; exact minimum-distance on the
    /// uniform grid.
    fn slice_axis(&self, x: f64) -> u32 {
        let idx = ((x / self.scale + (self.side as f64 - 1.0)) / 2.0).round();
        idx.clamp(0.0, self.side as f64 - 1.0) as u32
    }

    /// Minimum-distance detection of `z`; returns the bit label.
    pub fn slice(&self, z: Complex64) -> u32 {
        let i_bits = gray_encode(self.slice_axis(z.re));
        let q_bits = gray_encode(self.slice_axis(z.im));
        (i_bits << self.half_bits) | q_bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chacha;

    #[test]
    fn gray_roundtrip() {
        for i in 0..64 {
            assert_eq!(gray_decode(gray_encode(i)), i);
        }
        // adjacent levels differ in exactly one bit
        for i in 0..7u32 {
            let diff = gray_encode(i) ^ gray_encode(i + 1);
            assert_eq!(diff.count_ones(), 1);
        }
    }

    #[test]
    fn grids_have_unit_average_energy() {
        for order in [ModulationOrder::Q4, ModulationOrder::Q16, ModulationOrder::Q64] {
            let grid = QamGrid::new(order);
            let total: f64 = (0..grid.symbol_count())
                .map(|lbl| grid.point(lbl).norm_sqr())
                .sum();
            let avg = total / grid.symbol_count() as f64;
            assert!((avg - 1.0).abs() < 1e-12, "{order:?} avg energy {avg}");
        }
    }

    #[test]
    fn slice_recovers_every_label_noiselessly() {
        for order in [ModulationOrder::Q4, ModulationOrder::Q16, ModulationOrder::Q64] {
            let grid = QamGrid::new(order);
            for lbl in 0..grid.symbol_count() {
                assert_eq!(grid.slice(grid.point(lbl)), lbl);
            }
        }
    }

    #[test]
    fn slice_is_minimum_distance() {
        let grid = QamGrid::new(ModulationOrder::Q64);
        let mut rng = chacha(31);
        for _ in 0..2000 {
            let z = crate::rng::complex_normal(&mut rng, 2.0);
            let picked = grid.slice(z);
            let d_picked = (grid.point(picked) - z).norm_sqr();
            for lbl in 0..grid.symbol_count() {
                let d = (grid.point(lbl) - z).norm_sqr();
                assert!(d_picked <= d + 1e-12);
            }
        }
    }

    #[test]
    fn draw_is_roughly_uniform() {
        let grid = QamGrid::new(ModulationOrder::Q4);
        let mut rng = chacha(32);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            let (lbl, _) = grid.draw(&mut rng);
            counts[lbl as usize] += 1;
        }
        for &c in &counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "counts {counts:?}");
        }
    }
}

//! The pricing equation as a particle in a box.
//!
//! On a range [support, resistance] with Dirichlet walls ψ(a) = ψ(b) = 0 the
//! operator H = −h² d²/dS² + V(S) is discretized with central second
//! differences on `points` uniformly spaced interior nodes. The resulting
//! symmetric tridiagonal matrix is handed to [`crate::tridiag`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::tridiag::SymTridiagonal;

/// Default number of interior grid points.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// The box [lower, upper] discretized with `points` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceBox {
    lower: f64,
    upper: f64,
    points: usize,
}

impl PriceBox {
    /// `lower < upper` and at least three interior points. Positivity of
    /// `lower` is only required once the potential is switched on; see
    /// [`discretize`].
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::argument("box", "walls must be finite"));
        }
        if lower >= upper {
            return Err(Error::argument(
                "box",
                format!("need lower < upper, got [{lower}, {upper}]"),
            ));
        }
        if points < 3 {
            return Err(Error::argument(
                "points",
                format!("need at least 3 interior points, got {points}"),
            ));
        }
        Ok(Self {
            lower,
            upper,
            points,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Grid spacing (b − a)/(N + 1).
    pub fn spacing(&self) -> f64 {
        self.width() / (self.points + 1) as f64
    }

    /// Interior abscissae a + iΔs, i = 1..=N.
    pub fn grid(&self) -> Vec<f64> {
        let ds = self.spacing();
        (1..=self.points)
            .map(|i| self.lower + i as f64 * ds)
            .collect()
    }
}

/// Build the finite-difference operator for the pricing equation.
///
/// With `flat_potential` the 1/S² term is dropped, leaving the free particle
/// in a box; that mode accepts boxes touching or crossing the origin.
pub fn discretize(
    params: &MarketParams,
    price_box: &PriceBox,
    flat_potential: bool,
) -> Result<SymTridiagonal> {
    if !flat_potential && price_box.lower <= 0.0 {
        return Err(Error::Domain(format!(
            "the 1/S² potential needs a box with lower wall > 0, got {}",
            price_box.lower
        )));
    }
    let h2 = params.planck_coefficient();
    let ds = price_box.spacing();
    let kinetic = h2 / (ds * ds);
    let diag = price_box
        .grid()
        .into_iter()
        .map(|s| {
            let v = if flat_potential { 0.0 } else { 1.0 / (s * s) };
            2.0 * kinetic + v
        })
        .collect();
    let off = vec![-kinetic; price_box.points - 1];
    SymTridiagonal::new(diag, off)
}

/// Lowest part of the spectrum of the discretized pricing operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSolution {
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// One vector per eigenvalue, normalized so Σ ψ(sᵢ)² Δs = 1, first
    /// nonzero component positive.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub flat_potential: bool,
}

impl EigenSolution {
    /// Discrete L² inner product Σ ψₘ ψₙ Δs.
    pub fn inner(&self, m: usize, n: usize) -> f64 {
        let dot: f64 = self.eigenfunctions[m]
            .iter()
            .zip(&self.eigenfunctions[n])
            .map(|(a, b)| a * b)
            .sum();
        dot * self.spacing
    }
}

/// The `count` smallest eigenpairs on `price_box`.
pub fn eigen_spectrum(
    params: &MarketParams,
    price_box: &PriceBox,
    count: usize,
    flat_potential: bool,
) -> Result<EigenSolution> {
    if count == 0 || count > price_box.points {
        return Err(Error::argument(
            "count",
            format!(
                "must be between 1 and the number of grid points ({}), got {count}",
                price_box.points
            ),
        ));
    }
    let op = discretize(params, price_box, flat_potential)?;
    let (eigenvalues, vectors) = op.smallest_eigenpairs(count)?;
    let spacing = price_box.spacing();
    let scale = 1.0 / spacing.sqrt();
    let eigenfunctions = vectors
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * scale).collect())
        .collect();
    log::debug!(
        "eigen_spectrum: N={} count={count} flat={flat_potential} lowest={:e}",
        price_box.points,
        eigenvalues[0]
    );
    Ok(EigenSolution {
        grid: price_box.grid(),
        spacing,
        eigenvalues,
        eigenfunctions,
        flat_potential,
    })
}

/// Distance from the market's λ = r/σ to the nearest computed eigenvalue.
pub fn resonance_gap(params: &MarketParams, solution: &EigenSolution) -> f64 {
    nearest_gap(params.lambda(), &solution.eigenvalues)
}

fn nearest_gap(lambda: f64, eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|e| (e - lambda).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Number of strict sign changes along a sampled function, zeros skipped.
pub fn sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            changes += 1;
        }
        last = v;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> MarketParams {
        MarketParams::new(0.05, 0.2).unwrap()
    }

    #[test]
    fn box_validation() {
        assert!(PriceBox::new(1.0, 1.0, 10).is_err());
        assert!(PriceBox::new(2.0, 1.0, 10).is_err());
        assert!(PriceBox::new(0.0, 1.0, 2).is_err());
        assert!(PriceBox::new(0.0, 1.0, 3).is_ok());
    }

    #[test]
    fn flat_stencil_unit_coefficient() {
        // h² = 1 needs σ⁴ = r(σ² + r); with σ = 1 that is r² + r − 1 = 0.
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let p = MarketParams::new(r, 1.0).unwrap();
        assert!((p.planck_coefficient() - 1.0).abs() < 1e-15);
        let b = PriceBox::new(0.0, 1.0, 3).unwrap();
        let op = discretize(&p, &b, true).unwrap();
        for d in op.diag() {
            assert!((d - 32.0).abs() < 1e-12);
        }
        for e in op.off() {
            assert!((e + 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stencil_with_potential_matches_hand_evaluation() {
        let b = PriceBox::new(1.0, 2.0, 3).unwrap();
        let op = discretize(&params(), &b, false).unwrap();
        let h2 = 0.0016 / 0.0045;
        let want: Vec<f64> = [1.25f64, 1.5, 1.75]
            .iter()
            .map(|s| 2.0 * h2 / 0.0625 + 1.0 / (s * s))
            .collect();
        for (got, want) in op.diag().iter().zip(&want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        for e in op.off() {
            assert!((e + h2 / 0.0625).abs() < 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(op.get(i, j), op.get(j, i));
            }
        }
    }

    #[test]
    fn potential_needs_positive_lower_wall() {
        let b = PriceBox::new(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            discretize(&params(), &b, false),
            Err(Error::Domain(_))
        ));
        let b = PriceBox::new(-1.0, 1.0, 10).unwrap();
        assert!(discretize(&params(), &b, true).is_ok());
    }

    #[test]
    fn count_larger_than_grid_is_rejected() {
        let b = PriceBox::new(1.0, 2.0, 5).unwrap();
        assert!(matches!(
            eigen_spectrum(&params(), &b, 6, false),
            Err(Error::Argument { .. })
        ));
        assert!(eigen_spectrum(&params(), &b, 0, false).is_err());
    }

    #[test]
    fn flat_box_matches_discrete_dispersion() {
        // The stencil's exact eigenvalues are 4h²/Δs² sin²(nπΔs/2L).
        let p = params();
        let b = PriceBox::new(0.0, 1.0, 200).unwrap();
        let sol = eigen_spectrum(&p, &b, 5, true).unwrap();
        let h2 = p.planck_coefficient();
        let ds = b.spacing();
        for (n, got) in sol.eigenvalues.iter().enumerate() {
            let k = (n + 1) as f64;
            let want = 4.0 * h2 / (ds * ds) * (k * PI * ds / 2.0).sin().powi(2);
            assert!((got - want).abs() / want < 1e-11, "n={k}: {got} vs {want}");
        }
    }

    #[test]
    fn eigenvalues_exceed_minimum_potential() {
        let b = PriceBox::new(1.0, 2.0, 400).unwrap();
        let sol = eigen_spectrum(&params(), &b, 6, false).unwrap();
        assert!(sol.eigenvalues.iter().all(|&e| e > 0.25));
        assert!(sol.eigenvalues.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn normalization_and_sign_convention() {
        let b = PriceBox::new(1.0, 2.0, 300).unwrap();
        let sol = eigen_spectrum(&params(), &b, 4, false).unwrap();
        for n in 0..4 {
            assert!((sol.inner(n, n) - 1.0).abs() < 1e-10);
            let first = sol.eigenfunctions[n].iter().find(|v| **v != 0.0).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn resonance_gap_examples() {
        assert!((nearest_gap(0.25, &[0.2, 0.3]) - 0.05).abs() < 1e-15);
        assert_eq!(nearest_gap(0.25, &[0.1, 0.25, 0.4]), 0.0);
        assert_eq!(nearest_gap(0.25, &[1.0]), 0.75);
    }

    #[test]
    fn resonance_gap_on_solution() {
        let b = PriceBox::new(1.0, 2.0, 50).unwrap();
        let p = params();
        let sol = eigen_spectrum(&p, &b, 3, false).unwrap();
        let want = sol
            .eigenvalues
            .iter()
            .map(|e| (e - 0.25).abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(resonance_gap(&p, &sol), want);
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(sign_changes(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(sign_changes(&[1.0, -2.0, 3.0]), 2);
        assert_eq!(sign_changes(&[1.0, 0.0, -1.0]), 1);
        assert_eq!(sign_changes(&[]), 0);
    }
}

//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The 15-point Kronrod rule only samples the open interval, so integrands
//! with integrable endpoint singularities never get evaluated at the
//! singular point. The interval with the largest error estimate is bisected
//! until the summed error meets the relative tolerance or the evaluation
//! budget is spent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Abscissae and weights from QUADPACK's qk15.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Evaluation budget used when callers do not pick one.
pub const DEFAULT_MAX_EVALUATIONS: usize = 1_000_000;

/// Converged integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// ∫ₐᵇ f with relative accuracy `rel_tol`, using at most `max_evaluations`
/// calls of `f`.
///
/// Fails with [`Error::Quadrature`] carrying the best estimate when the
/// budget runs out, and with [`Error::Numeric`] if `f` returns a non-finite
/// value.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_evaluations: usize,
) -> Result<Integral> {
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(Error::argument(
            "tolerance",
            format!("must be > 0, got {rel_tol}"),
        ));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::argument("interval", "endpoints must be finite"));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut evaluations = 15;
    let first = kronrod15(&mut f, a, b);
    let mut total = first.value;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        if !(total.is_finite() && total_error.is_finite()) {
            return Err(Error::Numeric {
                message: format!("integrand is not finite on [{a}, {b}]"),
            });
        }
        if total_error <= rel_tol * total.abs() || total_error <= f64::MIN_POSITIVE {
            return Ok(Integral {
                value: total,
                error: total_error,
                evaluations,
            });
        }
        if evaluations + 30 > max_evaluations {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_error,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Segment cannot be split further in floating point.
            return Err(Error::Quadrature {
                estimate: total,
                error: total_error,
                evaluations,
            });
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Recompute the sums now and then so cancellation cannot drift.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
}

//! Adaptive Gauss-Kronrod quadrature and the two endpoint-singular integral
//! kinds that appear in the length and mass formulas.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, Error, Result};
use crate::model::{Branch, HamiltonianLevel, Nonlinearity};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_SUBDIVISIONS: usize = 2000;

/// Within this distance of the peak the upper-edge integral is replaced by
/// its leading-order closed form.
pub const NEAR_PEAK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Accept once `error <= tol * (1 + |value|)`.
    pub tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: DEFAULT_TOL,
            max_subdivisions: MAX_SUBDIVISIONS,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let resasc = resasc * h;
    let resabs = resabs * h;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Segment {
        a,
        b,
        value: resk * half,
        error,
    }
}

/// Globally adaptive G7-K15 quadrature of `f` over `[a, b]`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let first = kronrod15(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::NonConvergence(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;
    while total_err > opts.tol * (1.0 + total.abs()) {
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::NonConvergence(format!(
                "quadrature on [{a}, {b}] stalled at error {total_err:e} after {subdivisions} subdivisions"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine precision; accept what we have
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        if !total.is_finite() {
            return Err(Error::NonConvergence(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    // re-sum to shed accumulated rounding from the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult {
        value,
        error,
        subdivisions,
    })
}

/// The compact-edge integral `int_z^T h(t) / sqrt(f(t) - c) dt` with
/// `c = (1 - theta^2) f(z)` and `T` the upper-branch root of `f(T) = c`.
#[derive(Debug, Clone, Copy)]
pub struct UpperEdge<'a> {
    nl: &'a Nonlinearity,
    theta: f64,
    z: f64,
    level: f64,
    turning: f64,
}

impl<'a> UpperEdge<'a> {
    pub fn new(nl: &'a Nonlinearity, theta: f64, z: f64) -> Result<Self> {
        if !(z > 0.0 && z < nl.peak()) {
            return domain(format!("z must lie in (0, {}), got {z}", nl.peak()));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return domain(format!("theta must be positive, got {theta}"));
        }
        let level = HamiltonianLevel::new(nl, theta, z).value;
        let turning = nl.branch_inverse(Branch::Upper, level)?;
        Ok(UpperEdge {
            nl,
            theta,
            z,
            level,
            turning,
        })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `T = f_2^{-1}((1 - theta^2) f(z))`.
    pub fn turning_point(&self) -> f64 {
        self.turning
    }

    pub fn is_near_peak(&self) -> bool {
        self.nl.peak() - self.z < NEAR_PEAK
    }

    fn split(&self) -> f64 {
        0.5 * (self.z + self.turning)
    }

    /// `int_z^T h / sqrt(f - c)`.
    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H, opts: QuadOptions) -> Result<f64> {
        let nl = self.nl;
        if self.is_near_peak() {
            let peak = nl.peak();
            return Ok(h(peak) * 2.0 * self.theta * (peak - self.z).sqrt() / nl.df(peak).abs().sqrt());
        }
        let m = self.split();
        let t_end = self.turning;
        let c = self.level;
        // direct difference below the hump, increment from T above it
        let radicand = |t: f64| {
            if t <= 1.0 {
                nl.f(t) - c
            } else {
                nl.f_diff(t_end, t - t_end)
            }
        };
        let lower = gauss_kronrod(
            |u| {
                let t = u.exp();
                let r = radicand(t);
                h(t) * t / r.sqrt()
            },
            self.z.ln(),
            m.ln(),
            opts,
        )?;
        let slope = nl.df(t_end).abs();
        let upper = gauss_kronrod(
            |s| {
                let t = t_end - s * s;
                let r = nl.f_diff(t_end, -s * s);
                if r <= 0.0 {
                    2.0 * h(t) / slope.sqrt()
                } else {
                    2.0 * s * h(t) / r.sqrt()
                }
            },
            0.0,
            (t_end - m).sqrt(),
            opts,
        )?;
        Ok(lower.value + upper.value)
    }

    /// `int_z^T h * sqrt(f - c)`, the companion used by the integration by
    /// parts identities.
    pub fn integrate_sqrt_weight<H: Fn(f64) -> f64>(&self, h: H, opts: QuadOptions) -> Result<f64> {
        let nl = self.nl;
        let m = self.split();
        let t_end = self.turning;
        let c = self.level;
        // direct difference below the hump, increment from T above it
        let radicand = |t: f64| {
            if t <= 1.0 {
                nl.f(t) - c
            } else {
                nl.f_diff(t_end, t - t_end)
            }
        };
        let lower = gauss_kronrod(
            |t| h(t) * radicand(t).max(0.0).sqrt(),
            self.z,
            m,
            opts,
        )?;
        let upper = gauss_kronrod(
            |s| {
                let r = nl.f_diff(t_end, -s * s).max(0.0);
                2.0 * s * h(t_end - s * s) * r.sqrt()
            },
            0.0,
            (t_end - m).sqrt(),
            opts,
        )?;
        Ok(lower.value + upper.value)
    }
}

/// `int_z^T h(t) / sqrt(f(t) - (1 - theta^2) f(z)) dt`.
pub fn integrate_upper_edge<H: Fn(f64) -> f64>(
    nl: &Nonlinearity,
    theta: f64,
    z: f64,
    h: H,
    opts: QuadOptions,
) -> Result<f64> {
    UpperEdge::new(nl, theta, z)?.integrate(h, opts)
}

/// `int_0^z h(t) / sqrt(f(t)) dt` for `z < peak`; `h(t)/sqrt(f(t))` must be
/// integrable at the origin.
pub fn soliton_tail_integral<H: Fn(f64) -> f64>(
    nl: &Nonlinearity,
    z: f64,
    h: H,
    opts: QuadOptions,
) -> Result<f64> {
    let peak = nl.peak();
    if !(z > 0.0 && z < peak) {
        return domain(format!("z must lie in (0, {peak}), got {z}"));
    }
    let body = |t: f64| {
        let r = nl.f(t);
        if r <= 0.0 {
            0.0
        } else {
            h(t) / r.sqrt()
        }
    };
    let knee = z.min(1.0);
    let mut total = gauss_kronrod(body, 0.0, knee, opts)?.value;
    if z > 1.0 {
        let s_hi = (peak - 1.0).sqrt();
        let s_lo = (peak - z).sqrt();
        total += gauss_kronrod(
            |s| {
                let r = nl.f_diff(peak, -s * s);
                2.0 * s * h(peak - s * s) / r.sqrt()
            },
            s_lo,
            s_hi,
            opts,
        )?
        .value;
    }
    Ok(total)
}

/// `mu_2(p, z) = (1/sqrt 2) int_0^z t^2 / sqrt(f(t)) dt`.
pub fn integrate_soliton_tail(nl: &Nonlinearity, z: f64, tol: f64) -> Result<f64> {
    Ok(soliton_tail_integral(nl, z, |t| t * t, QuadOptions::with_tol(tol))? / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nl(p: f64) -> Nonlinearity {
        Nonlinearity::new(p).unwrap()
    }

    #[test]
    fn gk_polynomial_and_smooth() {
        let r = gauss_kronrod(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        let r = gauss_kronrod(|x| x.sin(), 0.0, std::f64::consts::PI, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        assert_eq!(r.subdivisions, 1);
    }

    #[test]
    fn gk_log_singularity_adapts() {
        let r = gauss_kronrod(|x| x.ln(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
        assert!(r.subdivisions > 1);
    }

    #[test]
    fn gk_reports_nonconvergence() {
        let opts = QuadOptions {
            tol: 1e-14,
            max_subdivisions: 3,
        };
        assert!(matches!(
            gauss_kronrod(|x| 1.0 / x.sqrt(), 0.0, 1.0, opts),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn antiderivative_identity() {
        // h = f'/2 gives int = sqrt(f(T) - c) - sqrt(f(z) - c) = -theta sqrt(f(z))
        for &(p, theta, z) in &[(3.0, 2.0, 0.4), (6.0, 0.5, 1.2), (4.5, 1.0, 0.9), (8.0, 2.0, 1.05)] {
            let n = nl(p);
            let v = integrate_upper_edge(&n, theta, z, |t| 0.5 * n.df(t), QuadOptions::default()).unwrap();
            let exact = -theta * n.f(z).sqrt();
            assert!((v - exact).abs() < 1e-9 * (1.0 + exact.abs()), "{p} {theta} {z}: {v} vs {exact}");
        }
    }

    #[test]
    fn near_peak_lengths_are_small() {
        let n = nl(6.0);
        let z = n.peak() - 1e-3;
        let l = integrate_upper_edge(&n, 2.0, z, |_| 1.0, QuadOptions::default()).unwrap()
            / std::f64::consts::SQRT_2;
        // 30-digit reference quadrature
        assert!((l - 0.054_577_825_963_150_856).abs() < 1e-10, "{l}");
    }

    #[test]
    fn closed_form_matches_quadrature_at_switch() {
        let n = nl(4.0);
        let z_out = n.peak() - 1.01 * NEAR_PEAK;
        let z_in = n.peak() - 0.99 * NEAR_PEAK;
        let q = integrate_upper_edge(&n, 2.0, z_out, |_| 1.0, QuadOptions::default()).unwrap();
        let c = integrate_upper_edge(&n, 2.0, z_in, |_| 1.0, QuadOptions::default()).unwrap();
        let scaled = q * (0.99f64 / 1.01).sqrt();
        assert!((scaled - c).abs() < 1e-5 * c);
    }

    #[test]
    fn small_z_length_is_large() {
        let n = nl(6.0);
        let l = integrate_upper_edge(&n, 2.0, 1e-4, |_| 1.0, QuadOptions::default()).unwrap()
            / std::f64::consts::SQRT_2;
        assert!(l > 5.0, "{l}");
    }

    #[test]
    fn soliton_tail_plain_split_agrees() {
        // plain quadrature with a split at 1e-8, no substitution
        let n = nl(6.0);
        let plain = {
            let body = |t: f64| t * t / n.f(t).sqrt();
            let opts = QuadOptions::with_tol(1e-13);
            (gauss_kronrod(body, 0.0, 1e-8, opts).unwrap().value
                + gauss_kronrod(body, 1e-8, 1.0, opts).unwrap().value)
                / std::f64::consts::SQRT_2
        };
        let v = integrate_soliton_tail(&n, 1.0, 1e-12).unwrap();
        assert!((v - plain).abs() < 1e-10);
    }

    #[test]
    fn soliton_tail_domain() {
        let n = nl(5.0);
        assert!(integrate_soliton_tail(&n, n.peak(), 1e-10).is_err());
        assert!(integrate_soliton_tail(&n, 0.0, 1e-10).is_err());
        assert!(integrate_soliton_tail(&n, 1e-9, 1e-10).unwrap() < 1e-17);
    }

    #[test]
    fn upper_edge_domain() {
        let n = nl(5.0);
        assert!(UpperEdge::new(&n, 2.0, n.peak()).is_err());
        assert!(UpperEdge::new(&n, 2.0, -0.1).is_err());
        assert!(UpperEdge::new(&n, 0.0, 0.5).is_err());
    }

    #[test]
    fn turning_point_satisfies_level() {
        let n = nl(3.3);
        for &(theta, z) in &[(2.0, 0.3), (0.5, 0.3), (0.5, 1.1), (1.0, 0.7)] {
            let e = UpperEdge::new(&n, theta, z).unwrap();
            let t = e.turning_point();
            assert!(t > 1.0 && n.df(t) < 0.0);
            assert!((n.f(t) - e.level()).abs() < 1e-14);
        }
    }
}

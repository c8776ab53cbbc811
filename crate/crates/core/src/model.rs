//! The scalar nonlinearity `f(t) = t^2/2 - t^p/p`, its branch inverses, the
//! real-line soliton and the auxiliary functions `A`, `g`, `rho` that enter
//! the derivative identities for the length and mass functions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::roots::{brent, RootOptions};
use crate::series::Series;

/// Below this distance from `t = 1` the auxiliary functions are evaluated
/// from their power series instead of the direct (0/0) formulas.
pub const TOL_SERIES: f64 = 1e-2;

/// Relative tolerance used when inverting `f` on one of its monotone branches.
pub const TOL_ROOT: f64 = 1e-12;

/// Metric graph families with a single vertex and one compact edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Graph {
    /// Two half-lines and one pendant of length `l`; incidence index 2.
    TGraph,
    /// One half-line and a loop of length `2l`; incidence index 1/2.
    Tadpole,
    /// Compact edge with an arbitrary positive incidence index.
    RawTheta(f64),
}

impl Graph {
    pub fn theta(&self) -> f64 {
        match *self {
            Graph::TGraph => 2.0,
            Graph::Tadpole => 0.5,
            Graph::RawTheta(theta) => theta,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Graph::TGraph => "t".to_string(),
            Graph::Tadpole => "tadpole".to_string(),
            Graph::RawTheta(theta) => format!("theta={theta}"),
        }
    }
}

/// Nonlinearity exponent together with the graph it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    p: f64,
    graph: Graph,
    theta: f64,
}

impl ModelParams {
    pub fn new(p: f64, graph: Graph) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return domain(format!("exponent p must satisfy p > 2, got {p}"));
        }
        let theta = graph.theta();
        if !(theta > 0.0) || !theta.is_finite() {
            return domain(format!("incidence index must be positive, got {theta}"));
        }
        Ok(ModelParams { p, graph, theta })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn graph(&self) -> Graph {
        self.graph
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::new(self.p).expect("exponent validated on construction")
    }
}

/// Which monotone piece of `f` to invert: `[0, 1]` or `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

/// First integral `-u'^2/2 + f(u)` along the compact edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianLevel {
    pub value: f64,
}

impl HamiltonianLevel {
    pub fn new(nl: &Nonlinearity, theta: f64, z: f64) -> Self {
        HamiltonianLevel {
            value: (1.0 - theta * theta) * nl.f(z),
        }
    }
}

/// Series of the auxiliary functions about `t = 1`, in powers of `t - 1`.
#[derive(Debug, Clone)]
struct NearOne {
    a: Series,
    g: Series,
    w: Series,
    w_prime: Series,
    rho: Series,
}

impl NearOne {
    fn new(p: f64) -> Self {
        let bp = Series::binomial(p);
        let bp1 = Series::binomial(p - 1.0);
        let bp2 = Series::binomial(p - 2.0);
        let bp3 = Series::binomial(p - 3.0);

        // f(1+e) - f(1) = e^2 d(e)
        let mut dfull = bp.scale(-1.0 / p);
        dfull.0[0] = 0.0;
        dfull.0[1] = 0.0;
        dfull.0[2] += 0.5;
        let d = dfull.drop_low(2);

        // f'(1+e) = e * ed(e)
        let mut f1 = bp1.scale(-1.0);
        f1.0[0] = 0.0;
        f1.0[1] = 2.0 - p;
        let ed = f1.drop_low(1);

        let mut f2 = bp2.scale(-(p - 1.0));
        f2.0[0] = 2.0 - p;
        let f3 = bp3.scale(-(p - 1.0) * (p - 2.0));

        let e2 = ed.mul(&ed);
        let e3 = e2.mul(&ed);
        let e4 = e2.mul(&e2);

        let t = {
            let mut s = Series::zero();
            s.0[0] = 1.0;
            s.0[1] = 1.0;
            s
        };
        let t2 = t.mul(&t);

        // A = e * na / ed^2 (the constant term of e2/2 - d f'' vanishes)
        let mut na_full = e2.scale(0.5).sub(&d.mul(&f2));
        na_full.0[0] = 0.0;
        let na = na_full.drop_low(1);
        let a = na.div(&e2).raise(1);

        let d_over_e = d.div(&ed);
        let g = t2
            .scale(2.0)
            .add(&t2.mul(&a).scale(2.0))
            .add(&t.mul(&d_over_e.raise(1)).scale(4.0));

        // (2t^2 - g)/f' = -2 t^2 na / ed^3 - 4 t d / ed^2
        let w = t2
            .mul(&na)
            .div(&e3)
            .scale(-2.0)
            .sub(&t.mul(&d).div(&e2).scale(4.0));
        let w_prime = w.derivative();

        let mut bracket = f2
            .mul(&e2)
            .scale(-3.0)
            .add(&d.mul(&f2).mul(&f2).scale(6.0))
            .sub(&d.mul(&ed).mul(&f3).raise(1).scale(2.0));
        bracket.0[0] = 0.0;
        bracket.0[1] = 0.0;
        let rho = bracket.drop_low(2).div(&e4);

        NearOne {
            a,
            g,
            w,
            w_prime,
            rho,
        }
    }
}

/// The power nonlinearity for a fixed exponent `p > 2`.
///
/// Construction precomputes the series used near `t = 1`, so build one value
/// per exponent and share it by reference.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    p: f64,
    peak: f64,
    f_one: f64,
    near: Box<NearOne>,
}

impl Nonlinearity {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return domain(format!("exponent p must satisfy p > 2, got {p}"));
        }
        let peak = ((0.5 * (p - 2.0)).ln_1p() / (p - 2.0)).exp();
        Ok(Nonlinearity {
            p,
            peak,
            f_one: 0.5 - 1.0 / p,
            near: Box::new(NearOne::new(p)),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `phi(0) = (p/2)^(1/(p-2))`, the positive zero of `f`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// `f(1)`, the maximum of `f`.
    pub fn f_one(&self) -> f64 {
        self.f_one
    }

    fn pow(&self, t: f64, q: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            (q * t.ln()).exp()
        }
    }

    /// `f(t)` without the domain check; `t >= 0` is assumed.
    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        0.5 * t * t - self.pow(t, self.p) / self.p
    }

    /// Checked evaluation of `f`.
    pub fn eval_f(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("f is defined for t >= 0, got {t}"));
        }
        Ok(self.f(t))
    }

    /// `f'(t) = t - t^(p-1)`, written so it keeps full relative accuracy
    /// near `t = 1`.
    #[inline]
    pub fn df(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        -t * ((self.p - 2.0) * t.ln()).exp_m1()
    }

    #[inline]
    pub fn d2f(&self, t: f64) -> f64 {
        1.0 - (self.p - 1.0) * self.pow(t, self.p - 2.0)
    }

    #[inline]
    pub fn d3f(&self, t: f64) -> f64 {
        -(self.p - 1.0) * (self.p - 2.0) * self.pow(t, self.p - 3.0)
    }

    /// `f(base + delta) - f(base)` without cancellation for small `delta`.
    /// Requires `base > 0` and `base + delta >= 0`.
    #[inline]
    pub fn f_diff(&self, base: f64, delta: f64) -> f64 {
        let quad = 0.5 * delta * (2.0 * base + delta);
        let ratio = delta / base;
        if ratio <= -1.0 {
            return quad + self.pow(base, self.p) / self.p;
        }
        quad - self.pow(base, self.p) * (self.p * ratio.ln_1p()).exp_m1() / self.p
    }

    /// Solve `f(t) = v` on the requested branch.
    pub fn branch_inverse(&self, branch: Branch, v: f64) -> Result<f64> {
        let f1 = self.f_one;
        match branch {
            Branch::Lower => {
                if !(0.0..=f1).contains(&v) {
                    return domain(format!("lower branch needs v in [0, {f1}], got {v}"));
                }
                if v == 0.0 {
                    return Ok(0.0);
                }
                if v == f1 {
                    return Ok(1.0);
                }
                brent(|t| Ok(self.f(t) - v), 0.0, 1.0, root_opts())
            }
            Branch::Upper => {
                if !(v <= f1) {
                    return domain(format!("upper branch needs v <= {f1}, got {v}"));
                }
                if v == f1 {
                    return Ok(1.0);
                }
                if v == 0.0 {
                    return Ok(self.peak);
                }
                let (lo, hi) = if v > 0.0 {
                    (1.0, self.peak)
                } else {
                    let mut hi = 2.0f64.max(self.peak);
                    while self.f(hi) >= v {
                        hi *= 2.0;
                        if !hi.is_finite() {
                            return domain(format!("upper branch value {v} out of range"));
                        }
                    }
                    (self.peak, hi)
                };
                // measured from the peak so tiny positive levels stay resolved
                let peak = self.peak;
                brent(|t| Ok(self.f_diff(peak, t - peak) - v), lo, hi, root_opts())
            }
        }
    }

    /// Real-line soliton `phi(x) = peak * sech^(2/(p-2))((p-2) x / 2)`.
    pub fn soliton(&self, x: f64) -> f64 {
        let a = 0.5 * (self.p - 2.0);
        let k = 1.0 / a;
        (self.peak.ln() + k * ln_sech(a * x.abs())).exp()
    }

    pub fn soliton_deriv(&self, x: f64) -> f64 {
        let a = 0.5 * (self.p - 2.0);
        -self.soliton(x) * (a * x).tanh()
    }

    pub fn soliton_second_deriv(&self, x: f64) -> f64 {
        let a = 0.5 * (self.p - 2.0);
        let th = (a * x).tanh();
        let sech2 = (2.0 * ln_sech(a * x.abs())).exp();
        self.soliton(x) * (th * th - a * sech2)
    }

    /// The shift `y >= 0` with `phi(y) = z`.
    pub fn soliton_inverse(&self, z: f64) -> Result<f64> {
        if !(z > 0.0 && z <= self.peak) {
            return domain(format!(
                "soliton_inverse needs z in (0, {}], got {z}",
                self.peak
            ));
        }
        let a = 0.5 * (self.p - 2.0);
        // cosh(a y) = (peak/z)^a = 1 + w
        let w = (a * (self.peak / z).ln()).exp_m1();
        Ok((w + (w * (w + 2.0)).sqrt()).ln_1p() / a)
    }

    /// `A(t) = 1/2 - (f(t) - f(1)) f''(t) / f'(t)^2`, continuously extended
    /// to `A(1) = 0`.
    pub fn eval_a(&self, t: f64) -> f64 {
        let eps = t - 1.0;
        if eps.abs() < TOL_SERIES {
            return self.near.a.eval(eps);
        }
        let d = self.f_diff(1.0, eps);
        let df = self.df(t);
        0.5 - d * self.d2f(t) / (df * df)
    }

    /// `g(t) = 3t^2 - 2t^2 (f - f(1)) f''/f'^2 + 4t (f - f(1))/f'`.
    pub fn eval_g(&self, t: f64) -> f64 {
        let eps = t - 1.0;
        if eps.abs() < TOL_SERIES {
            return self.near.g.eval(eps);
        }
        let d = self.f_diff(1.0, eps);
        let df = self.df(t);
        3.0 * t * t - 2.0 * t * t * d * self.d2f(t) / (df * df) + 4.0 * t * d / df
    }

    /// `(2t^2 - g(t)) / f'(t)`, regular at `t = 1`.
    pub fn eval_gdiv(&self, t: f64) -> f64 {
        let eps = t - 1.0;
        if eps.abs() < TOL_SERIES {
            return self.near.w.eval(eps);
        }
        (2.0 * t * t - self.eval_g(t)) / self.df(t)
    }

    /// `d/dt [(2t^2 - g(t)) / f'(t)]`.
    pub fn eval_dgdiv(&self, t: f64) -> f64 {
        let eps = t - 1.0;
        if eps.abs() < TOL_SERIES {
            return self.near.w_prime.eval(eps);
        }
        let d = self.f_diff(1.0, eps);
        let f1 = self.df(t);
        let f2 = self.d2f(t);
        let f3 = self.d3f(t);
        let r = d / f1;
        let q = d * f2 / (f1 * f1);
        let dr = 1.0 - q;
        let dq = f2 / f1 + d * f3 / (f1 * f1) - 2.0 * d * f2 * f2 / (f1 * f1 * f1);
        let g = 3.0 * t * t - 2.0 * t * t * q + 4.0 * t * r;
        let dg = 6.0 * t - 4.0 * t * q - 2.0 * t * t * dq + 4.0 * r + 4.0 * t * dr;
        let n = 2.0 * t * t - g;
        let dn = 4.0 * t - dg;
        (dn * f1 - n * f2) / (f1 * f1)
    }

    /// `rho(t) / f'(t)^4`, negative for every `t > 0`.
    pub fn rho_over_fprime4(&self, t: f64) -> f64 {
        let eps = t - 1.0;
        if eps.abs() < TOL_SERIES {
            return self.near.rho.eval(eps);
        }
        let d = self.f_diff(1.0, eps);
        let f1 = self.df(t);
        let f2 = self.d2f(t);
        let f3 = self.d3f(t);
        let rho = -3.0 * f2 * f1 * f1 + 6.0 * d * f2 * f2 - 2.0 * d * f3 * f1;
        rho / (f1 * f1 * f1 * f1)
    }

    /// `rho(t)` itself (not regularized).
    pub fn rho(&self, t: f64) -> f64 {
        let d = self.f_diff(1.0, t - 1.0);
        let f1 = self.df(t);
        let f2 = self.d2f(t);
        let f3 = self.d3f(t);
        -3.0 * f2 * f1 * f1 + 6.0 * d * f2 * f2 - 2.0 * d * f3 * f1
    }
}

fn root_opts() -> RootOptions {
    RootOptions {
        xtol: TOL_ROOT * 1e-3,
        ..RootOptions::default()
    }
}

/// `ln sech(u)` for `u >= 0`, safe for large `u`.
fn ln_sech(u: f64) -> f64 {
    std::f64::consts::LN_2 - u - (-2.0 * u).exp().ln_1p()
}

use super::{GaussQuadrature2, PiMoments};
use crate::error::{Error, Result};

/// Two-point quadratures of `pi_m + (P^f)^m di` as closed-form functions of
/// the unknown future price `P^f`.
///
/// Coefficients are held about the mean of the unperturbed measure; public
/// arguments and results are absolute prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfFamily {
    center: f64,
    mass: f64,
    di: f64,
    b: f64,
    a: [f64; 5],
    has_a4: bool,
}

/// Perturbed quadrature at one value of `P^f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfPoint {
    pub pf: f64,
    pub p1: f64,
    pub p2: f64,
    pub w1: f64,
    pub w2: f64,
    pub gamma: f64,
    pub mean: f64,
    pub midpoint: f64,
    pub gap: f64,
}

/// Builds the family from unperturbed moments and `di = dI <psi|psi_0>^2`.
pub fn pf_family(pi: &PiMoments, di: f64) -> Result<PfFamily> {
    let p0 = pi.mass();
    if !(p0 > 0.0) {
        return Err(Error::NoQuadrature);
    }
    if !(di >= 0.0) || !di.is_finite() {
        return Err(Error::InvalidParameter("di must be finite and non-negative"));
    }
    let center = pi.mean();
    let c = pi.recentered(center);
    let total = p0 + di;
    let mut a = [0.0; 5];
    for (m, am) in a.iter_mut().enumerate() {
        *am = c.pi(m).unwrap_or(0.0) / total;
    }
    Ok(PfFamily { center, mass: p0, di, b: di / total, a, has_a4: c.pi4().is_some() })
}

impl PfFamily {
    pub fn di(&self) -> f64 {
        self.di
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `di / (pi_0 + di)`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `a_m = pi_m / (pi_0 + di)` with moments about [`center`](Self::center).
    pub fn a(&self, m: usize) -> f64 {
        self.a[m]
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    fn local(&self, pf: f64) -> f64 {
        pf - self.center
    }

    /// `A(P)`, `B(P)`, `D(P)` in centered coordinates.
    pub fn abd(&self, pf: f64) -> (f64, f64, f64) {
        let x = self.local(pf);
        let [_, a1, a2, a3, _] = self.a;
        let b = self.b;
        let aa = (a3 * a1 - a2 * a2) + (a3 * b) * x - 2.0 * (a2 * b) * x * x + (a1 * b) * x * x * x;
        let bb = (a2 * a1 - a3) + (a2 * b) * x + (a1 * b) * x * x - (1.0 - b) * b * x * x * x;
        let dd = (a2 - a1 * a1) - 2.0 * (a1 * b) * x + (1.0 - b) * b * x * x;
        (aa, bb, dd)
    }

    /// `E(P)`, equal to `A + P B + P^2 D` in centered coordinates.
    pub fn e(&self, pf: f64) -> f64 {
        let x = self.local(pf);
        let [_, a1, a2, a3, _] = self.a;
        let b = self.b;
        (a3 * a1 - a2 * a2) + (a2 * a1 - a3 * (1.0 - b)) * x + (a2 * (1.0 - b) - a1 * a1) * x * x
    }

    /// Perturbed mean, linear in `P^f`.
    pub fn mean(&self, pf: f64) -> f64 {
        self.center + self.a[1] + self.b * self.local(pf)
    }

    /// `+-(pi_0 - di) / (pi_0 + di)` as `P^f -> +-inf`.
    pub fn asymptote(&self) -> f64 {
        (self.mass - self.di) / (self.mass + self.di)
    }

    fn discriminant(&self, pf: f64) -> Result<(f64, f64, f64, f64)> {
        let (aa, bb, dd) = self.abd(pf);
        let disc = bb * bb - 4.0 * aa * dd;
        if !(dd > 0.0) || !(disc >= 0.0) {
            return Err(Error::NoQuadratureAt(pf));
        }
        Ok((aa, bb, dd, disc.sqrt()))
    }

    /// Quadrature of the perturbed measure at `P^f`.
    pub fn at(&self, pf: f64) -> Result<PfPoint> {
        let (_, bb, dd, root) = self.discriminant(pf)?;
        let x = self.local(pf);
        let mean = self.a[1] + self.b * x;
        let x1 = (-bb - root) / (2.0 * dd);
        let x2 = (-bb + root) / (2.0 * dd);
        let total = self.mass + self.di;
        let w = |xi: f64| total / (1.0 + (xi - mean) * (xi - mean) / dd);
        let gamma = (-bb - 2.0 * mean * dd) / root;
        Ok(PfPoint {
            pf,
            p1: self.center + x1,
            p2: self.center + x2,
            w1: w(x1),
            w2: w(x2),
            gamma,
            mean: self.center + mean,
            midpoint: self.center - 0.5 * bb / dd,
            gap: root / dd,
        })
    }

    pub fn gamma(&self, pf: f64) -> Result<f64> {
        Ok(self.at(pf)?.gamma)
    }

    pub fn nodes(&self, pf: f64) -> Result<(f64, f64)> {
        let p = self.at(pf)?;
        Ok((p.p1, p.p2))
    }

    pub fn weights(&self, pf: f64) -> Result<(f64, f64)> {
        let p = self.at(pf)?;
        Ok((p.w1, p.w2))
    }

    /// `(p - p1(P^f))(p - p2(P^f)) = p^2 + (B/D) p + A/D`, evaluated at `p`.
    pub fn orthogonal_poly(&self, p: f64, pf: f64) -> Result<f64> {
        let (aa, bb, dd, _) = self.discriminant(pf)?;
        let y = p - self.center;
        Ok(y * y + bb / dd * y + aa / dd)
    }

    /// Unnormalized L4 volatility of the perturbed measure at its own nodes.
    pub fn l4_volatility(&self, pf: f64) -> Result<f64> {
        if !self.has_a4 {
            return Err(Error::MissingMoment);
        }
        let (aa, bb, dd, _) = self.discriminant(pf)?;
        let x = self.local(pf);
        let [_, _, a2, a3, a4] = self.a;
        let norm = a4 + (a3 * bb + a2 * aa + x * x * self.b * self.e(pf)) / dd;
        Ok((self.mass + self.di) * norm)
    }
}

/// Frontrunning profit bounds and the long/short curvature asymmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontrunPnl {
    pub quad: GaussQuadrature2,
    pub family: PfFamily,
    pub di: f64,
    /// `(p2 - p1) min(w1, w2)`.
    pub pnl_max: f64,
    /// Curvature of `p1(P^f)` at `P^f = p2`.
    pub inv_m1: f64,
    /// Curvature of `p2(P^f)` at `P^f = p1`.
    pub inv_m2: f64,
    /// `1/m1 + 1/m2`.
    pub directional: f64,
}

// second derivative by central differences with one Richardson step
fn curvature<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<f64> {
    let d2 = |h: f64| -> Result<f64> { Ok((f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h)) };
    let coarse = d2(h)?;
    let fine = d2(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Frontrun analysis of the quadrature `quad` under future flow `di`.
pub fn frontrun_pnl(quad: &GaussQuadrature2, di: f64, family: &PfFamily) -> Result<FrontrunPnl> {
    let width = quad.p2 - quad.p1;
    if !(width > 0.0) {
        return Err(Error::NoQuadrature);
    }
    let h = 1e-4 * width;
    let inv_m1 = curvature(|x| Ok(family.at(x)?.p1), quad.p2, h)?;
    let inv_m2 = curvature(|x| Ok(family.at(x)?.p2), quad.p1, h)?;
    Ok(FrontrunPnl {
        quad: *quad,
        family: *family,
        di,
        pnl_max: width * quad.w1.min(quad.w2),
        inv_m1,
        inv_m2,
        directional: inv_m1 + inv_m2,
    })
}

impl FrontrunPnl {
    /// `(p2(P^f) - P^f) min(di, w2)`.
    pub fn pnl_long(&self, pf: f64) -> Result<f64> {
        Ok((self.family.at(pf)?.p2 - pf) * self.di.min(self.quad.w2))
    }

    /// `(P^f - p1(P^f)) min(di, w1)`.
    pub fn pnl_short(&self, pf: f64) -> Result<f64> {
        Ok((pf - self.family.at(pf)?.p1) * self.di.min(self.quad.w1))
    }

    /// Long-minus-short change when the future flow spreads by `dp` around
    /// the band edges, with the first-order price drift removed.
    pub fn delta_pnl(&self, dp: f64) -> Result<f64> {
        let (p1, p2) = (self.quad.p1, self.quad.p2);
        let long = self.pnl_long(p1 + dp)? - self.pnl_long(p1)? + self.di.min(self.quad.w2) * dp;
        let short = self.pnl_short(p2 + dp)? - self.pnl_short(p2)? - self.di.min(self.quad.w1) * dp;
        Ok(long - short)
    }
}

//! Polynomial bases used to average over the tick history.
//!
//! Every basis is generated by a three-term recurrence
//! `d_k Q_{k+1}(u) = (a_k u + b_k) Q_k(u) - c_k Q_{k-1}(u)` in a normalized
//! variable `u`, so evaluation,
//! products, affine re-expansion and derivatives are all done in the basis
//! itself without passing through monomial coefficients.

pub mod gauss;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which polynomial family and averaging measure a basis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// `Q_k(x) = L_k(-x)` on `e^x dx`, `x` in `(-inf, 0]`, now at `x = 0`.
    LaguerreTime,
    /// `Q_k(x) = P_k(2x - 1)` on `dx`, `x` in `[0, 1]`, now at `x = 1`.
    ShiftedLegendreTime,
    /// `Q_k(x) = x^k` on the Laguerre measure.
    MonomialTime,
    /// `Q_k(x) = (1 - x)^k` on the Legendre measure. Graded near `x = 1`,
    /// which keeps short histories well represented.
    MonomialLegendreTime,
    /// Legendre polynomials of a scaled price, exponential weight in time.
    PricePoly,
}

/// The analytic measure behind a time basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMeasure {
    /// `e^x dx` on `(-inf, 0]`.
    Laguerre,
    /// `dx` on `[0, 1]`.
    Legendre,
}

impl TimeMeasure {
    /// Abscissa of the present moment.
    pub fn now(self) -> f64 {
        match self {
            TimeMeasure::Laguerre => 0.0,
            TimeMeasure::Legendre => 1.0,
        }
    }
}

impl BasisKind {
    pub fn time_measure(self) -> Option<TimeMeasure> {
        match self {
            BasisKind::LaguerreTime | BasisKind::MonomialTime => Some(TimeMeasure::Laguerre),
            BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => Some(TimeMeasure::Legendre),
            BasisKind::PricePoly => None,
        }
    }
}

/// Affine price normalization of the price basis: `z = (p - center) / half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceFrame {
    pub center: f64,
    pub half_width: f64,
}

impl Default for PriceFrame {
    fn default() -> Self {
        PriceFrame { center: 0.0, half_width: 1.0 }
    }
}

/// A basis family truncated at `max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    kind: BasisKind,
    max_degree: usize,
    frame: PriceFrame,
}

/// `Q_j Q_k = sum_l c[j][k][l] Q_l` for all `j, k <= max`.
#[derive(Debug, Clone)]
pub struct ProductTable {
    max: usize,
    entries: Vec<Vec<f64>>,
}

impl ProductTable {
    pub fn max_degree(&self) -> usize {
        self.max
    }

    /// Expansion of `Q_j Q_k`, of length `j + k + 1`.
    pub fn coeffs(&self, j: usize, k: usize) -> &[f64] {
        &self.entries[j * (self.max + 1) + k]
    }
}

/// Rows `d[n]` with `Q_n(a x + b) = sum_{k <= n} d[n][k] Q_k(x)`.
#[derive(Debug, Clone)]
pub struct ShiftScaleExpansion {
    dim: usize,
    d: Vec<f64>,
}

impl ShiftScaleExpansion {
    pub fn max_degree(&self) -> usize {
        self.dim - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.d[n * self.dim..n * self.dim + n + 1]
    }

    /// Replaces a moment vector `m_k = <Q_k f>` by `sum_j d[k][j] m_j`.
    pub fn apply_in_place(&self, m: &mut [f64]) {
        assert!(m.len() <= self.dim);
        for k in (0..m.len()).rev() {
            let row = self.row(k);
            let mut s = 0.0;
            for (dj, mj) in row.iter().zip(m.iter()) {
                s += dj * mj;
            }
            m[k] = s;
        }
    }
}

impl PolyBasis {
    pub fn new(kind: BasisKind, max_degree: usize) -> Self {
        PolyBasis { kind, max_degree, frame: PriceFrame::default() }
    }

    /// Price basis with the given normalization.
    pub fn price(max_degree: usize, frame: PriceFrame) -> Result<Self> {
        if !(frame.half_width > 0.0) || !frame.center.is_finite() {
            return Err(Error::DegenerateScale);
        }
        Ok(PolyBasis { kind: BasisKind::PricePoly, max_degree, frame })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn frame(&self) -> PriceFrame {
        self.frame
    }

    /// Recurrence `d_k Q_{k+1}(u) = (a_k u + b_k) Q_k(u) - c_k Q_{k-1}(u)` as
    /// `(a_k, b_k, c_k, d_k)`, in the normalized variable `u` (see
    /// [`to_unit`](Self::to_unit)). Integer-valued where the family allows it,
    /// which keeps Laguerre products exact in floating point.
    pub fn recurrence(&self, k: usize) -> (f64, f64, f64, f64) {
        let kf = k as f64;
        match self.kind {
            // (k+1) L_{k+1}(y) = (2k+1-y) L_k - k L_{k-1}, y = -x
            BasisKind::LaguerreTime => (1.0, 2.0 * kf + 1.0, kf, kf + 1.0),
            BasisKind::ShiftedLegendreTime => (2.0 * (2.0 * kf + 1.0), -(2.0 * kf + 1.0), kf, kf + 1.0),
            BasisKind::MonomialTime => (1.0, 0.0, 0.0, 1.0),
            BasisKind::MonomialLegendreTime => (-1.0, 1.0, 0.0, 1.0),
            BasisKind::PricePoly => (2.0 * kf + 1.0, 0.0, kf, kf + 1.0),
        }
    }

    /// Normalized variable of the recurrence: the price basis works in
    /// `(p - center) / half_width`, time bases use `x` directly.
    pub fn to_unit(&self, x: f64) -> f64 {
        match self.kind {
            BasisKind::PricePoly => (x - self.frame.center) / self.frame.half_width,
            _ => x,
        }
    }

    fn unit_scale(&self) -> f64 {
        match self.kind {
            BasisKind::PricePoly => self.frame.half_width,
            _ => 1.0,
        }
    }

    fn unit_offset(&self) -> f64 {
        match self.kind {
            BasisKind::PricePoly => self.frame.center,
            _ => 0.0,
        }
    }

    fn check_degree(&self, k: usize) -> Result<()> {
        if k > self.max_degree {
            Err(Error::DegreeOutOfRange { degree: k, max: self.max_degree })
        } else {
            Ok(())
        }
    }

    /// `Q_k(x)`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        self.check_degree(k)?;
        let u = self.to_unit(x);
        let mut prev = 0.0;
        let mut cur = 1.0;
        for i in 0..k {
            let (a, b, c, d) = self.recurrence(i);
            let next = ((a * u + b) * cur - c * prev) / d;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Writes `Q_0(x) .. Q_{out.len()-1}(x)` into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let u = self.to_unit(x);
        let mut prev = 0.0;
        let mut cur = 1.0;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = cur;
            let (a, b, c, d) = self.recurrence(i);
            let next = ((a * u + b) * cur - c * prev) / d;
            prev = cur;
            cur = next;
        }
    }

    /// `Q_0(x) .. Q_{count-1}(x)`.
    pub fn eval_all(&self, x: f64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.eval_into(x, &mut out);
        out
    }

    /// Value at `x` of the polynomial with the given basis coefficients.
    pub fn eval_poly(&self, coeffs: &[f64], x: f64) -> f64 {
        let q = self.eval_all(x, coeffs.len());
        coeffs.iter().zip(&q).map(|(c, v)| c * v).sum()
    }

    /// Multiplies a basis expansion by `x`; the result is one entry longer.
    pub fn mul_x(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len() + 1];
        self.mul_unit_add(v, self.unit_scale(), &mut out);
        let c = self.unit_offset();
        if c != 0.0 {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        out
    }

    // out += scale * u * v
    fn mul_unit_add(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        for (l, &vl) in v.iter().enumerate() {
            if vl == 0.0 {
                continue;
            }
            // u Q_l = (d_l Q_{l+1} - b_l Q_l + c_l Q_{l-1}) / a_l
            let (a, b, c, d) = self.recurrence(l);
            let t = scale * vl;
            out[l + 1] += t * d / a;
            out[l] -= t * b / a;
            if l > 0 {
                out[l - 1] += t * c / a;
            }
        }
    }

    /// Linearization coefficients of all pairwise products up to `max_degree`.
    pub fn product_table(&self) -> ProductTable {
        self.product_table_upto(self.max_degree)
    }

    /// Product table for `j, k <= max` (independent of `max_degree`).
    pub fn product_table_upto(&self, max: usize) -> ProductTable {
        let side = max + 1;
        let mut entries = vec![Vec::new(); side * side];
        for k in 0..side {
            // q_j = Q_j * Q_k, built by the recurrence in j
            let mut prev: Vec<f64> = Vec::new();
            let mut cur = vec![0.0; k + 1];
            cur[k] = 1.0;
            for j in 0..side {
                if j <= k {
                    entries[j * side + k] = cur.clone();
                }
                if j == max {
                    break;
                }
                let (a, b, c, d) = self.recurrence(j);
                let mut next = vec![0.0; cur.len() + 1];
                self.mul_unit_add(&cur, a, &mut next);
                for (n, v) in next.iter_mut().zip(cur.iter()) {
                    *n += b * v;
                }
                for (n, v) in next.iter_mut().zip(prev.iter()) {
                    *n -= c * v;
                }
                next.iter_mut().for_each(|n| *n /= d);
                prev = cur;
                cur = next;
            }
        }
        for j in 0..side {
            for k in 0..j {
                entries[j * side + k] = entries[k * side + j].clone();
            }
        }
        ProductTable { max, entries }
    }

    /// Expansion of `Q_n(a x + b)` in `Q_k(x)` for every `n <= degree`.
    pub fn shift_scale_expand(&self, a: f64, b: f64, degree: usize) -> Result<ShiftScaleExpansion> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::DegenerateScale);
        }
        // in unit variables: u' = a u + ub
        let ub = (a * self.unit_offset() + b - self.unit_offset()) / self.unit_scale();
        let dim = degree + 1;
        let mut d = vec![0.0; dim * dim];
        d[0] = 1.0;
        let mut scratch = vec![0.0; dim + 1];
        for n in 0..degree {
            let (an, bn, cn, dn) = self.recurrence(n);
            scratch.iter_mut().for_each(|s| *s = 0.0);
            let (head, tail) = d.split_at_mut((n + 1) * dim);
            let cur = &head[n * dim..n * dim + n + 1];
            self.mul_unit_add(cur, an * a, &mut scratch);
            let shift = an * ub + bn;
            for (s, v) in scratch.iter_mut().zip(cur.iter()) {
                *s += shift * v;
            }
            if n > 0 {
                let prev = &head[(n - 1) * dim..(n - 1) * dim + n];
                for (s, v) in scratch.iter_mut().zip(prev.iter()) {
                    *s -= cn * v;
                }
            }
            for (t, s) in tail[..n + 2].iter_mut().zip(&scratch[..n + 2]) {
                *t = s / dn;
            }
        }
        Ok(ShiftScaleExpansion { dim, d })
    }

    /// Row `k` holds the basis expansion of `dQ_k/dx`.
    pub fn derivative_matrix(&self, upto: usize) -> DMatrix<f64> {
        let dim = upto + 1;
        let inv = 1.0 / self.unit_scale();
        let mut m = DMatrix::zeros(dim, dim);
        let mut prev = vec![0.0; dim + 1];
        let mut cur = vec![0.0; dim + 1];
        for k in 0..upto {
            // d_k Q'_{k+1} = a_k Q_k + (a_k u + b_k) Q'_k - c_k Q'_{k-1}, in u
            let (a, b, c, d) = self.recurrence(k);
            let mut next = vec![0.0; dim + 1];
            next[k] += a;
            self.mul_unit_add(&cur[..k.max(1)], a, &mut next);
            for i in 0..dim {
                next[i] = (next[i] + b * cur[i] - c * prev[i]) / d;
            }
            for i in 0..=k {
                m[(k + 1, i)] = next[i] * inv;
            }
            prev = cur;
            cur = next;
        }
        m
    }

    /// Row `k` holds the expansion of `D(Q_k)`, the generator of a forward
    /// time translation of the averaging weight.
    pub fn time_shift_matrix(&self, upto: usize) -> Result<DMatrix<f64>> {
        let measure = self.kind.time_measure().ok_or(Error::NoTimeShiftOperator)?;
        let deriv = self.derivative_matrix(upto);
        let dim = upto + 1;
        let mut m = match measure {
            TimeMeasure::Laguerre => deriv,
            TimeMeasure::Legendre => {
                let mut m = DMatrix::zeros(dim, dim);
                for k in 0..dim {
                    let row: Vec<f64> = deriv.row(k).iter().copied().collect();
                    // x * Q'_k keeps degree k
                    let xr = self.mul_x(&row[..k.max(1)]);
                    for (i, v) in xr.iter().enumerate().take(dim) {
                        m[(k, i)] = *v;
                    }
                }
                m
            }
        };
        for k in 0..dim {
            m[(k, k)] += 0.5;
        }
        Ok(m)
    }

    /// Basis expansion of `D(psi)`.
    pub fn apply_time_shift(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.is_empty() {
            return Ok(Vec::new());
        }
        self.check_degree(coeffs.len() - 1)?;
        let m = self.time_shift_matrix(coeffs.len() - 1)?;
        let mut out = vec![0.0; coeffs.len()];
        for (k, ck) in coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate().take(k + 1) {
                *o += ck * m[(k, i)];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bases() -> Vec<PolyBasis> {
        vec![
            PolyBasis::new(BasisKind::LaguerreTime, 12),
            PolyBasis::new(BasisKind::ShiftedLegendreTime, 12),
            PolyBasis::new(BasisKind::MonomialTime, 12),
            PolyBasis::new(BasisKind::MonomialLegendreTime, 12),
            PolyBasis::price(12, PriceFrame { center: 100.0, half_width: 2.0 }).unwrap(),
        ]
    }

    fn sample_points(kind: BasisKind) -> Vec<f64> {
        (0..100)
            .map(|i| {
                let s = i as f64 / 99.0;
                match kind {
                    BasisKind::LaguerreTime | BasisKind::MonomialTime => -12.0 * s,
                    BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => s,
                    BasisKind::PricePoly => 98.0 + 4.0 * s,
                }
            })
            .collect()
    }

    #[test]
    fn closed_form_values() {
        let lag = PolyBasis::new(BasisKind::LaguerreTime, 4);
        assert_eq!(lag.eval(0, -3.7).unwrap(), 1.0);
        assert_eq!(lag.eval(1, 2.0).unwrap(), 3.0);
        // L_2(y) = 1 - 2y + y^2/2 at y = 1.5
        assert_relative_eq!(lag.eval(2, -1.5).unwrap(), 1.0 - 3.0 + 1.125, epsilon = 1e-15);
        let leg = PolyBasis::new(BasisKind::ShiftedLegendreTime, 4);
        assert_eq!(leg.eval(1, 1.0).unwrap(), 1.0);
        // P_2(z) = (3z^2 - 1)/2 at z = 2*0.3 - 1
        let z: f64 = -0.4;
        assert_relative_eq!(leg.eval(2, 0.3).unwrap(), (3.0 * z * z - 1.0) / 2.0, epsilon = 1e-15);
        assert!(matches!(leg.eval(5, 0.1), Err(Error::DegreeOutOfRange { .. })));
    }

    #[test]
    fn product_with_unity_is_identity() {
        for basis in bases() {
            let t = basis.product_table();
            for k in 0..=12 {
                let c = t.coeffs(0, k);
                for (l, v) in c.iter().enumerate() {
                    assert_eq!(*v, if l == k { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn monomial_products_are_single_terms() {
        let t = PolyBasis::new(BasisKind::MonomialTime, 6).product_table();
        for j in 0..=6 {
            for k in 0..=6 {
                let c = t.coeffs(j, k);
                for (l, v) in c.iter().enumerate() {
                    assert_eq!(*v, if l == j + k { 1.0 } else { 0.0 });
                }
            }
        }
    }

    // Double-double arithmetic, so the check sees coefficient error only
    // and not the cancellation of evaluating an alternating sum.
    #[derive(Clone, Copy)]
    struct Dd(f64, f64);

    impl Dd {
        fn from(x: f64) -> Self {
            Dd(x, 0.0)
        }
        fn add(self, o: Dd) -> Dd {
            let s = self.0 + o.0;
            let bb = s - self.0;
            let e = (self.0 - (s - bb)) + (o.0 - bb) + self.1 + o.1;
            let hi = s + e;
            Dd(hi, e - (hi - s))
        }
        fn mul(self, o: Dd) -> Dd {
            let p = self.0 * o.0;
            let e = self.0.mul_add(o.0, -p) + self.0 * o.1 + self.1 * o.0;
            let hi = p + e;
            Dd(hi, e - (hi - p))
        }
        fn scale(self, s: f64) -> Dd {
            self.mul(Dd::from(s))
        }
        fn div(self, s: f64) -> Dd {
            let q = self.0 / s;
            let r = self.add(Dd::from(s).scale(-q));
            let q2 = r.0 / s;
            Dd::from(q).add(Dd::from(q2))
        }
    }

    fn eval_all_dd(basis: &PolyBasis, x: f64, count: usize) -> Vec<Dd> {
        let f = basis.frame();
        let u = match basis.kind() {
            BasisKind::PricePoly => Dd::from(x).add(Dd::from(-f.center)).div(f.half_width),
            _ => Dd::from(x),
        };
        let mut out = Vec::with_capacity(count);
        let mut prev = Dd::from(0.0);
        let mut cur = Dd::from(1.0);
        for i in 0..count {
            out.push(cur);
            let (a, b, c, d) = basis.recurrence(i);
            let next = u.scale(a).add(Dd::from(b)).mul(cur).add(prev.scale(-c)).div(d);
            prev = cur;
            cur = next;
        }
        out
    }

    #[test]
    fn product_table_reconstructs_pointwise() {
        for basis in bases() {
            let t = basis.product_table();
            for &x in &sample_points(basis.kind()) {
                let q = eval_all_dd(&basis, x, 25);
                for j in 0..=12 {
                    for k in 0..=12 {
                        let direct = q[j].mul(q[k]);
                        let mut rebuilt = Dd::from(0.0);
                        let mut magnitude = 0.0;
                        for (c, v) in t.coeffs(j, k).iter().zip(&q) {
                            rebuilt = rebuilt.add(v.scale(*c));
                            magnitude += (c * v.0).abs();
                        }
                        let diff = direct.add(rebuilt.scale(-1.0)).0.abs();
                        let tol = 64.0 * f64::EPSILON * magnitude.max(1.0);
                        assert!(
                            diff <= tol,
                            "{:?} j={j} k={k} x={x}: {} vs {} ({diff:e} > {tol:e})",
                            basis.kind(),
                            direct.0,
                            rebuilt.0
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn legendre_square_matches_least_squares_fit() {
        // Fit Q_1^2 on Q_0..Q_2 from 100 samples by normal equations.
        let basis = PolyBasis::new(BasisKind::ShiftedLegendreTime, 4);
        let xs = sample_points(BasisKind::ShiftedLegendreTime);
        let mut ata = DMatrix::<f64>::zeros(3, 3);
        let mut atb = nalgebra::DVector::<f64>::zeros(3);
        for &x in &xs {
            let q = basis.eval_all(x, 3);
            let y = q[1] * q[1];
            for i in 0..3 {
                atb[i] += q[i] * y;
                for j in 0..3 {
                    ata[(i, j)] += q[i] * q[j];
                }
            }
        }
        let fit = ata.lu().solve(&atb).unwrap();
        let table = basis.product_table();
        for (l, c) in table.coeffs(1, 1).iter().enumerate() {
            assert_relative_eq!(*c, fit[l], epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_and_binomial_expansions() {
        for basis in bases() {
            let e = basis.shift_scale_expand(1.0, 0.0, 8).unwrap();
            for n in 0..=8 {
                for (k, v) in e.row(n).iter().enumerate() {
                    assert_relative_eq!(*v, if k == n { 1.0 } else { 0.0 }, epsilon = 1e-13);
                }
            }
        }
        let mono = PolyBasis::new(BasisKind::MonomialTime, 4);
        let e = mono.shift_scale_expand(1.0, 1.0, 2).unwrap();
        assert_eq!(e.row(2), &[1.0, 2.0, 1.0]);
        assert_eq!(mono.shift_scale_expand(0.0, 1.0, 2).unwrap_err(), Error::DegenerateScale);
    }

    #[test]
    fn expansion_reconstructs_and_keeps_leading_term() {
        for basis in bases() {
            let (a, b) = match basis.kind() {
                BasisKind::PricePoly => (0.9, 7.5),
                BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => (0.8, 0.0),
                _ => (1.0, -0.5),
            };
            let e = basis.shift_scale_expand(a, b, 10).unwrap();
            for n in 0..=10 {
                assert_relative_eq!(e.row(n)[n], a.powi(n as i32), max_relative = 1e-12);
            }
            for &x in &sample_points(basis.kind()) {
                let q = basis.eval_all(x, 11);
                for n in 0..=10 {
                    let direct = basis.eval(n, a * x + b).unwrap();
                    let rebuilt: f64 = e.row(n).iter().zip(&q).map(|(d, v)| d * v).sum();
                    assert!(
                        (direct - rebuilt).abs() <= 1e-10 * direct.abs().max(1.0),
                        "{:?} n={n} x={x}",
                        basis.kind()
                    );
                }
            }
        }
    }

    #[test]
    fn laguerre_q2_shift_half() {
        let basis = PolyBasis::new(BasisKind::LaguerreTime, 4);
        let e = basis.shift_scale_expand(1.0, -0.5, 2).unwrap();
        for i in 0..50 {
            let x = -0.3 * i as f64;
            let rebuilt: f64 = e.row(2).iter().enumerate().map(|(k, d)| d * basis.eval(k, x).unwrap()).sum();
            let direct = basis.eval(2, x - 0.5).unwrap();
            assert!((rebuilt - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn expansions_compose() {
        for basis in bases() {
            let (a1, b1, a2, b2) = match basis.kind() {
                BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => (0.7, 0.0, 0.9, 0.0),
                BasisKind::PricePoly => (1.1, -3.0, 0.95, 4.0),
                _ => (1.0, -0.3, 1.0, -1.2),
            };
            let deg = 10;
            let e1 = basis.shift_scale_expand(a1, b1, deg).unwrap();
            let e2 = basis.shift_scale_expand(a2, b2, deg).unwrap();
            // Q_n(a1 (a2 x + b2) + b1)
            let ec = basis.shift_scale_expand(a1 * a2, a1 * b2 + b1, deg).unwrap();
            for n in 0..=deg {
                let mut composed = vec![0.0; n + 1];
                for (j, d1) in e1.row(n).iter().enumerate() {
                    for (k, d2) in e2.row(j).iter().enumerate() {
                        composed[k] += d1 * d2;
                    }
                }
                let scale = ec.row(n).iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (c, d) in composed.iter().zip(ec.row(n)) {
                    assert!((c - d).abs() <= 1e-10 * scale, "{:?} n={n}", basis.kind());
                }
            }
        }
    }

    #[test]
    fn graded_legendre_monomials() {
        let basis = PolyBasis::new(BasisKind::MonomialLegendreTime, 6);
        for &x in &[0.0, 0.3, 0.99, 1.0] {
            for k in 0..=6 {
                assert_relative_eq!(basis.eval(k, x).unwrap(), (1.0 - x).powi(k as i32), max_relative = 1e-14);
            }
        }
        // (1 - a x)^n = sum C(n,k) (1-a)^(n-k) a^k (1 - x)^k, all terms positive
        let e = basis.shift_scale_expand(0.9, 0.0, 3).unwrap();
        let expect = [0.1f64.powi(3), 3.0 * 0.01 * 0.9, 3.0 * 0.1 * 0.81, 0.729];
        for (got, want) in e.row(3).iter().zip(expect) {
            assert_relative_eq!(*got, want, max_relative = 1e-13);
        }
    }

    #[test]
    fn time_shift_of_constant_is_half() {
        for kind in [BasisKind::LaguerreTime, BasisKind::ShiftedLegendreTime, BasisKind::MonomialLegendreTime] {
            let basis = PolyBasis::new(kind, 4);
            assert_eq!(basis.apply_time_shift(&[1.0]).unwrap(), vec![0.5]);
        }
        let price = PolyBasis::price(4, PriceFrame::default()).unwrap();
        assert_eq!(price.apply_time_shift(&[1.0]), Err(Error::NoTimeShiftOperator));
    }

    #[test]
    fn time_shift_matches_finite_difference() {
        for kind in [
            BasisKind::LaguerreTime,
            BasisKind::ShiftedLegendreTime,
            BasisKind::MonomialTime,
            BasisKind::MonomialLegendreTime,
        ] {
            let basis = PolyBasis::new(kind, 8);
            for deg in 1..=6 {
                let mut coeffs = vec![0.0; deg + 1];
                coeffs[deg] = 1.0;
                coeffs[0] = 0.25;
                let dpsi = basis.apply_time_shift(&coeffs).unwrap();
                for i in 0..50 {
                    let x = match kind {
                        BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => {
                            0.01 + 0.98 * i as f64 / 49.0
                        }
                        _ => -8.0 * i as f64 / 49.0,
                    };
                    let h = 1e-5;
                    let fd = (basis.eval_poly(&coeffs, x + h) - basis.eval_poly(&coeffs, x - h)) / (2.0 * h);
                    let v = basis.eval_poly(&coeffs, x);
                    let expected = match kind {
                        BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => x * fd + 0.5 * v,
                        _ => fd + 0.5 * v,
                    };
                    let got = basis.eval_poly(&dpsi, x);
                    assert!(
                        (got - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                        "{kind:?} deg={deg} x={x}: {got} vs {expected}"
                    );
                }
            }
        }
    }
}

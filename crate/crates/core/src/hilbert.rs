//! Dense Hermitian operator algebra on labeled finite bases.
//!
//! Everything here is immutable after construction. A [`DensityMatrix`] carries
//! its own eigendecomposition, computed once when the state is validated, so
//! fractional powers and trace norms do not re-diagonalize.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::format::sig17;

pub type C64 = Complex<f64>;

/// Max |A - A^H| entry deviation accepted for a Hermitian operator.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// |tr rho - 1| accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues at or below this magnitude are treated as exact zeros.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues must exceed this to enter a positive-part projector.
pub const POSITIVE_TOL: f64 = 1e-12;
/// Default cap on dense dimensions (entangled pair at d = 64).
pub const DEFAULT_DIM_CAP: usize = 4160;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    SignalVacuum,
    /// Single photon in signal mode `k`, 1-based.
    SignalMode(usize),
    /// Ancilla photon in mode `k`, 1-based.
    AncillaMode(usize),
    JointProduct(Box<BasisLabel>, Box<BasisLabel>),
    /// Occupation numbers of each mode in a truncated Fock space.
    FockTuple(Vec<u32>),
    /// Everything outside the vacuum and single-photon sector.
    Overflow,
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::SignalVacuum => write!(f, "vac"),
            BasisLabel::SignalMode(k) => write!(f, "s{k}"),
            BasisLabel::AncillaMode(k) => write!(f, "a{k}"),
            BasisLabel::JointProduct(a, b) => write!(f, "({a},{b})"),
            BasisLabel::FockTuple(n) => {
                let parts: Vec<String> = n.iter().map(u32::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
            BasisLabel::Overflow => write!(f, "overflow"),
        }
    }
}

impl BasisLabel {
    fn check(&self, modes: usize, n_max: Option<u32>) -> Result<()> {
        match self {
            BasisLabel::SignalVacuum | BasisLabel::Overflow => Ok(()),
            BasisLabel::SignalMode(k) | BasisLabel::AncillaMode(k) => {
                if (1..=modes).contains(k) {
                    Ok(())
                } else {
                    Err(Error::BasisLabel(format!("mode {k} not in [1, {modes}]")))
                }
            }
            BasisLabel::JointProduct(a, b) => {
                a.check(modes, n_max)?;
                b.check(modes, n_max)
            }
            BasisLabel::FockTuple(occ) => match n_max {
                Some(cap) if occ.iter().any(|&n| n > cap) => Err(Error::BasisLabel(format!(
                    "occupation {self} exceeds truncation {cap}"
                ))),
                _ => Ok(()),
            },
        }
    }
}

/// Ordered, shared list of basis labels.
#[derive(Debug, Clone)]
pub struct Basis(Arc<Vec<BasisLabel>>);

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Basis {
    /// Validates mode indices against `modes` and Fock occupations against `n_max`.
    pub fn new(labels: Vec<BasisLabel>, modes: usize, n_max: Option<u32>) -> Result<Self> {
        for l in &labels {
            l.check(modes, n_max)?;
        }
        Ok(Basis(Arc::new(labels)))
    }

    /// `[vac, s1, ..., sd]`
    pub fn signal(d: usize) -> Self {
        let mut labels = Vec::with_capacity(d + 1);
        labels.push(BasisLabel::SignalVacuum);
        labels.extend((1..=d).map(BasisLabel::SignalMode));
        Basis(Arc::new(labels))
    }

    pub fn ancilla(d: usize) -> Self {
        Basis(Arc::new((1..=d).map(BasisLabel::AncillaMode).collect()))
    }

    /// All occupation tuples of `modes` modes truncated at `n_max`, first mode major.
    pub fn fock(modes: usize, n_max: u32) -> Self {
        let per = n_max as usize + 1;
        let dim = per.pow(modes as u32);
        let labels = (0..dim)
            .map(|mut idx| {
                let mut occ = vec![0u32; modes];
                for slot in occ.iter_mut().rev() {
                    *slot = (idx % per) as u32;
                    idx /= per;
                }
                BasisLabel::FockTuple(occ)
            })
            .collect();
        Basis(Arc::new(labels))
    }

    /// Row-major product basis, `a` index major.
    pub fn product(a: &Basis, b: &Basis) -> Self {
        let labels = a
            .iter()
            .flat_map(|x| {
                b.iter().map(move |y| {
                    BasisLabel::JointProduct(Box::new(x.clone()), Box::new(y.clone()))
                })
            })
            .collect();
        Basis(Arc::new(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BasisLabel> {
        self.0.iter()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.0
    }

    pub fn position(&self, label: &BasisLabel) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<C64>,
    basis: Basis,
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` with `(m + m^H) / 2`.
fn hermitize(mut m: DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    m
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<C64>, basis: Basis) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != basis.len() {
            return Err(Error::BasisLength {
                labels: basis.len(),
                dim: matrix.nrows(),
            });
        }
        let deviation = hermitian_deviation(&matrix);
        if !(deviation <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::from_parts(matrix, basis))
    }

    /// Internal constructor for results that are Hermitian up to rounding.
    pub(crate) fn from_parts(matrix: DMatrix<C64>, basis: Basis) -> Self {
        debug_assert_eq!(matrix.nrows(), basis.len());
        HermitianOperator {
            matrix: hermitize(matrix),
            basis,
        }
    }

    pub fn from_real_diagonal(diag: &[f64], basis: Basis) -> Result<Self> {
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(m, basis)
    }

    pub fn identity(basis: Basis) -> Self {
        let n = basis.len();
        Self::from_parts(DMatrix::identity(n, n), basis)
    }

    pub fn zeros(basis: Basis) -> Self {
        let n = basis.len();
        Self::from_parts(DMatrix::zeros(n, n), basis)
    }

    /// `|v><v|`, without normalizing `v`.
    pub fn projector(v: &DVector<C64>, basis: Basis) -> Result<Self> {
        if v.len() != basis.len() {
            return Err(Error::BasisLength {
                labels: basis.len(),
                dim: v.len(),
            });
        }
        Ok(Self::from_parts(v * v.adjoint(), basis))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_parts(&self.matrix * C64::new(factor, 0.0), self.basis.clone())
    }

    fn same_basis(&self, other: &Self) -> Result<()> {
        if self.basis == other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_parts(&self.matrix + &other.matrix, self.basis.clone()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_parts(&self.matrix - &other.matrix, self.basis.clone()))
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_basis(other)?;
        let m = &self.matrix * C64::new(a, 0.0) + &other.matrix * C64::new(b, 0.0);
        Ok(Self::from_parts(m, self.basis.clone()))
    }

    /// Real part of `tr(self * other)`, computed without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        self.same_basis(other)?;
        // tr(AB) = sum_ij A_ij B_ji
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        Ok(acc.re)
    }

    /// `<v|A|v>`
    pub fn expectation(&self, v: &DVector<C64>) -> f64 {
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

/// `a ⊗ b` on the `JointProduct` basis, `a` index major.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::from_parts(
        a.matrix.kronecker(&b.matrix),
        Basis::product(&a.basis, &b.basis),
    )
}

/// Real spectrum in descending order with aligned orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
    basis: Basis,
}

impl Spectrum {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(diag λ) V^H`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).scale_mut(w);
        }
        HermitianOperator::from_parts(&scaled * self.eigenvectors.adjoint(), self.basis.clone())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn eig_hermitian(h: &HermitianOperator) -> Result<Spectrum> {
    let n = h.dim();
    let scale = h.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenFailure { dim: n, scale })?;
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure { dim: n, scale });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        basis: h.basis.clone(),
    })
}

/// Unit-trace positive semidefinite operator together with its spectrum.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: HermitianOperator,
    spectrum: Spectrum,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let spectrum = eig_hermitian(&op)?;
        let trace = op.trace();
        let min_eigenvalue = spectrum.min_eigenvalue();
        if !((trace - 1.0).abs() <= TRACE_TOL) || min_eigenvalue < -PSD_TOL {
            return Err(Error::NotDensity {
                trace,
                min_eigenvalue,
            });
        }
        Ok(DensityMatrix { op, spectrum })
    }

    pub fn pure(v: &DVector<C64>, basis: Basis) -> Result<Self> {
        Self::new(HermitianOperator::projector(v, basis)?)
    }

    pub fn maximally_mixed(basis: Basis) -> Result<Self> {
        let n = basis.len() as f64;
        Self::new(HermitianOperator::identity(basis).scale(1.0 / n))
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn basis(&self) -> &Basis {
        self.op.basis()
    }

    /// True when no eigenvalue is clipped to zero.
    pub fn full_support(&self) -> bool {
        self.spectrum.min_eigenvalue() > PSD_TOL
    }
}

/// Clipped eigenvalue power with `0^s = 0` for every `s`, including `s = 0`.
pub(crate) fn clipped_pow(lam: f64, s: f64) -> f64 {
    if lam <= PSD_TOL {
        0.0
    } else {
        lam.powf(s)
    }
}

pub(crate) fn check_unit_exponent(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::domain("s", s, "exponent must lie in [0, 1]"))
    }
}

/// `rho^s`; at `s = 0` this is the projector onto the support of `rho`.
pub fn dm_power(rho: &DensityMatrix, s: f64) -> Result<HermitianOperator> {
    check_unit_exponent(s)?;
    Ok(rho.spectrum.map(|lam| clipped_pow(lam, s)))
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(h: &HermitianOperator) -> Result<f64> {
    Ok(eig_hermitian(h)?.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// Unhalved trace norm `||a - b||_1`, in `[0, 2]`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    trace_norm(&a.op.sub(&b.op)?)
}

/// Projector onto eigenvectors of `delta` with eigenvalue above [`POSITIVE_TOL`].
pub fn positive_part_projector(delta: &HermitianOperator) -> Result<HermitianOperator> {
    let spec = eig_hermitian(delta)?;
    Ok(spec.map(|lam| if lam > POSITIVE_TOL { 1.0 } else { 0.0 }))
}

/// Plain-text matrix dump: `dim <n>` then `row col re im` per entry.
pub fn write_dump(op: &HermitianOperator) -> String {
    let n = op.dim();
    let mut out = String::with_capacity(16 + n * n * 52);
    out.push_str(&format!("dim {n}\n"));
    for r in 0..n {
        for c in 0..n {
            let z = op.matrix[(r, c)];
            out.push_str(&format!("{r} {c} {} {}\n", sig17(z.re), sig17(z.im)));
        }
    }
    out
}

pub fn parse_dump(text: &str) -> Result<DMatrix<C64>> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty dump"))?;
    let n: usize = head
        .strip_prefix("dim ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(1, "expected `dim <n>`"))?;
    let mut m = DMatrix::zeros(n, n);
    let mut seen = 0usize;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, "expected `row col re im`"));
        }
        let r: usize = fields[0].parse().map_err(|_| Error::parse(line_no, "bad row"))?;
        let c: usize = fields[1].parse().map_err(|_| Error::parse(line_no, "bad col"))?;
        if r >= n || c >= n {
            return Err(Error::parse(line_no, "index out of range"));
        }
        let re: f64 = fields[2].parse().map_err(|_| Error::parse(line_no, "bad re"))?;
        let im: f64 = fields[3].parse().map_err(|_| Error::parse(line_no, "bad im"))?;
        m[(r, c)] = C64::new(re, im);
        seen += 1;
    }
    if seen != n * n {
        return Err(Error::parse(0, format!("expected {} entries, found {seen}", n * n)));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag_dm(diag: &[f64]) -> DensityMatrix {
        let basis = Basis::fock(1, diag.len() as u32 - 1);
        DensityMatrix::new(HermitianOperator::from_real_diagonal(diag, basis).unwrap()).unwrap()
    }

    #[test]
    fn tensor_of_identities() {
        let a = HermitianOperator::identity(Basis::signal(1));
        let b = HermitianOperator::identity(Basis::ancilla(3));
        let t = tensor(&a, &b);
        assert_eq!(t.dim(), 6);
        assert_eq!(t.matrix(), &DMatrix::<C64>::identity(6, 6));
        assert_eq!(
            t.basis().labels()[1],
            BasisLabel::JointProduct(
                Box::new(BasisLabel::SignalVacuum),
                Box::new(BasisLabel::AncillaMode(2))
            )
        );
    }

    #[test]
    fn tensor_with_mixed_ancilla_has_rank_d() {
        let mut v = DVector::zeros(3);
        v[0] = c(1.0);
        let pure = HermitianOperator::projector(&v, Basis::signal(2)).unwrap();
        let mixed = HermitianOperator::identity(Basis::ancilla(4)).scale(0.25);
        let rho = DensityMatrix::new(tensor(&pure, &mixed)).unwrap();
        let nonzero: Vec<f64> = rho
            .spectrum()
            .eigenvalues
            .iter()
            .copied()
            .filter(|x| x.abs() > 1e-12)
            .collect();
        assert_eq!(nonzero.len(), 4);
        for x in nonzero {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn tensor_thermal_with_mixed_ancilla_diagonal() {
        // (1 - db) = 0.98 and b = 0.01 at d = 2, each halved by I/2
        let rho0 =
            HermitianOperator::from_real_diagonal(&[0.98, 0.01, 0.01], Basis::signal(2)).unwrap();
        let anc = HermitianOperator::identity(Basis::ancilla(2)).scale(0.5);
        let joint = tensor(&rho0, &anc);
        let expected = [0.49, 0.49, 0.005, 0.005, 0.005, 0.005];
        for (got, want) in joint.diagonal().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn eig_sorted_descending() {
        let h = HermitianOperator::from_real_diagonal(&[0.2, 0.8], Basis::signal(1)).unwrap();
        let s = eig_hermitian(&h).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn eig_of_rank_one_projector() {
        let v = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), c(0.0)]);
        let p = HermitianOperator::projector(&v, Basis::signal(2)).unwrap();
        let s = eig_hermitian(&p).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        let err = HermitianOperator::new(m, Basis::signal(1)).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn rejects_bad_density() {
        let h = HermitianOperator::from_real_diagonal(&[1.2, -0.2], Basis::signal(1)).unwrap();
        assert!(matches!(
            DensityMatrix::new(h),
            Err(Error::NotDensity { .. })
        ));
        let h = HermitianOperator::from_real_diagonal(&[0.5, 0.4], Basis::signal(1)).unwrap();
        assert!(matches!(
            DensityMatrix::new(h),
            Err(Error::NotDensity { .. })
        ));
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clipped_not_rejected() {
        let h =
            HermitianOperator::from_real_diagonal(&[1.0 + 5e-11, -5e-11], Basis::signal(1)).unwrap();
        let rho = DensityMatrix::new(h).unwrap();
        let p = dm_power(&rho, 0.0).unwrap();
        assert_abs_diff_eq!(p.diagonal()[1], 0.0);
    }

    #[test]
    fn power_examples() {
        let rho = diag_dm(&[0.25, 0.75]);
        let half = dm_power(&rho, 0.5).unwrap();
        assert_abs_diff_eq!(half.diagonal()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(half.diagonal()[1], 0.8660254037844386, epsilon = 1e-12);

        let one = dm_power(&rho, 1.0).unwrap();
        assert!(one.max_abs_diff(rho.op()) < 1e-12);

        let rho = diag_dm(&[0.4, 0.0, 0.6]);
        let support = dm_power(&rho, 0.0).unwrap();
        let want = [1.0, 0.0, 1.0];
        for (g, w) in support.diagonal().iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn power_rejects_out_of_range_exponent() {
        let rho = diag_dm(&[0.5, 0.5]);
        assert!(matches!(dm_power(&rho, 1.5), Err(Error::Domain { .. })));
        assert!(matches!(dm_power(&rho, -0.1), Err(Error::Domain { .. })));
        assert!(matches!(dm_power(&rho, f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn trace_distance_examples() {
        let a = diag_dm(&[1.0, 0.0]);
        let b = diag_dm(&[0.0, 1.0]);
        assert_abs_diff_eq!(trace_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&a, &b).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_distance_basis_mismatch() {
        let a = diag_dm(&[1.0, 0.0]);
        let b = DensityMatrix::new(
            HermitianOperator::from_real_diagonal(&[1.0, 0.0], Basis::signal(1)).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            trace_distance(&a, &b),
            Err(Error::BasisMismatch { .. })
        ));
    }

    #[test]
    fn positive_part_examples() {
        let basis = Basis::signal(1);
        let p = positive_part_projector(&HermitianOperator::identity(basis.clone()).scale(-1.0))
            .unwrap();
        assert!(p.max_abs_diff(&HermitianOperator::zeros(basis.clone())) < 1e-15);

        let d = HermitianOperator::from_real_diagonal(&[1.0, -1.0], basis.clone()).unwrap();
        let p = positive_part_projector(&d).unwrap();
        let want = HermitianOperator::from_real_diagonal(&[1.0, 0.0], basis).unwrap();
        assert!(p.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn basis_validation() {
        assert!(Basis::new(vec![BasisLabel::SignalMode(3)], 2, None).is_err());
        assert!(Basis::new(vec![BasisLabel::SignalMode(0)], 2, None).is_err());
        assert!(Basis::new(vec![BasisLabel::FockTuple(vec![0, 5])], 2, Some(4)).is_err());
        assert!(Basis::new(vec![BasisLabel::SignalMode(2)], 2, None).is_ok());
    }

    #[test]
    fn fock_basis_order() {
        let b = Basis::fock(2, 1);
        let want: Vec<BasisLabel> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|o| BasisLabel::FockTuple(o.to_vec()))
            .collect();
        assert_eq!(b.labels(), &want[..]);
    }

    #[test]
    fn dump_parse_round_trip() {
        let v = DVector::from_vec(vec![C64::new(0.6, 0.1), C64::new(-0.2, 0.7)]);
        let p = HermitianOperator::projector(&v, Basis::signal(1)).unwrap();
        let text = write_dump(&p);
        assert!(text.starts_with("dim 2\n0 0 "));
        assert_eq!(text.lines().count(), 5);
        let back = parse_dump(&text).unwrap();
        assert_eq!(&back, p.matrix());
        assert!(parse_dump("dim 2\n0 0 1 0\n").is_err());
        assert!(parse_dump("size 2\n").is_err());
    }

    fn random_hermitian(n: usize, seed: &[f64]) -> HermitianOperator {
        let mut m = DMatrix::<C64>::zeros(n, n);
        let mut it = seed.iter().cycle();
        for i in 0..n {
            m[(i, i)] = c(*it.next().unwrap());
            for j in (i + 1)..n {
                let z = C64::new(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        HermitianOperator::new(m, Basis::fock(1, n as u32 - 1)).unwrap()
    }

    fn random_density(n: usize, seed: &[f64]) -> DensityMatrix {
        // A A^H / tr
        let h = random_hermitian(n, seed);
        let m = h.matrix() * h.matrix().adjoint();
        let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
        DensityMatrix::new(HermitianOperator::from_parts(
            m * c(1.0 / tr),
            h.basis().clone(),
        ))
        .unwrap()
    }

    proptest! {
        #[test]
        fn spectrum_reconstructs_and_is_unitary(
            n in 1usize..8,
            seed in proptest::collection::vec(-1.0f64..1.0, 64)
        ) {
            let h = random_hermitian(n, &seed);
            let s = eig_hermitian(&h).unwrap();
            prop_assert!(s.reconstruct().max_abs_diff(&h) < 1e-10);
            let u = &s.eigenvectors;
            let gram = u.adjoint() * u;
            let dev = (gram - DMatrix::<C64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(dev < 1e-10);
            for w in s.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn trace_distance_is_a_metric_bounded_by_two(
            n in 2usize..6,
            s1 in proptest::collection::vec(-1.0f64..1.0, 40),
            s2 in proptest::collection::vec(-1.0f64..1.0, 40),
        ) {
            let a = random_density(n, &s1);
            let b = random_density(n, &s2);
            let ab = trace_distance(&a, &b).unwrap();
            let ba = trace_distance(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
            prop_assert!(trace_distance(&a, &a).unwrap() < 1e-10);
        }

        #[test]
        fn power_endpoints(
            n in 2usize..6,
            seed in proptest::collection::vec(-1.0f64..1.0, 40),
        ) {
            let rho = random_density(n, &seed);
            prop_assert!(dm_power(&rho, 1.0).unwrap().max_abs_diff(rho.op()) < 1e-10);
            let p0 = dm_power(&rho, 0.0).unwrap();
            let sq = HermitianOperator::from_parts(p0.matrix() * p0.matrix(), p0.basis().clone());
            prop_assert!(sq.max_abs_diff(&p0) < 1e-10);
        }

        #[test]
        fn positive_part_splits_sign(
            n in 1usize..7,
            seed in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let delta = random_hermitian(n, &seed);
            let p = positive_part_projector(&delta).unwrap();
            let pm = p.matrix();
            prop_assert!((pm * pm - pm).iter().all(|z| z.norm() < 1e-10));
            let id = DMatrix::<C64>::identity(n, n);
            let q = &id - pm;
            let pos = HermitianOperator::from_parts(pm * delta.matrix() * pm, p.basis().clone());
            let neg = HermitianOperator::from_parts(&q * delta.matrix() * &q, p.basis().clone());
            prop_assert!(eig_hermitian(&pos).unwrap().min_eigenvalue() > -1e-10);
            prop_assert!(eig_hermitian(&neg).unwrap().eigenvalues[0] < 1e-10);
        }
    }
}

//! Dense-matrix ground truth for small probes.
//!
//! Basis ordering: qubit 0 is the most significant bit of the basis index, so
//! `to_matrix("ZI")` is `Z ⊗ I` in the usual Kronecker sense.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{Commutation, PauliProduct, PauliSum};

/// Largest probe realized densely (dimension 4096).
pub const MAX_DENSE_QUBITS: usize = 12;

pub const UNITARY_TOL: f64 = 1e-8;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    m: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceResult {
    pub value: Complex64,
    /// `value / 2^n`
    pub normalized: Complex64,
}

fn check_dense(n: usize) -> Result<()> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::ResourceLimit { n, max: MAX_DENSE_QUBITS });
    }
    Ok(())
}

impl DenseOperator {
    pub fn from_matrix(n: usize, m: CMatrix) -> Result<Self> {
        let dim = 1usize << n;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::InvalidParameter(format!(
                "{}x{} matrix cannot act on {n} qubits",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { n, m })
    }

    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        Self { n, m: CMatrix::identity(dim, dim) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { n: self.n, m: self.m.adjoint() }
    }

    pub fn mul(&self, other: &DenseOperator) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(Self { n: self.n, m: &self.m * &other.m })
    }

    /// Product of a left-to-right list of factors.
    pub fn product<'a, I>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DenseOperator>,
    {
        let mut it = factors.into_iter();
        let first = it.next().ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
        it.try_fold(first.clone(), |acc, f| acc.mul(f))
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.m.clone();
        let mut acc = CMatrix::identity(self.dim(), self.dim());
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Self { n: self.n, m: acc }
    }

    pub fn trace(&self) -> TraceResult {
        let value = self.m.trace();
        TraceResult { value, normalized: value / self.dim() as f64 }
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖U†U − 1‖_max`
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.m.adjoint() * &self.m;
        g.iter()
            .enumerate()
            .map(|(k, v)| {
                let (r, c) = (k % g.nrows(), k / g.nrows());
                if r == c {
                    (v - ONE).norm()
                } else {
                    v.norm()
                }
            })
            .fold(0.0, f64::max)
    }

    /// `‖A − A†‖_max`
    pub fn hermiticity_defect(&self) -> f64 {
        self.m
            .iter()
            .zip(self.m.adjoint().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.m.clone().singular_values().max()
    }
}

/// Kronecker realization of a Pauli product (phase included).
pub fn product_matrix(p: &PauliProduct) -> Result<DenseOperator> {
    let n = p.n();
    check_dense(n)?;
    let dim = 1usize << n;
    let (xi, zi) = index_masks(p);
    let y_count = (p.x_mask() & p.z_mask()).count_ones() as u8;
    let global = i_pow(p.phase_exponent() + y_count);
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let row = col ^ xi;
        let sign = if (col & zi).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        m[(row, col)] = global * sign;
    }
    Ok(DenseOperator { n, m })
}

pub fn sum_matrix(h: &PauliSum) -> Result<DenseOperator> {
    let n = h.n();
    check_dense(n)?;
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for &(c, p) in h.terms() {
        let (xi, zi) = index_masks(&p);
        let y_count = (p.x_mask() & p.z_mask()).count_ones() as u8;
        let global = i_pow(y_count) * c;
        for col in 0..dim {
            let sign = if (col & zi).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(col ^ xi, col)] += global * sign;
        }
    }
    Ok(DenseOperator { n, m })
}

/// Qubit masks re-expressed on basis-index bits (qubit 0 is the MSB).
fn index_masks(p: &PauliProduct) -> (usize, usize) {
    let n = p.n();
    let (mut xi, mut zi) = (0usize, 0usize);
    for k in 0..n {
        let bit = 1usize << (n - 1 - k);
        if p.x_mask() >> k & 1 == 1 {
            xi |= bit;
        }
        if p.z_mask() >> k & 1 == 1 {
            zi |= bit;
        }
    }
    (xi, zi)
}

fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => ONE,
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Cached eigendecomposition `H = V Λ V†` of a Hermitian operator, so that
/// `exp(−i a H)` costs two matrix products per angle.
#[derive(Debug, Clone)]
pub struct Spectral {
    n: usize,
    eigenvalues: Vec<f64>,
    vectors: CMatrix,
}

impl Spectral {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > 1e-12 * (1.0 + h.matrix().iter().map(|v| v.norm()).fold(0.0, f64::max)) {
            return Err(Error::NonHermitian(format!("‖A − A†‖_max = {defect:.3e}")));
        }
        let eig = SymmetricEigen::new(h.m.clone());
        Ok(Self { n: h.n, eigenvalues: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
    }

    pub fn of_sum(h: &PauliSum) -> Result<Self> {
        Self::new(&sum_matrix(h)?)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Largest |eigenvalue|, the spectral norm of `H`.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `exp(−i·angle·H)`
    pub fn exp_i(&self, angle: f64) -> DenseOperator {
        let phases: Vec<Complex64> =
            self.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * angle)).collect();
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        DenseOperator { n: self.n, m: scaled * self.vectors.adjoint() }
    }
}

/// `exp(−i·theta_t·H)` via Hermitian eigendecomposition; single products use
/// the closed form `cos(a)·1 − i·sin(a)·P`.
pub fn evolve(h: &PauliSum, theta_t: f64) -> Result<DenseOperator> {
    if !theta_t.is_finite() {
        return Err(Error::InvalidParameter(format!("evolution angle {theta_t} is not finite")));
    }
    check_dense(h.n())?;
    if let Some((c, p)) = h.as_single() {
        return Ok(exp_product(&p, c * theta_t)?);
    }
    if h.is_empty() {
        return Ok(DenseOperator::identity(h.n()));
    }
    Ok(Spectral::of_sum(h)?.exp_i(theta_t))
}

/// `exp(−i·a·P)` for a phase-free product `P`.
pub fn exp_product(p: &PauliProduct, a: f64) -> Result<DenseOperator> {
    if !p.is_phase_free() {
        return Err(Error::NonHermitian(format!("{p} carries a phase")));
    }
    let pm = product_matrix(p)?;
    let dim = pm.dim();
    let m = CMatrix::identity(dim, dim) * Complex64::new(a.cos(), 0.0)
        + pm.m * Complex64::new(0.0, -a.sin());
    Ok(DenseOperator { n: p.n(), m })
}

/// `tr[W† A W B] / 2^n`
pub fn heisenberg_trace(w: &DenseOperator, a: &DenseOperator, b: &DenseOperator) -> Result<TraceResult> {
    if w.n != a.n || w.n != b.n {
        return Err(Error::DimensionMismatch { left: w.n, right: if w.n != a.n { a.n } else { b.n } });
    }
    let wa = w.m.adjoint() * &a.m;
    let wb = &w.m * &b.m;
    // tr[XY] = Σ_ij X_ij Y_ji
    let mut value = ZERO;
    for i in 0..wa.nrows() {
        for j in 0..wa.ncols() {
            value += wa[(i, j)] * wb[(j, i)];
        }
    }
    Ok(TraceResult { value, normalized: value / w.dim() as f64 })
}

/// Exact ancilla expectations `(⟨σx⟩, ⟨σy⟩)` of the one-clean-qubit trace
/// circuit: `Re` and `Im` of `tr[U] / 2^n`.
pub fn dqc1_mean(u: &DenseOperator) -> Result<(f64, f64)> {
    let defect = u.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::NonUnitary { deviation: defect });
    }
    let t = u.trace().normalized;
    Ok((t.re, t.im))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TrotterOrder {
    /// `e^{−iHh/2} σ e^{−iHh/2} σ`, local error `O(h²)`.
    Second,
    /// `e^{−iHh/4} σ e^{−iHh/2} σ e^{−iHh/4}`, local error `O(h³)`.
    Third,
}

impl TrotterOrder {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            2 => Ok(TrotterOrder::Second),
            3 => Ok(TrotterOrder::Third),
            other => Err(Error::InvalidParameter(format!("unsupported product-formula order {other}"))),
        }
    }

    /// Error exponent `p` in `‖S(h) − S̄(h)‖ = O(h^p)`.
    pub fn p(self) -> u32 {
        match self {
            TrotterOrder::Second => 2,
            TrotterOrder::Third => 3,
        }
    }
}

/// Product-formula approximation of `exp(−i·εT·(H + σHσ)/2)` built from
/// evolutions under the full `H` and bare `σ` gates.
pub fn trotter_step(h: &PauliSum, sigma: &PauliProduct, eps_t: f64, order: TrotterOrder) -> Result<DenseOperator> {
    if !(eps_t > 0.0) {
        return Err(Error::InvalidParameter(format!("slice time must be positive, got {eps_t}")));
    }
    let spectral = Spectral::of_sum(h)?;
    trotter_step_with(&spectral, &product_matrix(&sigma.without_phase())?, eps_t, order)
}

pub(crate) fn trotter_step_with(
    spectral: &Spectral,
    sigma: &DenseOperator,
    eps_t: f64,
    order: TrotterOrder,
) -> Result<DenseOperator> {
    match order {
        TrotterOrder::Second => {
            let half = spectral.exp_i(eps_t / 2.0);
            DenseOperator::product([&half, sigma, &half, sigma])
        }
        TrotterOrder::Third => {
            let quarter = spectral.exp_i(eps_t / 4.0);
            let half = spectral.exp_i(eps_t / 2.0);
            DenseOperator::product([&quarter, sigma, &half, sigma, &quarter])
        }
    }
}

/// Exact decoupled evolution `exp(−i·T·(H + σHσ)/2)`.
pub fn decoupled_evolution(h: &PauliSum, sigma: &PauliProduct, total_t: f64) -> Result<DenseOperator> {
    evolve(&h.decouple(sigma)?, total_t)
}

/// Spectral-norm distance between the decoupled evolution over `total_t` and
/// `q` repetitions of the product-formula slice of length `total_t / q`.
pub fn trotter_error(h: &PauliSum, sigma: &PauliProduct, total_t: f64, q: u64, order: TrotterOrder) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidParameter("slice count must be at least 1".into()));
    }
    let exact = decoupled_evolution(h, sigma, total_t)?;
    let approx = trotter_step(h, sigma, total_t / q as f64, order)?.pow(q);
    Ok(DenseOperator { n: exact.n, m: exact.m - approx.m }.spectral_norm())
}

/// Commutation-aware helper: true when `σ` commutes with every term of `h`,
/// in which case every product formula above is exact.
pub fn commutes_with_all(h: &PauliSum, sigma: &PauliProduct) -> bool {
    h.terms().iter().all(|(_, p)| p.commutation_unchecked(sigma) == Commutation::Commute)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(s: &str) -> PauliProduct {
        s.parse().unwrap()
    }

    fn sum(e: &[&str]) -> PauliSum {
        PauliSum::parse_terms(e).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent Kronecker construction used only by the tests.
    fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    fn single(s: char) -> CMatrix {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match s {
            'I' => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            'X' => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            'Y' => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    fn kron_label(s: &str) -> CMatrix {
        s.chars().map(single).reduce(|a, b| kron(&a, &b)).unwrap()
    }

    #[test]
    fn sigma_z_matrix() {
        let m = product_matrix(&p("Z")).unwrap();
        assert_eq!(m.matrix(), &single('Z'));
    }

    #[test]
    fn identity_matrix() {
        let m = product_matrix(&p("III")).unwrap();
        assert_eq!(m, DenseOperator::identity(3));
    }

    #[test]
    fn sum_matches_kronecker() {
        let m = sum_matrix(&sum(&["0.5*ZZ", "0.5*XX"])).unwrap();
        let expected = kron_label("ZZ") * c(0.5, 0.0) + kron_label("XX") * c(0.5, 0.0);
        assert!((m.matrix() - expected).iter().all(|v| v.norm() < 1e-15));
        for label in ["XYZ", "YIY", "ZXI"] {
            let m = product_matrix(&p(label)).unwrap();
            assert!((m.matrix() - kron_label(label)).iter().all(|v| v.norm() < 1e-15), "{label}");
        }
    }

    #[test]
    fn too_many_qubits() {
        let big = PauliProduct::identity(13).unwrap();
        assert!(matches!(product_matrix(&big), Err(Error::ResourceLimit { n: 13, .. })));
    }

    #[test]
    fn evolve_sigma_z_quarter_turn() {
        let u = evolve(&sum(&["Z"]), std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(u.matrix()[(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.matrix()[(0, 0)].im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.matrix()[(1, 1)].im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evolve_zero_angle_is_identity() {
        let u = evolve(&sum(&["0.3*ZI", "0.7*XX"]), 0.0).unwrap();
        assert!(u.max_abs_diff(&DenseOperator::identity(2)) < 1e-14);
    }

    #[test]
    fn single_product_fast_path_matches_eigendecomposition() {
        for (label, a) in [("XYZ", 0.37), ("ZZ", -2.1), ("Y", 5.0)] {
            let fast = exp_product(&p(label), a).unwrap();
            let slow = Spectral::of_sum(&sum(&[label])).unwrap().exp_i(a);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "{label}");
        }
    }

    #[test]
    fn evolve_group_property_and_unitarity() {
        let h = sum(&["0.3*ZI", "0.7*XX", "-0.2*YZ"]);
        let s = Spectral::of_sum(&h).unwrap();
        let ab = s.exp_i(0.4).mul(&s.exp_i(1.1)).unwrap();
        assert!(ab.max_abs_diff(&s.exp_i(1.5)) < 1e-9);
        assert!(s.exp_i(123.4).unitarity_defect() < 1e-10);
    }

    #[test]
    fn heisenberg_trace_examples() {
        let id = DenseOperator::identity(2);
        let x = product_matrix(&p("XI")).unwrap();
        assert_abs_diff_eq!(heisenberg_trace(&id, &x, &x).unwrap().normalized.re, 1.0, epsilon = 1e-15);

        let w = evolve(&sum(&["0.3*ZI", "0.3*IZ"]), 1.0).unwrap();
        let y = product_matrix(&p("YI")).unwrap();
        let cos = heisenberg_trace(&w, &x, &x).unwrap().normalized;
        let sin = heisenberg_trace(&w, &x, &y).unwrap().normalized;
        assert_abs_diff_eq!(cos.re, 0.6f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(cos.re, 0.825336, epsilon = 1e-6);
        assert_abs_diff_eq!(sin.re, -0.6f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(sin.re, -0.564642, epsilon = 1e-6);
        assert!(heisenberg_trace(&w, &x, &DenseOperator::identity(1)).is_err());
    }

    #[test]
    fn dqc1_mean_examples() {
        assert_eq!(dqc1_mean(&DenseOperator::identity(3)).unwrap(), (1.0, 0.0));

        let field = sum(&["0.3*ZIII", "0.3*IZII", "0.3*IIZI", "0.3*IIIZ"]);
        let (mx, my) = dqc1_mean(&evolve(&field, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(mx, 0.3f64.cos().powi(4), epsilon = 1e-12);
        assert_abs_diff_eq!(mx, 0.832961, epsilon = 2e-6);
        assert_abs_diff_eq!(my, 0.0, epsilon = 1e-12);

        let w = evolve(&sum(&["0.3*ZI", "0.3*IZ"]), 1.0).unwrap();
        let x = product_matrix(&p("XI")).unwrap();
        let u = DenseOperator::product([&w.adjoint(), &x, &w, &x]).unwrap();
        let (mx, my) = dqc1_mean(&u).unwrap();
        assert_abs_diff_eq!(mx, 0.6f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(my, 0.0, epsilon = 1e-12);

        let not_unitary = DenseOperator::from_matrix(1, single('X') * c(2.0, 0.0)).unwrap();
        assert!(matches!(dqc1_mean(&not_unitary), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn trotter_commuting_case_is_exact() {
        let h = sum(&["0.3*ZI", "0.7*IZ"]);
        let sigma = p("ZZ");
        for order in [TrotterOrder::Second, TrotterOrder::Third] {
            let step = trotter_step(&h, &sigma, 0.1, order).unwrap();
            assert!(step.max_abs_diff(&evolve(&h, 0.1).unwrap()) < 1e-13);
        }
    }

    #[test]
    fn trotter_local_order() {
        // σ = IZ cancels 0.7·XX and keeps 0.3·ZI; the two pieces do not commute.
        let h = sum(&["0.3*ZI", "0.7*XX"]);
        let sigma = p("IZ");
        let local = |h_t: f64, order| {
            let exact = decoupled_evolution(&h, &sigma, h_t).unwrap();
            let approx = trotter_step(&h, &sigma, h_t, order).unwrap();
            DenseOperator::from_matrix(2, exact.into_matrix() - approx.into_matrix()).unwrap().spectral_norm()
        };
        let r2 = local(0.01, TrotterOrder::Second) / local(0.005, TrotterOrder::Second);
        let r3 = local(0.01, TrotterOrder::Third) / local(0.005, TrotterOrder::Third);
        assert!((r2 - 4.0).abs() < 0.1, "order-2 ratio {r2}");
        assert!((r3 - 8.0).abs() < 0.2, "order-3 ratio {r3}");
    }

    #[test]
    fn trotter_global_order() {
        let h = sum(&["0.3*ZI", "0.7*XX"]);
        let sigma = p("IZ");
        let e10 = trotter_error(&h, &sigma, 1.0, 10, TrotterOrder::Second).unwrap();
        let e20 = trotter_error(&h, &sigma, 1.0, 20, TrotterOrder::Second).unwrap();
        assert!((e10 / e20 - 2.0).abs() < 0.4, "ratio {}", e10 / e20);
        let mut last = f64::INFINITY;
        for q in [50, 100, 200, 400, 800] {
            let e = trotter_error(&h, &sigma, 1.0, q, TrotterOrder::Third).unwrap();
            assert!(e < last);
            last = e;
        }
        assert!(trotter_error(&h, &sigma, 1.0, 0, TrotterOrder::Second).is_err());
        assert!(TrotterOrder::from_p(4).is_err());
    }

    #[test]
    fn power_difference_bound() {
        // ‖A^q − B^q‖ ≤ q‖A − B‖ for unitaries.
        let h = sum(&["0.3*ZI", "0.7*XX", "0.4*YY"]);
        let sigma = p("IZ");
        let a = decoupled_evolution(&h, &sigma, 0.05).unwrap();
        let b = trotter_step(&h, &sigma, 0.05, TrotterOrder::Second).unwrap();
        let single = DenseOperator::from_matrix(2, a.matrix() - b.matrix()).unwrap().spectral_norm();
        for q in [2u64, 7, 31] {
            let d = DenseOperator::from_matrix(2, a.pow(q).into_matrix() - b.pow(q).into_matrix())
                .unwrap()
                .spectral_norm();
            assert!(d <= q as f64 * single * (1.0 + 1e-9), "q = {q}");
        }
    }

    #[test]
    fn pow_matches_repeated_product() {
        let u = evolve(&sum(&["0.3*ZI", "0.7*XX"]), 0.7).unwrap();
        let mut acc = DenseOperator::identity(2);
        for _ in 0..13 {
            acc = acc.mul(&u).unwrap();
        }
        assert!(acc.max_abs_diff(&u.pow(13)) < 1e-12);
    }
}

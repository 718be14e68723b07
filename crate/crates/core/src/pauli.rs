//! Symbolic algebra of Pauli products and real Pauli sums.
//!
//! A product on `n` qubits is stored as a pair of bitmasks in the symplectic
//! encoding (bit `k` of `x` / `z` describes the factor on qubit `k`) together
//! with a global phase `i^phase`. Factors are the literal Pauli matrices, so
//! `x = z = 1` on a site means `Y`, not `XZ`.
//!
//! Text form: one character per qubit, qubit 0 first (`"ZZI"` is `Z ⊗ Z ⊗ I`),
//! optionally prefixed by `+`, `-`, `i` or `-i`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported register. The masks are single machine words.
pub const MAX_QUBITS: usize = 64;

/// Coefficient tolerance used for symbolic equality of sums.
pub const COEFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Commutation {
    Commute,
    Anticommute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliProduct {
    n: usize,
    x: u64,
    z: u64,
    /// Global phase `i^phase`, kept in `0..4`.
    phase: u8,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidParameter(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n}"
        )));
    }
    Ok(())
}

fn same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

impl PauliProduct {
    pub fn identity(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n, x: 0, z: 0, phase: 0 })
    }

    pub fn from_masks(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        check_n(n)?;
        if (x | z) & !mask(n) != 0 {
            return Err(Error::InvalidParameter(format!(
                "masks have bits beyond qubit {}",
                n - 1
            )));
        }
        Ok(Self { n, x, z, phase: phase % 4 })
    }

    pub fn from_factors(factors: &[Pauli]) -> Result<Self> {
        check_n(factors.len())?;
        let (mut x, mut z) = (0u64, 0u64);
        for (k, f) in factors.iter().enumerate() {
            let (fx, fz) = f.bits();
            x |= (fx as u64) << k;
            z |= (fz as u64) << k;
        }
        Ok(Self { n: factors.len(), x, z, phase: 0 })
    }

    /// A single non-trivial factor on `qubit`.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        check_n(n)?;
        if qubit >= n {
            return Err(Error::InvalidParameter(format!("qubit {qubit} out of range for n = {n}")));
        }
        let (fx, fz) = p.bits();
        Ok(Self { n, x: (fx as u64) << qubit, z: (fz as u64) << qubit, phase: 0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn factor(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn factors(&self) -> Vec<Pauli> {
        (0..self.n).map(|k| self.factor(k)).collect()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_phase_free(&self) -> bool {
        self.phase == 0
    }

    pub fn without_phase(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn with_phase(&self, phase: u8) -> Self {
        Self { phase: phase % 4, ..*self }
    }

    /// `tr[P] / 2^n` as `(re, im)`: the phase for the identity, zero otherwise.
    pub fn normalized_trace(&self) -> (f64, f64) {
        if !self.is_identity() {
            return (0.0, 0.0);
        }
        match self.phase {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }

    /// Exact operator product `self · other`, phase included.
    pub fn multiply(&self, other: &PauliProduct) -> Result<PauliProduct> {
        same_n(self.n, other.n)?;
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        // Single-site products picking up +i: XY, YZ, ZX.
        let plus = (x1 & !z1 & x2 & z2) | (x1 & z1 & !x2 & z2) | (!x1 & z1 & x2 & !z2);
        // ... and -i: YX, ZY, XZ.
        let minus = (x1 & z1 & x2 & !z2) | (!x1 & z1 & x2 & z2) | (x1 & !z1 & !x2 & z2);
        let k = self.phase as i64 + other.phase as i64 + plus.count_ones() as i64
            - minus.count_ones() as i64;
        Ok(PauliProduct {
            n: self.n,
            x: x1 ^ x2,
            z: z1 ^ z2,
            phase: k.rem_euclid(4) as u8,
        })
    }

    /// Commutation relation of the underlying (phase-free) operators.
    pub fn commutes(&self, other: &PauliProduct) -> Result<Commutation> {
        same_n(self.n, other.n)?;
        Ok(self.commutation_unchecked(other))
    }

    pub(crate) fn commutation_unchecked(&self, other: &PauliProduct) -> Commutation {
        let clash = (self.x & other.z) ^ (self.z & other.x);
        if clash.count_ones() % 2 == 0 {
            Commutation::Commute
        } else {
            Commutation::Anticommute
        }
    }

    fn canonical_cmp(&self, other: &PauliProduct) -> Ordering {
        (self.z, self.x).cmp(&(other.z, other.x))
    }
}

impl fmt::Display for PauliProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for k in 0..self.n {
            write!(f, "{}", self.factor(k).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliProduct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_matches('"');
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let factors = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Parse(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if factors.is_empty() {
            return Err(Error::Parse(format!("empty Pauli string {s:?}")));
        }
        Ok(PauliProduct::from_factors(&factors)?.with_phase(phase))
    }
}

/// Real linear combination of distinct phase-free Pauli products; Hermitian
/// by construction. Terms are kept sorted by `(z-mask, x-mask)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliProduct)>,
}

impl PauliSum {
    /// Builds a sum, folding real phases (`±1`) into the coefficients and
    /// merging repeated products. Imaginary phases are rejected.
    pub fn new<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliProduct)>,
    {
        check_n(n)?;
        let mut folded = Vec::new();
        for (c, p) in terms {
            same_n(n, p.n)?;
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite coefficient for {p}")));
            }
            let sign = match p.phase {
                0 => 1.0,
                2 => -1.0,
                _ => {
                    return Err(Error::NonHermitian(format!(
                        "term {c}*{p} carries an imaginary phase"
                    )))
                }
            };
            folded.push((sign * c, p.without_phase()));
        }
        Ok(Self::from_unsorted(n, folded))
    }

    fn from_unsorted(n: usize, mut terms: Vec<(f64, PauliProduct)>) -> Self {
        terms.sort_by(|a, b| a.1.canonical_cmp(&b.1));
        let mut merged: Vec<(f64, PauliProduct)> = Vec::with_capacity(terms.len());
        for (c, p) in terms {
            match merged.last_mut() {
                Some((acc, q)) if *q == p => *acc += c,
                _ => merged.push((c, p)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        Self { n, terms: merged }
    }

    pub fn from_product(coeff: f64, p: PauliProduct) -> Result<Self> {
        Self::new(p.n, [(coeff, p)])
    }

    /// Parses entries of the form `coeff*STRING` (`0.5*ZZI`, `-1 * "XX"`) or a
    /// bare `STRING` with coefficient one.
    pub fn parse_terms<S: AsRef<str>>(entries: &[S]) -> Result<Self> {
        let terms = entries.iter().map(|e| parse_term(e.as_ref())).collect::<Result<Vec<_>>>()?;
        let n = terms
            .first()
            .map(|(_, p)| p.n)
            .ok_or_else(|| Error::Parse("a Pauli sum needs at least one term".into()))?;
        Self::new(n, terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliProduct)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ e²`, i.e. `tr[H²] / 2^n`.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c * c).sum()
    }

    /// `Σ |e|`, an upper bound on the operator norm.
    pub fn coeff_l1(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_unsorted(self.n, self.terms.iter().map(|&(c, p)| (c * factor, p)).collect())
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        same_n(self.n, other.n)?;
        Ok(Self::from_unsorted(self.n, self.terms.iter().chain(other.terms.iter()).copied().collect()))
    }

    /// Single-product view: `Some((coeff, product))` when the sum has one term.
    pub fn as_single(&self) -> Option<(f64, PauliProduct)> {
        match self.terms.as_slice() {
            [t] => Some(*t),
            _ => None,
        }
    }

    pub fn is_mutually_commuting(&self) -> bool {
        self.terms.iter().enumerate().all(|(i, (_, a))| {
            self.terms[i + 1..]
                .iter()
                .all(|(_, b)| a.commutation_unchecked(b) == Commutation::Commute)
        })
    }

    /// `C` such that `[self, other] = 2i·C`. For Hermitian sums the commutator
    /// is anti-Hermitian, so `C` is again a real Pauli sum.
    pub fn half_commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        same_n(self.n, other.n)?;
        let mut out = Vec::new();
        for &(a, p) in &self.terms {
            for &(b, q) in &other.terms {
                if p.commutation_unchecked(&q) == Commutation::Commute {
                    continue;
                }
                // [P, Q] = 2PQ with PQ = ±i R, so the 2i·C contribution is ±R.
                let pq = p.multiply(&q)?;
                let sign = match pq.phase {
                    1 => 1.0,
                    3 => -1.0,
                    _ => unreachable!("anticommuting Hermitian products multiply to ±iR"),
                };
                out.push((sign * a * b, pq.without_phase()));
            }
        }
        Ok(Self::from_unsorted(self.n, out))
    }

    /// Symbolic `(H + σHσ)/2`: terms anticommuting with `σ` cancel.
    pub fn decouple(&self, sigma: &PauliProduct) -> Result<PauliSum> {
        same_n(self.n, sigma.n)?;
        if !sigma.is_phase_free() {
            return Err(Error::Precondition(format!("decoupler {sigma} must be phase-free")));
        }
        let kept = self
            .terms
            .iter()
            .filter(|(_, p)| p.commutation_unchecked(sigma) == Commutation::Commute)
            .copied()
            .collect();
        Ok(Self::from_unsorted(self.n, kept))
    }

    /// Coefficient-wise equality with an absolute/relative tolerance.
    pub fn approx_eq(&self, other: &PauliSum, tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        let close = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(&(ca, pa)), Some(&(cb, pb))) => match pa.canonical_cmp(&pb) {
                    Ordering::Equal => {
                        if !close(ca, cb) {
                            return false;
                        }
                        i += 1;
                        j += 1;
                    }
                    Ordering::Less => {
                        if !close(ca, 0.0) {
                            return false;
                        }
                        i += 1;
                    }
                    Ordering::Greater => {
                        if !close(cb, 0.0) {
                            return false;
                        }
                        j += 1;
                    }
                },
                (Some(&(ca, _)), None) => {
                    if !close(ca, 0.0) {
                        return false;
                    }
                    i += 1;
                }
                (None, Some(&(cb, _))) => {
                    if !close(cb, 0.0) {
                        return false;
                    }
                    j += 1;
                }
                (None, None) => break,
            }
        }
        true
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}*{p}")?;
        }
        Ok(())
    }
}

fn parse_term(entry: &str) -> Result<(f64, PauliProduct)> {
    let entry = entry.trim();
    match entry.split_once('*') {
        Some((coeff, label)) => {
            let c = coeff
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad coefficient in {entry:?}: {e}")))?;
            Ok((c, label.trim().parse()?))
        }
        None => Ok((1.0, entry.parse()?)),
    }
}

/// Partner construction for the single-trace shortcut.
///
/// Given a mutually commuting `h0` and a product `sigma1` that anticommutes
/// with exactly one term `σ_{μ,0}` of `h0`, returns `μ` and
/// `σ₂ = −i·σ_{μ,0}·σ₁`, so `{σ_{μ,0}, σ₁, σ₂}` closes as su(2). The
/// partner is Hermitian but may carry the phase `−1`.
pub fn find_su2_partner(h0: &PauliSum, sigma1: &PauliProduct) -> Result<(usize, PauliProduct)> {
    same_n(h0.n, sigma1.n)?;
    if !sigma1.is_phase_free() {
        return Err(Error::Precondition(format!("{sigma1} must be phase-free")));
    }
    if !h0.is_mutually_commuting() {
        return Err(Error::Precondition(format!("terms of {h0} do not mutually commute")));
    }
    let anti: Vec<usize> = h0
        .terms
        .iter()
        .enumerate()
        .filter(|(_, (_, p))| p.commutation_unchecked(sigma1) == Commutation::Anticommute)
        .map(|(k, _)| k)
        .collect();
    match anti.as_slice() {
        [mu] => {
            let (_, s0) = h0.terms[*mu];
            // −i = i^3
            let partner = s0.multiply(sigma1)?.multiply(&PauliProduct::identity(h0.n)?.with_phase(3))?;
            Ok((*mu, partner))
        }
        [] => Err(Error::Precondition(format!(
            "no term of {h0} anticommutes with {sigma1}"
        ))),
        many => {
            let listed: Vec<String> = many.iter().map(|&k| h0.terms[k].1.to_string()).collect();
            Err(Error::Precondition(format!(
                "{} terms anticommute with {sigma1}: {}",
                many.len(),
                listed.join(", ")
            )))
        }
    }
}

/// True iff `[H_j, H_k] = 2i ε_{jkl} H_l` holds for the ordered triple.
pub fn check_su2_triple(h0: &PauliSum, h1: &PauliSum, h2: &PauliSum) -> Result<bool> {
    same_n(h0.n, h1.n)?;
    same_n(h0.n, h2.n)?;
    let cyclic = [(h0, h1, h2), (h1, h2, h0), (h2, h0, h1)];
    for (a, b, c) in cyclic {
        if c.is_empty() || !a.half_commutator(b)?.approx_eq(c, COEFF_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

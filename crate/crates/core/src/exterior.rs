//! Constant-coefficient exterior algebra on R^6 = C^3.
//!
//! Coordinates follow the adapted ordering `x, y, kappa, zeta, u, v`, i.e. basis vectors
//! `e[0..6]`. The complex coordinates are `z1 = x + i u`, `z2 = y + i v` and
//! `z3 = kappa + i zeta`, so the Kähler form pairs `(0,4)`, `(1,5)` and `(2,3)`.
//!
//! A k-form is stored sparsely as coefficients on increasing index tuples, encoded as 6-bit
//! masks. Evaluation on a frame is a sum of coefficient times minor determinant.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Real dimension of the ambient space.
pub const DIM: usize = 6;

/// The three (real, imaginary) index pairs of the adapted complex structure.
pub const ADAPTED_PAIRS: [(usize, usize); 3] = [(0, 4), (1, 5), (2, 3)];

/// A vector in R^6 with finite components.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Vec6([f64; DIM]);

impl Vec6 {
    pub fn new(components: [f64; DIM]) -> Result<Self> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(Vec6(components))
        } else {
            Err(Error::InvalidArgument(format!(
                "Vec6 components must be finite, got {components:?}"
            )))
        }
    }

    /// Standard basis vector `e_index` (0-based).
    pub fn basis(index: usize) -> Self {
        assert!(index < DIM, "basis index {index} out of range");
        let mut c = [0.0; DIM];
        c[index] = 1.0;
        Vec6(c)
    }

    pub fn zero() -> Self {
        Vec6([0.0; DIM])
    }

    pub fn components(&self) -> &[f64; DIM] {
        &self.0
    }

    pub fn dot(&self, other: &Vec6) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl std::ops::Index<usize> for Vec6 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vec6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vec6{:?}", self.0)
    }
}

impl Add for Vec6 {
    type Output = Vec6;
    fn add(self, rhs: Vec6) -> Vec6 {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0) {
            *a += b;
        }
        Vec6(c)
    }
}

impl Sub for Vec6 {
    type Output = Vec6;
    fn sub(self, rhs: Vec6) -> Vec6 {
        self + (-rhs)
    }
}

impl Neg for Vec6 {
    type Output = Vec6;
    fn neg(self) -> Vec6 {
        Vec6(self.0.map(|a| -a))
    }
}

impl Mul<Vec6> for f64 {
    type Output = Vec6;
    fn mul(self, rhs: Vec6) -> Vec6 {
        Vec6(rhs.0.map(|a| self * a))
    }
}

fn mask_indices(mask: u8) -> impl Iterator<Item = usize> {
    (0..DIM).filter(move |i| mask & (1 << i) != 0)
}

/// Sign of the permutation that sorts the concatenation of two disjoint increasing tuples.
fn shuffle_sign(a: u8, b: u8) -> f64 {
    let mut inversions = 0;
    for i in mask_indices(a) {
        inversions += mask_indices(b).filter(|&j| j < i).count();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Determinant of a small dense matrix by partial-pivot elimination.
fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            d = -d;
        }
        d *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    d
}

/// Alternating constant-coefficient k-form on R^6.
#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    degree: usize,
    coefficients: BTreeMap<u8, f64>,
}

impl KForm {
    pub fn zero(degree: usize) -> Self {
        assert!(degree <= DIM);
        KForm {
            degree,
            coefficients: BTreeMap::new(),
        }
    }

    /// Builds a form from `(indices, coefficient)` pairs. Indices need not be sorted; the
    /// coefficient is re-signed by the sorting permutation and repeated indices are rejected.
    pub fn from_terms(degree: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        if degree > DIM {
            return Err(Error::InvalidArgument(format!("degree {degree} exceeds {DIM}")));
        }
        let mut form = KForm::zero(degree);
        for (indices, coeff) in terms {
            if indices.len() != degree {
                return Err(Error::InvalidArgument(format!(
                    "term {indices:?} has {} indices, expected {degree}",
                    indices.len()
                )));
            }
            let mut mask = 0u8;
            let mut sign = 1.0;
            for &i in indices.iter() {
                if i >= DIM || mask & (1 << i) != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "invalid or repeated index in {indices:?}"
                    )));
                }
                sign *= shuffle_sign(mask, 1 << i);
                mask |= 1 << i;
            }
            form.add_term(mask, sign * coeff);
        }
        Ok(form)
    }

    /// The coordinate 1-form `omega_index` dual to `e_index`.
    pub fn coordinate(index: usize) -> Self {
        let mut form = KForm::zero(1);
        form.add_term(1 << index, 1.0);
        form
    }

    fn add_term(&mut self, mask: u8, coeff: f64) {
        debug_assert_eq!(mask.count_ones() as usize, self.degree);
        let entry = self.coefficients.entry(mask).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.coefficients.remove(&mask);
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of stored nonzero coefficients.
    pub fn term_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Nonzero terms as (increasing index tuple, coefficient).
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        self.coefficients
            .iter()
            .map(|(&m, &c)| (mask_indices(m).collect(), c))
            .collect()
    }

    /// Coefficient on the increasing tuple `indices`.
    pub fn coefficient(&self, indices: &[usize]) -> f64 {
        let mask = indices.iter().fold(0u8, |m, &i| m | (1 << i));
        self.coefficients.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, factor: f64) -> KForm {
        let mut out = KForm::zero(self.degree);
        for (&m, &c) in &self.coefficients {
            out.add_term(m, factor * c);
        }
        out
    }

    pub fn add(&self, other: &KForm) -> KForm {
        assert_eq!(self.degree, other.degree, "cannot add forms of different degree");
        let mut out = self.clone();
        for (&m, &c) in &other.coefficients {
            out.add_term(m, c);
        }
        out
    }

    pub fn wedge(&self, other: &KForm) -> KForm {
        let degree = self.degree + other.degree;
        assert!(degree <= DIM, "wedge degree {degree} exceeds {DIM}");
        let mut out = KForm::zero(degree);
        for (&a, &ca) in &self.coefficients {
            for (&b, &cb) in &other.coefficients {
                if a & b == 0 {
                    out.add_term(a | b, shuffle_sign(a, b) * ca * cb);
                }
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coefficients.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Evaluates a form on a frame: sum over stored tuples of coefficient times the minor of the
/// frame matrix on those rows.
pub fn evaluate(form: &KForm, frame: &[Vec6]) -> Result<f64> {
    if frame.len() != form.degree {
        return Err(Error::InvalidArgument(format!(
            "a {}-form needs {} vectors, got {}",
            form.degree,
            form.degree,
            frame.len()
        )));
    }
    let mut total = 0.0;
    for (&mask, &coeff) in &form.coefficients {
        let rows: Vec<usize> = mask_indices(mask).collect();
        let minor = rows
            .iter()
            .map(|&r| frame.iter().map(|v| v[r]).collect())
            .collect();
        total += coeff * det(minor);
    }
    Ok(total)
}

/// A complex form stored as real and imaginary parts of equal degree.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexForm {
    pub re: KForm,
    pub im: KForm,
}

impl ComplexForm {
    pub fn new(re: KForm, im: KForm) -> Self {
        assert_eq!(re.degree(), im.degree());
        ComplexForm { re, im }
    }

    pub fn wedge(&self, other: &ComplexForm) -> ComplexForm {
        let re = self.re.wedge(&other.re).add(&self.im.wedge(&other.im).scale(-1.0));
        let im = self.re.wedge(&other.im).add(&self.im.wedge(&other.re));
        ComplexForm { re, im }
    }

    pub fn conj(&self) -> ComplexForm {
        ComplexForm {
            re: self.re.clone(),
            im: self.im.scale(-1.0),
        }
    }

    /// Multiplication by the complex scalar `a + i b`.
    pub fn scale(&self, a: f64, b: f64) -> ComplexForm {
        ComplexForm {
            re: self.re.scale(a).add(&self.im.scale(-b)),
            im: self.im.scale(a).add(&self.re.scale(b)),
        }
    }
}

/// `omega = w0^w4 + w1^w5 + w2^w3`.
pub fn standard_symplectic_form() -> KForm {
    ADAPTED_PAIRS.iter().fold(KForm::zero(2), |acc, &(a, b)| {
        acc.add(&KForm::coordinate(a).wedge(&KForm::coordinate(b)))
    })
}

/// `(Re xi, Im xi)` for `xi = (w0 + i w4) ^ (w1 + i w5) ^ (w2 + i w3)`.
pub fn holomorphic_three_form() -> (KForm, KForm) {
    holomorphic_three_form_with_pairs(ADAPTED_PAIRS)
}

/// Triple wedge of `w_a + i w_b` over the given `(a, b)` pairs, split into real and imaginary
/// parts. The product is expanded once here; evaluation never touches complex arithmetic.
pub fn holomorphic_three_form_with_pairs(pairs: [(usize, usize); 3]) -> (KForm, KForm) {
    let factor = |(a, b): (usize, usize)| ComplexForm::new(KForm::coordinate(a), KForm::coordinate(b));
    let xi = factor(pairs[0]).wedge(&factor(pairs[1])).wedge(&factor(pairs[2]));
    (xi.re, xi.im)
}

/// Maximum coefficient mismatch between `(-1)^{n(n-1)/2} (i/2)^n xi ^ conj(xi)` and
/// `omega^n / n!` for n = 3, including the imaginary part of the left side.
pub fn calibration_identity_check(omega: &KForm, xi_re: &KForm, xi_im: &KForm) -> f64 {
    let xi = ComplexForm::new(xi_re.clone(), xi_im.clone());
    // (-1)^3 (i/2)^3 = i/8
    let lhs = xi.wedge(&xi.conj()).scale(0.0, 1.0 / 8.0);
    let rhs = omega.wedge(omega).wedge(omega).scale(1.0 / 6.0);
    let re_diff = lhs.re.add(&rhs.scale(-1.0)).max_abs();
    re_diff.max(lhs.im.max_abs())
}

/// Almost complex structure as a 6x6 matrix acting on column vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    matrix: [[f64; DIM]; DIM],
}

impl ComplexStructure {
    /// `J e_a = e_b`, `J e_b = -e_a` for each adapted pair.
    pub fn standard() -> Self {
        let mut matrix = [[0.0; DIM]; DIM];
        for &(a, b) in &ADAPTED_PAIRS {
            matrix[b][a] = 1.0;
            matrix[a][b] = -1.0;
        }
        ComplexStructure { matrix }
    }

    pub fn matrix(&self) -> &[[f64; DIM]; DIM] {
        &self.matrix
    }

    pub fn apply(&self, v: &Vec6) -> Vec6 {
        let mut out = [0.0; DIM];
        for (i, row) in self.matrix.iter().enumerate() {
            out[i] = row.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum();
        }
        Vec6(out)
    }

    /// `max |J^2 + I|` entrywise.
    pub fn square_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..DIM {
            for j in 0..DIM {
                let sq: f64 = (0..DIM).map(|k| self.matrix[i][k] * self.matrix[k][j]).sum();
                let target = if i == j { -1.0 } else { 0.0 };
                worst = worst.max((sq - target).abs());
            }
        }
        worst
    }
}

//! Generalized Gell-Mann basis of `su(d)` and the map from control vectors to
//! unitaries, `U(p) = exp(-i sum_j p_j g_j)`.
//!
//! Generator order is fixed: every symmetric generator `S_jk` (`j < k`,
//! lexicographic), then every antisymmetric `A_jk` in the same pair order, then
//! the diagonal generators `D_1 .. D_{d-1}`. All generators satisfy
//! `Tr(g_a g_b) = 2 delta_ab`, so `d = 2` yields `X, Y, Z`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{exp_minus_i, HermitianMatrix, UnitaryMatrix, C64};

/// Identifier of the generator ordering, recorded with serialized vectors.
pub const ORDERING_VERSION: &str = "gell-mann:sym,antisym,diag:v1";

/// Number of learnable parameters for `n` qubits: two vectors of length `4^n - 1`.
pub fn parameter_count(n: usize) -> usize {
    2 * ((1usize << (2 * n)) - 1)
}

/// Length of one control vector for dimension `d`.
pub fn generator_count(d: usize) -> usize {
    d * d - 1
}

fn pair_count(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Which generator sits at a given basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Symmetric { j: usize, k: usize },
    Antisymmetric { j: usize, k: usize },
    Diagonal { l: usize },
}

/// Ordered `su(d)` generator basis.
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    d: usize,
    kinds: Vec<GeneratorKind>,
    generators: Vec<HermitianMatrix>,
    /// `diag_weights[l - 1][m]` is entry `(m, m)` of `D_l`.
    diag_weights: Vec<Vec<f64>>,
}

fn diagonal_weights(d: usize, l: usize) -> Vec<f64> {
    let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
    (0..d)
        .map(|m| match m.cmp(&l) {
            std::cmp::Ordering::Less => norm,
            std::cmp::Ordering::Equal => -(l as f64) * norm,
            std::cmp::Ordering::Greater => 0.0,
        })
        .collect()
}

impl GeneratorBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!("su(d) needs d >= 2, got {d}")));
        }
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .collect();

        let mut kinds = Vec::with_capacity(generator_count(d));
        kinds.extend(
            pairs
                .iter()
                .map(|&(j, k)| GeneratorKind::Symmetric { j, k }),
        );
        kinds.extend(
            pairs
                .iter()
                .map(|&(j, k)| GeneratorKind::Antisymmetric { j, k }),
        );
        kinds.extend((1..d).map(|l| GeneratorKind::Diagonal { l }));

        let diag_weights: Vec<Vec<f64>> = (1..d).map(|l| diagonal_weights(d, l)).collect();

        let zero = C64::new(0.0, 0.0);
        let generators = kinds
            .iter()
            .map(|kind| {
                let mut m = DMatrix::from_element(d, d, zero);
                match *kind {
                    GeneratorKind::Symmetric { j, k } => {
                        m[(j, k)] = C64::new(1.0, 0.0);
                        m[(k, j)] = C64::new(1.0, 0.0);
                    }
                    GeneratorKind::Antisymmetric { j, k } => {
                        m[(j, k)] = C64::new(0.0, -1.0);
                        m[(k, j)] = C64::new(0.0, 1.0);
                    }
                    GeneratorKind::Diagonal { l } => {
                        for (i, w) in diag_weights[l - 1].iter().enumerate() {
                            m[(i, i)] = C64::new(*w, 0.0);
                        }
                    }
                }
                HermitianMatrix::from_parts_unchecked(m)
            })
            .collect();

        Ok(Self {
            d,
            kinds,
            generators,
            diag_weights,
        })
    }

    /// Basis for an `n`-qubit register (`d = 2^n`).
    pub fn for_qubits(n: usize) -> Result<Self> {
        if n == 0 || n > crate::linalg::MAX_QUBITS {
            return Err(Error::Dimension(format!("unsupported qubit count {n}")));
        }
        Self::new(1 << n)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[HermitianMatrix] {
        &self.generators
    }

    pub fn kind(&self, index: usize) -> Option<GeneratorKind> {
        self.kinds.get(index).copied()
    }

    /// The exponent `sum_j p_j g_j`, assembled entrywise from the basis structure.
    pub fn exponent(&self, p: &ControlVector) -> Result<HermitianMatrix> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: p.len(),
            });
        }
        let d = self.d;
        let values = p.values();
        let pairs = pair_count(d);
        let mut h = DMatrix::from_element(d, d, C64::new(0.0, 0.0));

        let mut idx = 0;
        for j in 0..d {
            for k in j + 1..d {
                let s = values[idx];
                let a = values[pairs + idx];
                h[(j, k)] = C64::new(s, -a);
                h[(k, j)] = C64::new(s, a);
                idx += 1;
            }
        }
        for (weights, &coef) in self.diag_weights.iter().zip(&values[2 * pairs..]) {
            for (m, w) in weights.iter().enumerate() {
                h[(m, m)].re += coef * w;
            }
        }
        Ok(HermitianMatrix::from_parts_unchecked(h))
    }

    /// Coordinates `Tr(g_a H) / 2` of the traceless part of `h`; inverse of
    /// [`GeneratorBasis::exponent`] before canonicalization.
    pub fn coordinates(&self, h: &HermitianMatrix) -> Result<Vec<f64>> {
        if h.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: h.dim(),
            });
        }
        let m = h.entries();
        Ok(self
            .kinds
            .iter()
            .map(|kind| match *kind {
                GeneratorKind::Symmetric { j, k } => m[(j, k)].re,
                GeneratorKind::Antisymmetric { j, k } => -m[(j, k)].im,
                GeneratorKind::Diagonal { l } => {
                    let w = &self.diag_weights[l - 1];
                    w.iter()
                        .enumerate()
                        .map(|(i, wi)| wi * m[(i, i)].re)
                        .sum::<f64>()
                        / 2.0
                }
            })
            .collect())
    }

    pub fn unitary(&self, p: &ControlVector) -> Result<UnitaryMatrix> {
        exp_minus_i(&self.exponent(p)?)
    }
}

/// Builds the generalized Gell-Mann basis for dimension `d`.
pub fn build_basis(d: usize) -> Result<GeneratorBasis> {
    GeneratorBasis::new(d)
}

/// `U = exp(-i p . G)`.
pub fn unitary_from_controls(p: &ControlVector, basis: &GeneratorBasis) -> Result<UnitaryMatrix> {
    basis.unitary(p)
}

/// Wraps an angle into `[-pi, pi)`. Non-finite input maps to zero.
pub fn wrap_angle(x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    let mut r = x - TAU * ((x + PI) / TAU).floor();
    if r >= PI {
        r -= TAU;
    }
    r.max(-PI)
}

/// Wraps every component into `[-pi, pi)`.
pub fn canonicalize(raw: &[f64]) -> ControlVector {
    ControlVector {
        values: raw.iter().copied().map(wrap_angle).collect(),
    }
}

/// Bloch-space coordinates of a unitary, every component in `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ControlVectorRepr", try_from = "ControlVectorRepr")]
pub struct ControlVector {
    values: Vec<f64>,
}

impl ControlVector {
    /// Accepts values already inside `[-pi, pi)`; use [`canonicalize`] otherwise.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(-PI..PI).contains(*v)) {
            return Err(Error::Parse(format!(
                "control value {bad} outside [-pi, pi)"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `d` such that `d^2 - 1 == len`, if any.
    pub fn dimension(&self) -> Option<usize> {
        let target = self.values.len() + 1;
        let d = (target as f64).sqrt().round() as usize;
        (d >= 2 && d * d == target).then_some(d)
    }
}

#[derive(Serialize, Deserialize)]
struct ControlVectorRepr {
    d: usize,
    ordering: String,
    values: Vec<f64>,
}

impl From<ControlVector> for ControlVectorRepr {
    fn from(p: ControlVector) -> Self {
        Self {
            d: p.dimension().unwrap_or(0),
            ordering: ORDERING_VERSION.to_string(),
            values: p.values,
        }
    }
}

impl TryFrom<ControlVectorRepr> for ControlVector {
    type Error = Error;

    fn try_from(repr: ControlVectorRepr) -> Result<Self> {
        if repr.ordering != ORDERING_VERSION {
            return Err(Error::Parse(format!(
                "unknown generator ordering {:?}",
                repr.ordering
            )));
        }
        if repr.d < 2 || repr.values.len() != generator_count(repr.d) {
            return Err(Error::Parse(format!(
                "{} values do not match dimension {}",
                repr.values.len(),
                repr.d
            )));
        }
        ControlVector::new(repr.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn d2_is_pauli() {
        let basis = build_basis(2).unwrap();
        let expected = [
            [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
            [c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
            [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
        ];
        assert_eq!(basis.len(), 3);
        for (g, e) in basis.generators().iter().zip(expected.iter()) {
            assert_eq!(g.entries(), &DMatrix::from_row_slice(2, 2, e));
        }
    }

    #[test]
    fn counts() {
        assert_eq!(build_basis(4).unwrap().len(), 15);
        assert_eq!(build_basis(8).unwrap().len(), 63);
        assert!(build_basis(1).is_err());
        assert_eq!(parameter_count(1), 6);
        assert_eq!(parameter_count(2), 30);
        assert_eq!(parameter_count(5), 2046);
    }

    #[test]
    fn orthonormal_and_traceless() {
        for d in [2, 3, 4, 8] {
            let basis = build_basis(d).unwrap();
            let gs = basis.generators();
            for (a, ga) in gs.iter().enumerate() {
                assert!(ga.trace().norm() <= 1e-12);
                for (b, gb) in gs.iter().enumerate() {
                    let expected = if a == b { 2.0 } else { 0.0 };
                    assert!(
                        (ga.trace_product(gb) - expected).norm() <= 1e-10,
                        "d={d} a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn structured_exponent_matches_explicit_sum() {
        let basis = build_basis(4).unwrap();
        let raw: Vec<f64> = (0..basis.len())
            .map(|i| (i as f64 * 0.37).sin() * 3.0)
            .collect();
        let p = canonicalize(&raw);
        let mut sum = DMatrix::from_element(4, 4, c(0., 0.));
        for (g, v) in basis.generators().iter().zip(p.values()) {
            sum += g.entries() * c(*v, 0.0);
        }
        let h = basis.exponent(&p).unwrap();
        let diff = (h.entries() - sum)
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff < 1e-14);
    }

    #[test]
    fn coordinates_invert_exponent() {
        for d in [2, 4, 8] {
            let basis = build_basis(d).unwrap();
            let raw: Vec<f64> = (0..basis.len())
                .map(|i| (i as f64 * 1.7 + 0.2).sin() * 3.0)
                .collect();
            let p = canonicalize(&raw);
            let back = basis.coordinates(&basis.exponent(&p).unwrap()).unwrap();
            for (a, b) in back.iter().zip(p.values()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn known_unitaries() {
        let basis = build_basis(2).unwrap();
        let id = unitary_from_controls(&ControlVector::zeros(3), &basis).unwrap();
        assert!(id.max_abs_diff(&UnitaryMatrix::identity(2)) < 1e-15);

        // pi itself wraps to -pi; exp(+i pi X) = -I as well.
        let minus = unitary_from_controls(&canonicalize(&[PI, 0., 0.]), &basis).unwrap();
        assert!(minus.max_abs_diff(&UnitaryMatrix::identity(2).with_global_phase(PI)) < 1e-14);

        let z = unitary_from_controls(&canonicalize(&[0., 0., FRAC_PI_2]), &basis).unwrap();
        let expected =
            UnitaryMatrix::from_row_slice(2, &[c(0., -1.), c(0., 0.), c(0., 0.), c(0., 1.)])
                .unwrap();
        assert!(z.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        let basis = build_basis(2).unwrap();
        assert_eq!(
            unitary_from_controls(&ControlVector::zeros(15), &basis).unwrap_err(),
            Error::DimensionMismatch {
                expected: 3,
                actual: 15
            }
        );
    }

    #[test]
    fn wrapping() {
        assert!((wrap_angle(3.0 * FRAC_PI_2) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(0.3), 0.3);
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(f64::NAN), 0.0);
    }

    #[test]
    fn serialization_header() {
        let p = canonicalize(&[0.1, -0.2, 0.3]);
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["d"], 2);
        assert_eq!(json["ordering"], ORDERING_VERSION);
        let back: ControlVector = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);

        let bad =
            serde_json::json!({"d": 4, "ordering": ORDERING_VERSION, "values": [0.0, 0.0, 0.0]});
        assert!(serde_json::from_value::<ControlVector>(bad).is_err());
        let bad = serde_json::json!({"d": 2, "ordering": "other", "values": [0.0, 0.0, 0.0]});
        assert!(serde_json::from_value::<ControlVector>(bad).is_err());
    }

    proptest::proptest! {
        #[test]
        fn canonical_range(x in -1e6f64..1e6) {
            let w = wrap_angle(x);
            proptest::prop_assert!((-PI..PI).contains(&w));
            // Same point on the circle.
            let k = ((x - w) / TAU).round();
            proptest::prop_assert!((x - w - k * TAU).abs() < 1e-9 * x.abs().max(1.0));
        }
    }
}

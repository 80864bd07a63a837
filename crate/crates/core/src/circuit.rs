//! The `U3 U_x U1` circuit, its measurement, and the fitness of a candidate.
//!
//! A run with `s` stages applies `U3 U_x U1` to `|0...0>` `s` times in
//! sequence, so the oracle is queried `s` times. Probabilities are exact
//! unless a shot count is supplied.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::basis::{generator_count, ControlVector, GeneratorBasis};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, Statevector, UnitaryMatrix, C64, UNITARY_TOL};
use crate::oracle::{BooleanFunction, Label, TrainingSet};

/// Control vectors for the two learnable sub-devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairRepr")]
pub struct CandidatePair {
    n: usize,
    p1: ControlVector,
    p3: ControlVector,
}

#[derive(Deserialize)]
struct PairRepr {
    n: usize,
    p1: ControlVector,
    p3: ControlVector,
}

impl TryFrom<PairRepr> for CandidatePair {
    type Error = Error;

    fn try_from(r: PairRepr) -> Result<Self> {
        CandidatePair::new(r.n, r.p1, r.p3)
    }
}

impl CandidatePair {
    pub fn new(n: usize, p1: ControlVector, p3: ControlVector) -> Result<Self> {
        if n == 0 || n > crate::linalg::MAX_QUBITS {
            return Err(Error::Dimension(format!("unsupported qubit count {n}")));
        }
        let len = generator_count(1 << n);
        for p in [&p1, &p3] {
            if p.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    actual: p.len(),
                });
            }
        }
        Ok(Self { n, p1, p3 })
    }

    /// Both vectors zero, i.e. `U1 = U3 = I`.
    pub fn identity(n: usize) -> Result<Self> {
        let len = generator_count(1 << n);
        Self::new(n, ControlVector::zeros(len), ControlVector::zeros(len))
    }

    /// A pair realizing `U1 = U3 = H^{(x) n}` up to global phase.
    ///
    /// `H^{(x) n}` squares to the identity, so it equals `exp(-i pi P)` with
    /// `P = (I - H^{(x) n}) / 2` the projector onto its `-1` eigenspace.
    pub fn hadamard(n: usize) -> Result<Self> {
        let basis = GeneratorBasis::for_qubits(n)?;
        let d = 1usize << n;
        let amp = (d as f64).sqrt().recip();
        let entries = nalgebra::DMatrix::from_fn(d, d, |a, b| {
            let h = if (a & b).count_ones() % 2 == 0 {
                amp
            } else {
                -amp
            };
            let identity = if a == b { 1.0 } else { 0.0 };
            C64::new(std::f64::consts::FRAC_PI_2 * (identity - h), 0.0)
        });
        let p = ControlVector::new(basis.coordinates(&HermitianMatrix::new(entries)?)?)?;
        Self::new(n, p.clone(), p)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn p1(&self) -> &ControlVector {
        &self.p1
    }

    pub fn p3(&self) -> &ControlVector {
        &self.p3
    }

    pub fn unitaries(&self, basis: &GeneratorBasis) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
        if basis.dim() != 1 << self.n {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n,
                actual: basis.dim(),
            });
        }
        Ok((basis.unitary(&self.p1)?, basis.unitary(&self.p3)?))
    }
}

/// Fitness of one candidate, with the class-averaged probabilities behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub xi: f64,
    pub p_c_mean: f64,
    pub p_b_mean: f64,
    pub stages_used: usize,
}

impl FitnessReport {
    fn from_means(p_c_mean: f64, p_b_mean: f64, stages_used: usize) -> Self {
        Self {
            xi: (p_c_mean + (1.0 - p_b_mean)) / 2.0,
            p_c_mean,
            p_b_mean,
            stages_used,
        }
    }
}

/// Maps a measured basis index to a label: all-zeros means constant.
pub fn interpret(outcome: usize) -> Label {
    if outcome == 0 {
        Label::Constant
    } else {
        Label::Balanced
    }
}

fn check_stages(stages: usize) -> Result<()> {
    if stages == 0 {
        return Err(Error::Config("stage count must be at least 1".into()));
    }
    Ok(())
}

fn run_unchecked(
    u1: &UnitaryMatrix,
    u3: &UnitaryMatrix,
    x: &BooleanFunction,
    stages: usize,
) -> Statevector {
    let mut psi = Statevector::ground(x.arity()).expect("arity validated by BooleanFunction");
    let mut scratch = nalgebra::DVector::zeros(psi.dim());
    for _ in 0..stages {
        psi.apply_in_place(u1, &mut scratch);
        psi.flip_signs(x.table());
        psi.apply_in_place(u3, &mut scratch);
    }
    psi
}

/// `(U3 U_x U1)^s |0...0>` for explicit unitaries.
pub fn run_unitaries(
    u1: &UnitaryMatrix,
    u3: &UnitaryMatrix,
    x: &BooleanFunction,
    stages: usize,
) -> Result<Statevector> {
    check_stages(stages)?;
    let d = 1 << x.arity();
    for u in [u1, u3] {
        if u.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: u.dim(),
            });
        }
    }
    Ok(run_unchecked(u1, u3, x, stages))
}

/// `(U3 U_x U1)^s |0...0>` for a parametrized candidate.
pub fn run_circuit(
    pair: &CandidatePair,
    basis: &GeneratorBasis,
    x: &BooleanFunction,
    stages: usize,
) -> Result<Statevector> {
    if x.arity() != pair.n {
        return Err(Error::DimensionMismatch {
            expected: pair.n,
            actual: x.arity(),
        });
    }
    let (u1, u3) = pair.unitaries(basis)?;
    run_unitaries(&u1, &u3, x, stages)
}

fn class_means<F>(training: &TrainingSet, mut prob: F) -> Result<(f64, f64)>
where
    F: FnMut(&BooleanFunction) -> f64,
{
    if training.constants().is_empty() || training.balanced().is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mean = |fs: &[BooleanFunction], prob: &mut F| {
        fs.iter().map(&mut *prob).sum::<f64>() / fs.len() as f64
    };
    let pc = mean(training.constants(), &mut prob);
    let pb = mean(training.balanced(), &mut prob);
    Ok((pc, pb))
}

fn check_training(u: &UnitaryMatrix, training: &TrainingSet) -> Result<()> {
    let d = 1 << training.arity();
    if u.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: u.dim(),
        });
    }
    Ok(())
}

pub(crate) fn fitness_unchecked(
    u1: &UnitaryMatrix,
    u3: &UnitaryMatrix,
    training: &TrainingSet,
    stages: usize,
) -> Result<FitnessReport> {
    check_stages(stages)?;
    check_training(u1, training)?;
    check_training(u3, training)?;
    let (pc, pb) = class_means(training, |x| {
        run_unchecked(u1, u3, x, stages).ground_projection_prob()
    })?;
    Ok(FitnessReport::from_means(pc, pb, stages))
}

/// Fitness of explicit unitaries; rejects inputs that are not unitary.
pub fn fitness_of_unitaries(
    u1: &UnitaryMatrix,
    u3: &UnitaryMatrix,
    training: &TrainingSet,
    stages: usize,
) -> Result<FitnessReport> {
    for u in [u1, u3] {
        let deviation = u.unitarity_deviation();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
    }
    fitness_unchecked(u1, u3, training, stages)
}

/// `xi = (P_C + 1 - P_B) / 2` with class-averaged exact probabilities.
pub fn fitness(
    pair: &CandidatePair,
    basis: &GeneratorBasis,
    training: &TrainingSet,
    stages: usize,
) -> Result<FitnessReport> {
    if pair.n != training.arity() {
        return Err(Error::DimensionMismatch {
            expected: training.arity(),
            actual: pair.n,
        });
    }
    let (u1, u3) = pair.unitaries(basis)?;
    fitness_unchecked(&u1, &u3, training, stages)
}

/// Like [`fitness`], but each probability is estimated from `shots` simulated
/// measurements.
pub fn fitness_with_shots<R: Rng + ?Sized>(
    pair: &CandidatePair,
    basis: &GeneratorBasis,
    training: &TrainingSet,
    stages: usize,
    shots: u64,
    rng: &mut R,
) -> Result<FitnessReport> {
    if shots == 0 {
        return Err(Error::Config("shot count must be at least 1".into()));
    }
    if pair.n != training.arity() {
        return Err(Error::DimensionMismatch {
            expected: training.arity(),
            actual: pair.n,
        });
    }
    check_stages(stages)?;
    let (u1, u3) = pair.unitaries(basis)?;
    let (pc, pb) = class_means(training, |x| {
        let p = run_unchecked(&u1, &u3, x, stages).ground_projection_prob();
        let hits = Binomial::new(shots, p)
            .expect("p is clamped to [0, 1]")
            .sample(rng);
        hits as f64 / shots as f64
    })?;
    Ok(FitnessReport::from_means(pc, pb, stages))
}

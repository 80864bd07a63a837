//! Learning simulator for oracle algorithms.
//!
//! A candidate algorithm is the circuit `U3 U_x U1` acting on `|0...0>`, where
//! `U_x` is the phase oracle of the input function and `U1`, `U3` are
//! parametrized as `exp(-i p . G)` over the `su(2^n)` generator basis. A
//! differential-evolution teacher tunes the two control vectors until the
//! all-zeros measurement separates constant from balanced functions.
//!
//! - [`linalg`]: statevectors, Hermitian eigendecomposition, `exp(-iH)`.
//! - [`basis`]: generalized Gell-Mann basis and control vectors.
//! - [`oracle`]: Boolean functions, phase oracles, training sets.
//! - [`circuit`]: circuit evaluation and fitness.
//! - [`learn`]: the optimizer.
//! - [`experiment`]: Monte-Carlo ensembles and their statistics.

pub mod basis;
pub mod circuit;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod linalg;
pub mod oracle;

pub use basis::{
    build_basis, canonicalize, parameter_count, unitary_from_controls, ControlVector,
    GeneratorBasis,
};
pub use circuit::{
    fitness, fitness_of_unitaries, interpret, run_circuit, run_unitaries, CandidatePair,
    FitnessReport,
};
pub use error::{Error, Result};
pub use experiment::{
    gaussian_fit, learning_probability, mean_best_fitness_curve, run_ensemble, scaling_fit,
    verify_learned, GaussianFit, ScalingFit, TrialEnsemble,
};
pub use learn::{
    learn, CrossoverRate, DEConfig, Evaluator, LearningRun, OracleFitness, Population,
};
pub use linalg::{exp_minus_i, hermitian_eig, HermitianMatrix, Statevector, UnitaryMatrix};
pub use oracle::{
    build_training_set, classify, enumerate_balanced, oracle_unitary, BooleanFunction,
    FunctionClass, Label, TrainingPolicy, TrainingSet,
};

/// Value of the `spec_version` field written into every JSON output.
pub const FORMAT_VERSION: &str = "1.0";

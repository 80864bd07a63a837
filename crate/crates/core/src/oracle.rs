//! Boolean functions, their phase oracles, and the training sets built from them.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{UnitaryMatrix, C64, MAX_QUBITS};

/// Largest arity for which every balanced function is enumerated.
pub const MAX_ENUMERATION_ARITY: usize = 4;
/// Upper bound on the holdout size drawn alongside a sampled training set.
pub const MAX_HOLDOUT: usize = 64;
/// Sample size used by [`TrainingPolicy::default_for`] above the enumeration threshold.
pub const DEFAULT_SAMPLE: usize = 64;

/// Truth table of `x: {0,1}^n -> {0,1}`; `table[k] = x(k)`.
///
/// The text form is a bitstring whose first character is `x(0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BooleanFunction {
    n: usize,
    table: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionClass {
    Constant,
    Balanced,
    Neither,
}

/// Target label of a training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Constant,
    Balanced,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::Constant => 'c',
            Label::Balanced => 'b',
        }
    }
}

impl BooleanFunction {
    pub fn new(n: usize, table: Vec<bool>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "arity {n} outside 1..={MAX_QUBITS}"
            )));
        }
        if table.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                actual: table.len(),
            });
        }
        Ok(Self { n, table })
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "arity {n} outside 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n,
            table: vec![value; 1 << n],
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn weight(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    pub fn classify(&self) -> FunctionClass {
        let w = self.weight();
        if w == 0 || w == self.table.len() {
            FunctionClass::Constant
        } else if 2 * w == self.table.len() {
            FunctionClass::Balanced
        } else {
            FunctionClass::Neither
        }
    }
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.table {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BooleanFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let table = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!(
                    "invalid bit {other:?} in truth table"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if table.len() < 2 || !table.len().is_power_of_two() {
            return Err(Error::Parse(format!(
                "truth table length {} is not 2^n",
                table.len()
            )));
        }
        let n = table.len().trailing_zeros() as usize;
        BooleanFunction::new(n, table)
    }
}

impl Serialize for BooleanFunction {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BooleanFunction {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn classify(x: &BooleanFunction) -> FunctionClass {
    x.classify()
}

/// Diagonal phase oracle with entry `(-1)^{x(k)}` at index `k`.
pub fn oracle_unitary(x: &BooleanFunction) -> UnitaryMatrix {
    let d = x.table.len();
    let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for (k, &bit) in x.table.iter().enumerate() {
        m[(k, k)] = C64::new(if bit { -1.0 } else { 1.0 }, 0.0);
    }
    UnitaryMatrix::from_parts_unchecked(m)
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step.
        let Some(num) = acc.checked_mul((n - i) as u128) else {
            return u128::MAX;
        };
        acc = num / (i as u128 + 1);
    }
    acc
}

/// Number of balanced functions of arity `n`.
pub fn balanced_count(n: usize) -> u128 {
    let d = 1u64 << n;
    binomial(d, d / 2)
}

/// Every balanced function of arity `n`, in lexicographic bitstring order.
pub fn enumerate_balanced(n: usize) -> Result<Vec<BooleanFunction>> {
    if n == 0 {
        return Err(Error::Dimension("arity must be at least 1".into()));
    }
    if n > MAX_ENUMERATION_ARITY {
        return Err(Error::Capacity(format!(
            "enumerating balanced functions is capped at n = {MAX_ENUMERATION_ARITY}; \
             use a sampled training set for n = {n}"
        )));
    }
    let d = 1usize << n;
    // Bit (d - 1 - k) of the counter holds x(k), so counting order is string order.
    let out = (0u64..1 << d)
        .filter(|v| v.count_ones() as usize == d / 2)
        .map(|v| BooleanFunction {
            n,
            table: (0..d).map(|k| (v >> (d - 1 - k)) & 1 == 1).collect(),
        })
        .collect();
    Ok(out)
}

/// How balanced training functions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingPolicy {
    /// Every balanced function.
    Full,
    /// A seeded uniform sample of this many balanced functions.
    Sample(usize),
}

impl TrainingPolicy {
    /// Full enumeration up to three qubits, a 64-function sample beyond.
    pub fn default_for(n: usize) -> Self {
        if n <= 3 {
            TrainingPolicy::Full
        } else {
            TrainingPolicy::Sample(DEFAULT_SAMPLE)
        }
    }
}

/// Input-target pairs for the constant/balanced decision problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    n: usize,
    policy: TrainingPolicy,
    seed: u64,
    constants: Vec<BooleanFunction>,
    balanced: Vec<BooleanFunction>,
    holdout: Vec<BooleanFunction>,
}

fn random_balanced(n: usize, rng: &mut ChaCha8Rng) -> BooleanFunction {
    let d = 1usize << n;
    let mut table = vec![false; d];
    for k in index::sample(rng, d, d / 2) {
        table[k] = true;
    }
    BooleanFunction { n, table }
}

impl TrainingSet {
    pub fn build(n: usize, policy: TrainingPolicy, seed: u64) -> Result<Self> {
        let constants = vec![
            BooleanFunction::constant(n, false)?,
            BooleanFunction::constant(n, true)?,
        ];
        let (balanced, holdout) = match policy {
            TrainingPolicy::Full => (enumerate_balanced(n)?, Vec::new()),
            TrainingPolicy::Sample(m) => {
                if m == 0 {
                    return Err(Error::Capacity("sample size must be at least 1".into()));
                }
                let holdout_len = m.min(MAX_HOLDOUT);
                let demand = (m + holdout_len) as u128;
                let available = balanced_count(n);
                if demand > available {
                    return Err(Error::Capacity(format!(
                        "{m} training plus {holdout_len} holdout balanced functions requested, \
                         only {available} exist for n = {n}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut seen = HashSet::new();
                let mut draw = |count: usize| {
                    let mut out = Vec::with_capacity(count);
                    while out.len() < count {
                        let f = random_balanced(n, &mut rng);
                        if seen.insert(f.clone()) {
                            out.push(f);
                        }
                    }
                    out
                };
                let balanced = draw(m);
                let holdout = draw(holdout_len);
                (balanced, holdout)
            }
        };
        Ok(Self {
            n,
            policy,
            seed,
            constants,
            balanced,
            holdout,
        })
    }

    /// Training set that uses the given functions verbatim.
    pub fn from_parts(
        n: usize,
        balanced: Vec<BooleanFunction>,
        holdout: Vec<BooleanFunction>,
    ) -> Result<Self> {
        for f in balanced.iter().chain(&holdout) {
            if f.arity() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: f.arity(),
                });
            }
            if f.classify() != FunctionClass::Balanced {
                return Err(Error::Parse(format!("{f} is not balanced")));
            }
        }
        let constants = vec![
            BooleanFunction::constant(n, false)?,
            BooleanFunction::constant(n, true)?,
        ];
        Ok(Self {
            n,
            policy: TrainingPolicy::Sample(balanced.len()),
            seed: 0,
            constants,
            balanced,
            holdout,
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn policy(&self) -> TrainingPolicy {
        self.policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn constants(&self) -> &[BooleanFunction] {
        &self.constants
    }

    pub fn balanced(&self) -> &[BooleanFunction] {
        &self.balanced
    }

    pub fn holdout(&self) -> &[BooleanFunction] {
        &self.holdout
    }

    /// Every training pair with its target label.
    pub fn pairs(&self) -> impl Iterator<Item = (&BooleanFunction, Label)> {
        self.constants
            .iter()
            .map(|f| (f, Label::Constant))
            .chain(self.balanced.iter().map(|f| (f, Label::Balanced)))
    }

    /// Same constants, with the holdout functions as the balanced class.
    pub fn holdout_set(&self) -> Result<Self> {
        if self.holdout.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(Self {
            n: self.n,
            policy: self.policy,
            seed: self.seed,
            constants: self.constants.clone(),
            balanced: self.holdout.clone(),
            holdout: Vec::new(),
        })
    }
}

pub fn build_training_set(n: usize, policy: TrainingPolicy, seed: u64) -> Result<TrainingSet> {
    TrainingSet::build(n, policy, seed)
}

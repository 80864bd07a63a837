//! Differential-evolution teacher over candidate pairs.
//!
//! Each generation builds, for every member `i`, mutants
//! `nu_k = p_{k,a} + W (p_{k,b} - p_{k,c})` for `k = 1, 3`, crosses them with the
//! parent component-wise at rate `C_r`, and keeps the trial only when its
//! fitness is strictly larger. The best pair seen so far is recorded.
//!
//! Randomness is drawn from per-member, per-generation substreams of the
//! master seed, so a run is identical whether members are evaluated
//! sequentially or in parallel.

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{canonicalize, generator_count, ControlVector, GeneratorBasis};
use crate::circuit::{fitness, fitness_with_shots, CandidatePair};
use crate::error::{Error, Result};
use crate::oracle::TrainingSet;

/// Crossover rate `C_r`, either fixed or derived from the vector length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverRate {
    Fixed(f64),
    /// `C_r = min(1, m / len)`: on average `m` mutant components per trial vector.
    PerVector(f64),
}

impl CrossoverRate {
    pub fn rate_for(self, len: usize) -> f64 {
        match self {
            CrossoverRate::Fixed(cr) => cr,
            CrossoverRate::PerVector(m) => (m / len.max(1) as f64).min(1.0),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            CrossoverRate::Fixed(cr) if !(0.0..=1.0).contains(&cr) => {
                Err(Error::Config(format!("crossover rate {cr} outside [0, 1]")))
            }
            CrossoverRate::PerVector(m) if !(m.is_finite() && m >= 0.0) => Err(Error::Config(
                format!("expected mutant components {m} must be finite and >= 0"),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for CrossoverRate {
    fn default() -> Self {
        CrossoverRate::PerVector(1.0)
    }
}

/// Optimizer settings.
///
/// The default crossover rate gives one expected mutant component per trial
/// vector; fixed rates of 0.3 and above stall near `xi = 0.95` from two qubits on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DEConfig {
    pub n_pop: usize,
    /// Differential weight `W`.
    pub weight: f64,
    pub crossover_rate: CrossoverRate,
    pub halt_fitness: f64,
    pub max_iterations: usize,
    /// Iterations without an improvement of at least `improvement_epsilon`
    /// before the stage count is raised.
    pub stagnation_window: usize,
    pub max_stages: usize,
    pub improvement_epsilon: f64,
    pub seed: u64,
    /// Draw `a, b, c` distinct from the target index as well (DE/rand/1).
    pub exclude_target: bool,
    /// Force one mutant component into every trial vector (classic DE `j_rand`).
    pub force_mutant_component: bool,
    /// Estimate probabilities from this many shots instead of exactly.
    pub shots: Option<u64>,
    /// Evaluate the members of one generation on the rayon pool.
    pub parallel: bool,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            n_pop: 10,
            weight: 0.8,
            crossover_rate: CrossoverRate::default(),
            halt_fitness: 0.99,
            max_iterations: 20_000,
            stagnation_window: 5_000,
            max_stages: 3,
            improvement_epsilon: 1e-4,
            seed: 0,
            exclude_target: true,
            force_mutant_component: false,
            shots: None,
            parallel: false,
        }
    }
}

impl DEConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 3 {
            return Err(Error::Config(format!(
                "population size {} is below 3",
                self.n_pop
            )));
        }
        if self.exclude_target && self.n_pop < 4 {
            return Err(Error::Config(
                "excluding the target index needs a population of at least 4".into(),
            ));
        }
        self.crossover_rate.validate()?;
        if !self.weight.is_finite() {
            return Err(Error::Config("differential weight must be finite".into()));
        }
        if !self.halt_fitness.is_finite() || !self.improvement_epsilon.is_finite() {
            return Err(Error::Config(
                "halting threshold and epsilon must be finite".into(),
            ));
        }
        if self.max_stages == 0 {
            return Err(Error::Config("max_stages must be at least 1".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shot count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scores a candidate at a given stage count.
///
/// `rng` is the member's private substream; exact evaluators ignore it.
pub trait Evaluator: Sync {
    fn evaluate(&self, pair: &CandidatePair, stages: usize, rng: &mut ChaCha8Rng) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: Fn(&CandidatePair, usize) -> f64 + Sync,
{
    fn evaluate(&self, pair: &CandidatePair, stages: usize, _rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(self(pair, stages))
    }
}

/// Fitness of a candidate on a constant/balanced training set.
#[derive(Debug, Clone)]
pub struct OracleFitness {
    basis: GeneratorBasis,
    training: TrainingSet,
    shots: Option<u64>,
}

impl OracleFitness {
    pub fn new(training: TrainingSet, shots: Option<u64>) -> Result<Self> {
        let basis = GeneratorBasis::for_qubits(training.arity())?;
        Ok(Self {
            basis,
            training,
            shots,
        })
    }

    pub fn basis(&self) -> &GeneratorBasis {
        &self.basis
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }
}

impl Evaluator for OracleFitness {
    fn evaluate(&self, pair: &CandidatePair, stages: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        let report = match self.shots {
            None => fitness(pair, &self.basis, &self.training, stages)?,
            Some(shots) => {
                fitness_with_shots(pair, &self.basis, &self.training, stages, shots, rng)?
            }
        };
        Ok(report.xi)
    }
}

#[derive(Clone, Copy)]
enum Domain {
    Init = 1,
    Step = 2,
    Rescore = 3,
}

/// Independent stream for one member in one generation.
fn substream(seed: u64, domain: Domain, generation: u64, member: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the combined coordinates
    let mut z = seed
        ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ generation.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ member.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(member);
    rng
}

/// Current generation of the optimizer with its best-so-far record.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    n: usize,
    seed: u64,
    members: Vec<CandidatePair>,
    fitnesses: Vec<f64>,
    best: CandidatePair,
    best_fitness: f64,
    iteration: usize,
    stage: usize,
}

impl Population {
    pub fn members(&self) -> &[CandidatePair] {
        &self.members
    }

    pub fn fitnesses(&self) -> &[f64] {
        &self.fitnesses
    }

    pub fn best(&self) -> &CandidatePair {
        &self.best
    }

    pub fn best_fitness(&self) -> f64 {
        self.best_fitness
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Replaces member `i` and rescores it at the current stage.
    pub fn inject<E: Evaluator + ?Sized>(
        &mut self,
        i: usize,
        pair: CandidatePair,
        evaluator: &E,
    ) -> Result<()> {
        if i >= self.members.len() {
            return Err(Error::Config(format!("member index {i} out of range")));
        }
        if pair.qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: pair.qubits(),
            });
        }
        let mut rng = substream(self.seed, Domain::Init, u64::MAX, i as u64);
        let xi = evaluator.evaluate(&pair, self.stage, &mut rng)?;
        self.members[i] = pair;
        self.fitnesses[i] = xi;
        self.refresh_best();
        Ok(())
    }

    fn refresh_best(&mut self) {
        for (pair, &xi) in self.members.iter().zip(&self.fitnesses) {
            if xi > self.best_fitness {
                self.best_fitness = xi;
                self.best = pair.clone();
            }
        }
    }

    /// Raises the stage count and rescores every member and the best pair.
    fn escalate<E: Evaluator + ?Sized>(&mut self, evaluator: &E) -> Result<()> {
        let seed = self.seed;
        self.stage += 1;
        let generation = self.iteration as u64;
        for (i, (pair, xi)) in self
            .members
            .iter()
            .zip(self.fitnesses.iter_mut())
            .enumerate()
        {
            let mut rng = substream(seed, Domain::Rescore, generation, i as u64);
            *xi = evaluator.evaluate(pair, self.stage, &mut rng)?;
        }
        let mut rng = substream(seed, Domain::Rescore, generation, self.members.len() as u64);
        self.best_fitness = evaluator.evaluate(&self.best, self.stage, &mut rng)?;
        self.refresh_best();
        Ok(())
    }
}

fn random_vector<R: Rng>(len: usize, rng: &mut R) -> ControlVector {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(-PI..PI)).collect();
    canonicalize(&raw)
}

/// Draws `n_pop` random pairs and scores them at stage 1.
pub fn init_population<E: Evaluator + ?Sized>(
    cfg: &DEConfig,
    n: usize,
    evaluator: &E,
) -> Result<Population> {
    cfg.validate()?;
    if n == 0 || n > crate::linalg::MAX_QUBITS {
        return Err(Error::Dimension(format!("unsupported qubit count {n}")));
    }
    let len = generator_count(1 << n);
    let mut members = Vec::with_capacity(cfg.n_pop);
    let mut fitnesses = Vec::with_capacity(cfg.n_pop);
    for i in 0..cfg.n_pop {
        let mut rng = substream(cfg.seed, Domain::Init, 0, i as u64);
        let p1 = random_vector(len, &mut rng);
        let p3 = random_vector(len, &mut rng);
        let pair = CandidatePair::new(n, p1, p3)?;
        fitnesses.push(evaluator.evaluate(&pair, 1, &mut rng)?);
        members.push(pair);
    }
    let mut pop = Population {
        n,
        seed: cfg.seed,
        best: members[0].clone(),
        best_fitness: f64::NEG_INFINITY,
        members,
        fitnesses,
        iteration: 0,
        stage: 1,
    };
    pop.refresh_best();
    Ok(pop)
}

fn pick_donors<R: Rng>(
    n_pop: usize,
    target: usize,
    exclude_target: bool,
    rng: &mut R,
) -> [usize; 3] {
    if exclude_target {
        let picks = index::sample(rng, n_pop - 1, 3);
        let shift = |j: usize| if j >= target { j + 1 } else { j };
        [
            shift(picks.index(0)),
            shift(picks.index(1)),
            shift(picks.index(2)),
        ]
    } else {
        let picks = index::sample(rng, n_pop, 3);
        [picks.index(0), picks.index(1), picks.index(2)]
    }
}

fn mutant_vector(
    a: &ControlVector,
    b: &ControlVector,
    c: &ControlVector,
    weight: f64,
) -> ControlVector {
    let raw: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .zip(c.values())
        .map(|((pa, pb), pc)| pa + weight * (pb - pc))
        .collect();
    canonicalize(&raw)
}

/// Mutant vectors `(nu_1, nu_3)` for target member `i`. Donors are drawn
/// independently for the two vectors.
pub fn mutate<R: Rng>(
    members: &[CandidatePair],
    i: usize,
    weight: f64,
    exclude_target: bool,
    rng: &mut R,
) -> (ControlVector, ControlVector) {
    let [a, b, c] = pick_donors(members.len(), i, exclude_target, rng);
    let nu1 = mutant_vector(members[a].p1(), members[b].p1(), members[c].p1(), weight);
    let [a, b, c] = pick_donors(members.len(), i, exclude_target, rng);
    let nu3 = mutant_vector(members[a].p3(), members[b].p3(), members[c].p3(), weight);
    (nu1, nu3)
}

fn crossover_impl<R: Rng>(
    parent: &ControlVector,
    mutant: &ControlVector,
    crossover_rate: f64,
    force_mutant_component: bool,
    rng: &mut R,
) -> Result<ControlVector> {
    if parent.len() != mutant.len() {
        return Err(Error::DimensionMismatch {
            expected: parent.len(),
            actual: mutant.len(),
        });
    }
    let forced = force_mutant_component.then(|| rng.random_range(0..parent.len()));
    let values: Vec<f64> = parent
        .values()
        .iter()
        .zip(mutant.values())
        .enumerate()
        .map(|(j, (&p, &m))| {
            let r: f64 = rng.random();
            if r > crossover_rate && forced != Some(j) {
                p
            } else {
                m
            }
        })
        .collect();
    Ok(canonicalize(&values))
}

/// Component-wise crossover: keep the parent component when `R_j > C_r`,
/// otherwise take the mutant's.
pub fn crossover<R: Rng>(
    parent: &ControlVector,
    mutant: &ControlVector,
    crossover_rate: f64,
    rng: &mut R,
) -> Result<ControlVector> {
    crossover_impl(parent, mutant, crossover_rate, false, rng)
}

/// Greedy selection; the trial must be strictly better to replace the parent.
pub fn select(parent: (CandidatePair, f64), trial: (CandidatePair, f64)) -> (CandidatePair, f64) {
    if trial.1 > parent.1 {
        trial
    } else {
        parent
    }
}

fn make_trial<E: Evaluator + ?Sized>(
    pop: &Population,
    cfg: &DEConfig,
    evaluator: &E,
    i: usize,
) -> Result<(CandidatePair, f64)> {
    let mut rng = substream(cfg.seed, Domain::Step, pop.iteration as u64, i as u64);
    let (nu1, nu3) = mutate(&pop.members, i, cfg.weight, cfg.exclude_target, &mut rng);
    let parent = &pop.members[i];
    let cr = cfg.crossover_rate.rate_for(nu1.len());
    let t1 = crossover_impl(parent.p1(), &nu1, cr, cfg.force_mutant_component, &mut rng)?;
    let t3 = crossover_impl(parent.p3(), &nu3, cr, cfg.force_mutant_component, &mut rng)?;
    let trial = CandidatePair::new(pop.n, t1, t3)?;
    let xi = evaluator.evaluate(&trial, pop.stage, &mut rng)?;
    Ok((trial, xi))
}

/// One generation: mutation, crossover and selection for every member.
pub fn step<E: Evaluator + ?Sized>(
    pop: &Population,
    cfg: &DEConfig,
    evaluator: &E,
) -> Result<Population> {
    let trials: Vec<(CandidatePair, f64)> = if cfg.parallel {
        (0..pop.len())
            .into_par_iter()
            .map(|i| make_trial(pop, cfg, evaluator, i))
            .collect::<Result<_>>()?
    } else {
        (0..pop.len())
            .map(|i| make_trial(pop, cfg, evaluator, i))
            .collect::<Result<_>>()?
    };

    let mut next = pop.clone();
    for (i, trial) in trials.into_iter().enumerate() {
        let parent = (pop.members[i].clone(), pop.fitnesses[i]);
        let (pair, xi) = select(parent, trial);
        next.members[i] = pair;
        next.fitnesses[i] = xi;
    }
    next.refresh_best();
    next.iteration += 1;
    Ok(next)
}

/// Trace and outcome of one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRun {
    pub config: DEConfig,
    pub seed: u64,
    pub n: usize,
    /// Best fitness after initialization (index 0) and after every generation.
    pub trace: Vec<f64>,
    pub completed: bool,
    pub completion_iteration: Option<usize>,
    pub stages_used: usize,
    /// Iterations at which the stage count was raised.
    pub stage_escalations: Vec<usize>,
    pub final_fitness: f64,
    pub final_pair: CandidatePair,
}

/// Runs the optimizer from a prepared population until the halting threshold
/// or the iteration cap.
pub fn learn_from<E: Evaluator + ?Sized>(
    cfg: &DEConfig,
    mut pop: Population,
    evaluator: &E,
) -> Result<LearningRun> {
    cfg.validate()?;
    let mut trace = vec![pop.best_fitness];
    let mut escalations = Vec::new();
    let mut reference = pop.best_fitness;
    let mut last_improvement = pop.iteration;

    let completion = loop {
        if pop.best_fitness >= cfg.halt_fitness {
            break Some(pop.iteration);
        }
        if pop.iteration >= cfg.max_iterations {
            break None;
        }
        pop = step(&pop, cfg, evaluator)?;
        trace.push(pop.best_fitness);

        if pop.best_fitness >= reference + cfg.improvement_epsilon {
            reference = pop.best_fitness;
            last_improvement = pop.iteration;
        } else if pop.iteration - last_improvement >= cfg.stagnation_window
            && pop.stage < cfg.max_stages
        {
            pop.escalate(evaluator)?;
            escalations.push(pop.iteration);
            *trace.last_mut().expect("trace is non-empty") = pop.best_fitness;
            reference = pop.best_fitness;
            last_improvement = pop.iteration;
        }
    };

    Ok(LearningRun {
        config: cfg.clone(),
        seed: cfg.seed,
        n: pop.n,
        trace,
        completed: completion.is_some(),
        completion_iteration: completion,
        stages_used: pop.stage,
        stage_escalations: escalations,
        final_fitness: pop.best_fitness,
        final_pair: pop.best,
    })
}

/// Initializes a population and runs the optimizer with a custom evaluator.
pub fn learn_with<E: Evaluator + ?Sized>(
    cfg: &DEConfig,
    n: usize,
    evaluator: &E,
) -> Result<LearningRun> {
    let pop = init_population(cfg, n, evaluator)?;
    learn_from(cfg, pop, evaluator)
}

/// Learns a candidate pair for the given training set.
pub fn learn(cfg: &DEConfig, training: &TrainingSet) -> Result<LearningRun> {
    let evaluator = OracleFitness::new(training.clone(), cfg.shots)?;
    learn_with(cfg, training.arity(), &evaluator)
}

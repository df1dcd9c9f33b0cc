//! NSGA-II over bit-string chromosomes.
//!
//! All objectives are minimised. Ties are broken by lowest index everywhere,
//! and evaluations fan out over rayon but are merged in individual order, so a
//! run is a pure function of its configuration, seed and evaluator.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{random_chromosome, Chromosome};
use crate::error::{Error, Result};

pub const N_OBJECTIVES: usize = 5;

/// Minimisation-oriented objective vector:
/// `[1 - accuracy, local gates, CNOT gates, feature count, covariance score]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives(pub [f64; N_OBJECTIVES]);

impl Objectives {
    pub fn error_rate(&self) -> f64 {
        self.0[0]
    }

    pub fn accuracy(&self) -> f64 {
        1.0 - self.0[0]
    }

    pub fn local_gates(&self) -> f64 {
        self.0[1]
    }

    pub fn cnot_gates(&self) -> f64 {
        self.0[2]
    }

    pub fn feature_count(&self) -> f64 {
        self.0[3]
    }

    pub fn covariance(&self) -> f64 {
        self.0[4]
    }
}

/// `a` dominates `b` when it is no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Fronts hold indices in ascending order.
pub fn fast_nondominated_sort<T: AsRef<[f64]>>(points: &[T]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            let (a, b) = (points[p].as_ref(), points[q].as_ref());
            if dominates(a, b) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(b, a) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of every member of one front, in the order given.
pub fn crowding_distance<T: AsRef<[f64]>>(front: &[T]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| {
            front[a].as_ref()[obj]
                .partial_cmp(&front[b].as_ref()[obj])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = front[order[0]].as_ref()[obj];
        let hi = front[order[n - 1]].as_ref()[obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..(n - 1) {
            let gap = front[order[w + 1]].as_ref()[obj] - front[order[w - 1]].as_ref()[obj];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub objectives: Objectives,
    pub rank: usize,
    pub crowding: f64,
}

impl AsRef<[f64]> for Individual {
    fn as_ref(&self) -> &[f64] {
        &self.objectives.0
    }
}

/// Crowded-comparison winner between two population members.
fn crowded_better(pop: &[Individual], a: usize, b: usize) -> usize {
    let (x, y) = (&pop[a], &pop[b]);
    match x.rank.cmp(&y.rank) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => match x.crowding.partial_cmp(&y.crowding) {
            Some(Ordering::Greater) => a,
            Some(Ordering::Less) => b,
            _ => a.min(b),
        },
    }
}

/// Binary tournament on rank then crowding, ties to the lower index.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Individual], rng: &mut R) -> usize {
    let a = rng.gen_range(0..population.len());
    let b = rng.gen_range(0..population.len());
    crowded_better(population, a, b)
}

/// Swap the bits in `[start, end)` between two chromosomes.
pub fn two_point_crossover(a: &Chromosome, b: &Chromosome, start: usize, end: usize) -> (Chromosome, Chromosome) {
    let mut ca = a.clone();
    let mut cb = b.clone();
    let end = end.min(a.len());
    for i in start..end {
        ca.bits_mut()[i] = b.bits()[i];
        cb.bits_mut()[i] = a.bits()[i];
    }
    (ca, cb)
}

/// With probability `pc`, two-point crossover at random cut points; otherwise copies.
pub fn crossover<R: Rng + ?Sized>(a: &Chromosome, b: &Chromosome, pc: f64, rng: &mut R) -> (Chromosome, Chromosome) {
    if !rng.gen_bool(pc) || a.len() < 2 {
        return (a.clone(), b.clone());
    }
    let len = a.len();
    let mut c1 = rng.gen_range(0..len);
    let mut c2 = rng.gen_range(0..len);
    if c1 > c2 {
        std::mem::swap(&mut c1, &mut c2);
    }
    two_point_crossover(a, b, c1, c2 + 1)
}

/// With probability `pm`, flip each bit independently with probability `1/L`.
pub fn mutate<R: Rng + ?Sized>(child: &mut Chromosome, pm: f64, rng: &mut R) {
    if !rng.gen_bool(pm) {
        return;
    }
    let rate = 1.0 / child.len() as f64;
    for bit in child.bits_mut() {
        if rng.gen_bool(rate) {
            *bit = !*bit;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub tournament_size: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Stop once the best accuracy reaches this value.
    pub early_stop_accuracy: Option<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 100,
            crossover_prob: 0.2,
            mutation_prob: 0.2,
            tournament_size: 2,
            seed: 0,
            restarts: 1,
            early_stop_accuracy: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(Error::invalid(format!("population {} must be even and at least 2", self.population)));
        }
        for (name, p) in [("crossover", self.crossover_prob), ("mutation", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        if self.tournament_size != 2 {
            return Err(Error::invalid("only binary tournaments are supported"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Population-wide bests after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Minimum of each objective over the population.
    pub best: [f64; N_OBJECTIVES],
    /// Minimum of local + CNOT gates over the population.
    pub min_total_gates: f64,
}

impl GenerationStats {
    fn of(generation: usize, pop: &[Individual]) -> Self {
        let mut best = [f64::INFINITY; N_OBJECTIVES];
        let mut min_total_gates = f64::INFINITY;
        for ind in pop {
            for (b, v) in best.iter_mut().zip(ind.objectives.0) {
                *b = b.min(v);
            }
            min_total_gates = min_total_gates.min(ind.objectives.0[1] + ind.objectives.0[2]);
        }
        Self { generation, best, min_total_gates }
    }

    pub fn best_accuracy(&self) -> f64 {
        1.0 - self.best[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub population: Vec<Individual>,
    pub fronts: Vec<Vec<usize>>,
    pub history: Vec<GenerationStats>,
}

impl EvolutionResult {
    pub fn front0(&self) -> Vec<&Individual> {
        self.fronts.first().map(|f| f.iter().map(|&i| &self.population[i]).collect()).unwrap_or_default()
    }
}

/// Assign rank and crowding in place; returns the fronts.
pub fn rank_population(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let fronts = fast_nondominated_sort(pop);
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<&Individual> = front.iter().map(|&i| &pop[i]).collect();
        let objs: Vec<&[f64]> = members.iter().map(|m| m.objectives.0.as_slice()).collect();
        let dist = crowding_distance(&objs);
        for (&i, d) in front.iter().zip(dist) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

/// Elitist truncation: whole fronts first, then the last front by descending crowding.
fn select_survivors(mut merged: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = rank_population(&mut merged);
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for front in fronts {
        if keep.len() + front.len() <= size {
            keep.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| {
                merged[b].crowding.partial_cmp(&merged[a].crowding).unwrap_or(Ordering::Equal).then(a.cmp(&b))
            });
            keep.extend(rest.into_iter().take(size - keep.len()));
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("indices unique")).collect()
}

/// Evaluate in parallel, memoising by bit string; results keep input order.
fn evaluate_all<F>(chromosomes: Vec<Chromosome>, evaluator: &F, cache: &mut HashMap<Chromosome, Objectives>) -> Result<Vec<Individual>>
where
    F: Fn(&Chromosome) -> Result<Objectives> + Sync,
{
    let mut fresh: Vec<Chromosome> = Vec::new();
    for c in &chromosomes {
        if !cache.contains_key(c) && !fresh.contains(c) {
            fresh.push(c.clone());
        }
    }
    let results: Vec<Result<Objectives>> = fresh.par_iter().map(evaluator).collect();
    for (c, r) in fresh.into_iter().zip(results) {
        match r {
            Ok(obj) => {
                cache.insert(c, obj);
            }
            Err(e) => {
                return Err(Error::Fitness { chromosome: c.to_bit_string(), source: Box::new(e) });
            }
        }
    }
    Ok(chromosomes
        .into_iter()
        .map(|c| {
            let objectives = cache[&c];
            Individual { chromosome: c, objectives, rank: 0, crowding: 0.0 }
        })
        .collect())
}

/// Run NSGA-II for one seed.
///
/// `n_features` and `n_qubits` fix the chromosome shape. The evaluator must be
/// pure; results are cached per bit string within the run.
pub fn evolve<F>(config: &GaConfig, n_features: usize, n_qubits: usize, evaluator: F) -> Result<EvolutionResult>
where
    F: Fn(&Chromosome) -> Result<Objectives> + Sync,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache = HashMap::new();

    let initial: Vec<Chromosome> =
        (0..config.population).map(|_| random_chromosome(n_features, n_qubits, &mut rng)).collect();
    let mut population = evaluate_all(initial, &evaluator, &mut cache)?;
    let mut fronts = rank_population(&mut population);
    let mut history = vec![GenerationStats::of(0, &population)];

    let reached = |stats: &GenerationStats| config.early_stop_accuracy.is_some_and(|t| stats.best_accuracy() >= t);

    for generation in 1..=config.generations {
        if reached(history.last().expect("history starts non-empty")) {
            break;
        }
        let mut offspring = Vec::with_capacity(config.population);
        while offspring.len() < config.population {
            let pa = tournament_select(&population, &mut rng);
            let pb = tournament_select(&population, &mut rng);
            let (mut ca, mut cb) =
                crossover(&population[pa].chromosome, &population[pb].chromosome, config.crossover_prob, &mut rng);
            mutate(&mut ca, config.mutation_prob, &mut rng);
            mutate(&mut cb, config.mutation_prob, &mut rng);
            offspring.push(ca);
            offspring.push(cb);
        }
        let children = evaluate_all(offspring, &evaluator, &mut cache)?;
        let mut merged = population;
        merged.extend(children);
        population = select_survivors(merged, config.population);
        fronts = rank_population(&mut population);
        history.push(GenerationStats::of(generation, &population));
    }

    Ok(EvolutionResult { population, fronts, history })
}

/// History rows as CSV: generation, best accuracy, min gates, min features, min covariance.
pub fn history_csv_rows(history: &[GenerationStats]) -> Vec<String> {
    history
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{}",
                s.generation,
                s.best_accuracy(),
                s.min_total_gates,
                s.best[3],
                s.best[4]
            )
        })
        .collect()
}

//! QSVMF orchestration: per-fold fitness wiring, NSGA-II runs, Pareto
//! extraction, frequent-feature aggregation and the final retraining.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::baselines::{cv_accuracy, feature_scores, select_k_best, Baseline, ScoreMethod};
use crate::data::{fit_scaler, pairwise_covariance_score, stratified_kfold, Dataset, FoldPlan};
use crate::encoding::{decode, gate_counts, qubit_pairs, Axis as PauliAxis, Chromosome, CircuitSpec, GateCounts};
use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::moga::{evolve, rank_population, GaConfig, GenerationStats, Individual, Objectives};
use crate::qsim::{gram_from_states, kernel_from_states, prepare_states};
use crate::svm::{accuracy, predict, smo_train, SmoParams};

/// Folds used for the final cross-validated accuracy of a selected feature set.
pub const FINAL_CV_FOLDS: usize = 5;

/// Scaled data for one outer fold.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    pub fold: usize,
    pub train_scaled: Array2<f64>,
    pub train_raw: Array2<f64>,
    pub train_labels: Vec<i8>,
    pub val_scaled: Array2<f64>,
    pub val_labels: Vec<i8>,
    pub svm: SmoParams,
    pub run_seed: u64,
}

impl FitnessContext {
    /// Build the context for `fold`; the scaler only sees that fold's training rows.
    pub fn new(dataset: &Dataset, plan: &FoldPlan, fold: usize, scale: (f64, f64), svm: SmoParams, run_seed: u64) -> Result<Self> {
        let train = plan.train_indices(fold);
        let val = plan.test_indices(fold);
        let scaler = fit_scaler(dataset.features.view(), &train, scale.0, scale.1)?;
        let train_raw = dataset.features.select(Axis(0), &train);
        let val_raw = dataset.features.select(Axis(0), &val);
        Ok(Self {
            fold,
            train_scaled: scaler.transform(train_raw.view())?,
            train_raw,
            train_labels: train.iter().map(|&i| dataset.labels[i]).collect(),
            val_scaled: scaler.transform(val_raw.view())?,
            val_labels: val.iter().map(|&i| dataset.labels[i]).collect(),
            svm,
            run_seed,
        })
    }
}

/// Train a fidelity-kernel SVM on the context's training rows and score it on
/// the held-out rows.
pub fn qsvm_holdout_accuracy(spec: &CircuitSpec, ctx: &FitnessContext) -> Result<f64> {
    let train_states = prepare_states(spec, ctx.train_scaled.view())?;
    let val_states = prepare_states(spec, ctx.val_scaled.view())?;
    let gram = gram_from_states(&train_states);
    let model = smo_train(gram.view(), &ctx.train_labels, ctx.svm)?;
    let cross = kernel_from_states(&val_states, &train_states);
    let pred = predict(&model, cross.view())?;
    Ok(accuracy(&pred, &ctx.val_labels))
}

/// The five minimisation objectives of one chromosome on one fold.
pub fn evaluate_fitness(chromosome: &Chromosome, ctx: &FitnessContext) -> Result<Objectives> {
    let spec = decode(chromosome, chromosome.sub_seed(ctx.run_seed));
    let acc = qsvm_holdout_accuracy(&spec, ctx).map_err(|e| Error::Fitness {
        chromosome: chromosome.to_bit_string(),
        source: Box::new(e),
    })?;
    let gates = gate_counts(&spec);
    let covariance = pairwise_covariance_score(ctx.train_raw.view(), &spec.selected_features)?;
    Ok(Objectives([
        1.0 - acc,
        gates.local as f64,
        gates.cnot as f64,
        spec.selected_features.len() as f64,
        covariance,
    ]))
}

/// Run-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsvmfConfig {
    pub ga: GaConfig,
    pub n_qubits: usize,
    pub k_folds: usize,
    pub seed: u64,
    pub svm: SmoParams,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl Default for QsvmfConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            n_qubits: 4,
            k_folds: 5,
            seed: 0,
            svm: SmoParams::default(),
            scale_lo: 0.0,
            scale_hi: PI,
        }
    }
}

impl QsvmfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=12).contains(&self.n_qubits) {
            return Err(Error::invalid(format!("qubits {} outside [2, 12]", self.n_qubits)));
        }
        if self.k_folds < 2 {
            return Err(Error::invalid(format!("folds {} must be at least 2", self.k_folds)));
        }
        if !(self.scale_lo < self.scale_hi) {
            return Err(Error::invalid("scale range is empty"));
        }
        if !(self.svm.c > 0.0) {
            return Err(Error::invalid("SVM C must be positive"));
        }
        self.ga.validate()
    }
}

/// One Pareto-front member as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSolution {
    pub chromosome: Chromosome,
    pub objectives: Objectives,
    pub accuracy: f64,
    pub features: Vec<usize>,
    pub gates: GateCounts,
}

impl ParetoSolution {
    fn from_individual(ind: &Individual, run_seed: u64) -> Self {
        let spec = decode(&ind.chromosome, ind.chromosome.sub_seed(run_seed));
        Self {
            chromosome: ind.chromosome.clone(),
            objectives: ind.objectives,
            accuracy: ind.objectives.accuracy(),
            features: spec.selected_features.clone(),
            gates: gate_counts(&spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub front: Vec<ParetoSolution>,
    /// Index into `front` of the highest-accuracy member.
    pub best: usize,
    pub minimal_features: Vec<ParetoSolution>,
    #[serde(skip)]
    pub history: Vec<GenerationStats>,
}

impl FoldReport {
    pub fn best_solution(&self) -> &ParetoSolution {
        &self.front[self.best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub mean_local: f64,
    pub mean_cnot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: QsvmfConfig,
    pub folds: Vec<FoldReport>,
    pub m: usize,
    pub aggregated_features: Vec<usize>,
    /// Fold whose best solution supplied the retraining circuit.
    pub best_fold: usize,
    pub retrain_circuit: CircuitSpec,
    /// Cross-validated accuracy of the retrained QSVM on the aggregated features.
    pub retrained_accuracy: f64,
    /// Mean held-out accuracy of the per-fold best solutions.
    pub mean_best_accuracy: f64,
    /// Held-out accuracy of the single best raw Pareto individual.
    pub best_raw_accuracy: f64,
    pub gate_summary: GateSummary,
}

/// Highest accuracy, then fewest features, then lowest index.
fn best_index(front: &[ParetoSolution]) -> usize {
    (0..front.len())
        .min_by(|&a, &b| {
            let (x, y) = (&front[a].objectives, &front[b].objectives);
            x.error_rate()
                .partial_cmp(&y.error_rate())
                .unwrap_or(Ordering::Equal)
                .then(x.feature_count().partial_cmp(&y.feature_count()).unwrap_or(Ordering::Equal))
                .then(a.cmp(&b))
        })
        .expect("front is non-empty")
}

/// Members of a front with the fewest selected features.
pub fn pareto_minimal_features(front: &[ParetoSolution]) -> Vec<ParetoSolution> {
    let Some(min) = front.iter().map(|s| s.features.len()).min() else {
        return Vec::new();
    };
    front.iter().filter(|s| s.features.len() == min).cloned().collect()
}

/// `round_half_up(mean feature count)` of the given solutions.
pub fn aggregation_size(best: &[&[usize]]) -> usize {
    if best.is_empty() {
        return 0;
    }
    let mean = best.iter().map(|f| f.len()).sum::<usize>() as f64 / best.len() as f64;
    ((mean + 0.5).floor() as usize).max(1)
}

/// The `m` most frequent features across the best solutions, most frequent
/// first, ties to the lower index.
pub fn aggregate_features(best: &[&[usize]], m: usize) -> Vec<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for set in best {
        for &f in *set {
            *counts.entry(f).or_default() += 1;
        }
    }
    let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(m).map(|(f, _)| f).collect()
}

/// Keep `template`'s structure and feed its qubits from `features`, cycling.
pub fn remap_circuit(template: &CircuitSpec, features: &[usize]) -> Result<CircuitSpec> {
    if features.is_empty() {
        return Err(Error::invalid("feature list is empty"));
    }
    let mut selected = features.to_vec();
    selected.sort_unstable();
    selected.dedup();
    let n = template.n_qubits();
    Ok(CircuitSpec {
        selected_features: selected,
        qubit_feature: (0..n).map(|j| features[j % features.len()]).collect(),
        ..template.clone()
    })
}

/// Z-axis map with every rotation and entangler on and one repetition.
pub fn default_circuit(n_qubits: usize) -> CircuitSpec {
    CircuitSpec {
        selected_features: vec![0],
        qubit_feature: vec![0; n_qubits],
        rotation_flags: vec![true; n_qubits],
        axis: PauliAxis::Z,
        entangler_pairs: qubit_pairs(n_qubits),
        repetitions: 1,
    }
}

/// Stratified k-fold accuracy of a fidelity-kernel SVM with a fixed circuit.
pub fn qsvm_cv_accuracy(dataset: &Dataset, spec: &CircuitSpec, folds: usize, seed: u64, scale: (f64, f64), svm: SmoParams) -> Result<f64> {
    spec.validate(dataset.n_features())?;
    let plan = stratified_kfold(&dataset.labels, folds, seed)?;
    let mut total = 0.0;
    for fold in 0..folds {
        let ctx = FitnessContext::new(dataset, &plan, fold, scale, svm, seed)?;
        total += qsvm_holdout_accuracy(spec, &ctx)?;
    }
    Ok(total / folds as f64)
}

fn run_fold(dataset: &Dataset, plan: &FoldPlan, fold: usize, config: &QsvmfConfig) -> Result<FoldReport> {
    let ctx = FitnessContext::new(dataset, plan, fold, (config.scale_lo, config.scale_hi), config.svm, config.seed)?;
    let p = dataset.n_features();
    let mut merged: Vec<Individual> = Vec::new();
    let mut history = Vec::new();
    for restart in 0..config.ga.restarts {
        let ga = GaConfig { seed: mix_seed(mix_seed(config.seed, fold as u64 + 1), restart as u64), ..config.ga.clone() };
        let result = evolve(&ga, p, config.n_qubits, |c| evaluate_fitness(c, &ctx))?;
        if restart == 0 {
            history = result.history;
        }
        merged.extend(result.population);
    }
    let fronts = rank_population(&mut merged);
    let mut front: Vec<ParetoSolution> = Vec::new();
    for &i in &fronts[0] {
        let sol = ParetoSolution::from_individual(&merged[i], config.seed);
        // restarts can rediscover the same chromosome
        if !front.iter().any(|s| s.chromosome == sol.chromosome) {
            front.push(sol);
        }
    }
    let best = best_index(&front);
    let minimal_features = pareto_minimal_features(&front);
    Ok(FoldReport { fold, front, best, minimal_features, history })
}

/// Full selection run: one NSGA-II search per outer fold, then aggregation
/// and cross-validated retraining on the aggregated features.
pub fn run_qsvmf(dataset: &Dataset, config: &QsvmfConfig) -> Result<SelectionReport> {
    config.validate()?;
    let plan = stratified_kfold(&dataset.labels, config.k_folds, config.seed)?;
    let folds = (0..config.k_folds)
        .map(|fold| run_fold(dataset, &plan, fold, config).map_err(|e| Error::Fold { fold, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;

    let best: Vec<&ParetoSolution> = folds.iter().map(FoldReport::best_solution).collect();
    let best_sets: Vec<&[usize]> = best.iter().map(|s| s.features.as_slice()).collect();
    let m = aggregation_size(&best_sets);
    let aggregated_features = aggregate_features(&best_sets, m);

    let best_fold = (0..best.len())
        .min_by(|&a, &b| {
            let (x, y) = (&best[a].objectives, &best[b].objectives);
            x.error_rate()
                .partial_cmp(&y.error_rate())
                .unwrap_or(Ordering::Equal)
                .then(x.feature_count().partial_cmp(&y.feature_count()).unwrap_or(Ordering::Equal))
                .then(a.cmp(&b))
        })
        .expect("at least two folds");
    let champion = best[best_fold];
    let template = decode(&champion.chromosome, champion.chromosome.sub_seed(config.seed));
    let retrain_circuit = remap_circuit(&template, &aggregated_features)?;
    let retrained_accuracy = qsvm_cv_accuracy(
        dataset,
        &retrain_circuit,
        FINAL_CV_FOLDS,
        config.seed,
        (config.scale_lo, config.scale_hi),
        config.svm,
    )?;

    let k = best.len() as f64;
    let mean_best_accuracy = best.iter().map(|s| s.accuracy).sum::<f64>() / k;
    let gate_summary = GateSummary {
        mean_local: best.iter().map(|s| s.gates.local as f64).sum::<f64>() / k,
        mean_cnot: best.iter().map(|s| s.gates.cnot as f64).sum::<f64>() / k,
    };
    let best_raw_accuracy = champion.accuracy;

    Ok(SelectionReport {
        config: config.clone(),
        folds,
        m,
        aggregated_features,
        best_fold,
        retrain_circuit,
        retrained_accuracy,
        mean_best_accuracy,
        best_raw_accuracy,
        gate_summary,
    })
}

/// Classifier-by-feature-set accuracy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Column label and feature list for each evaluated set.
    pub feature_sets: Vec<(String, Vec<usize>)>,
    /// Row label and one accuracy per feature set.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("classifier");
        for (name, _) in &self.feature_sets {
            out.push(',');
            out.push_str(name);
        }
        out.push_str("\nfeatures");
        for (_, feats) in &self.feature_sets {
            out.push(',');
            out.push_str(&feats.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" "));
        }
        out.push('\n');
        for (name, accs) in &self.rows {
            out.push_str(name);
            for a in accs {
                out.push_str(&format!(",{a:.4}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.feature_sets.iter().position(|(n, _)| n == column)?;
        self.rows.iter().find(|(n, _)| n == row).map(|(_, v)| v[c])
    }
}

/// Evaluate the QSVMF features against SelectKBest (chi2 and f-regression)
/// sets of the same size, with the QSVM and all baseline classifiers.
///
/// `template` supplies the circuit structure used for the QSVM row.
pub fn compare_report(dataset: &Dataset, selected: &[usize], template: &CircuitSpec, seed: u64, scale: (f64, f64), svm: SmoParams) -> Result<ComparisonTable> {
    if selected.is_empty() {
        return Err(Error::invalid("feature list is empty"));
    }
    let p = dataset.n_features();
    if let Some(&f) = selected.iter().find(|&&f| f >= p) {
        return Err(Error::invalid(format!("feature index {f} out of range for {p} features")));
    }
    let k = selected.len();
    let mut feature_sets = vec![("qsvmf".to_string(), selected.to_vec())];
    for (name, method) in [("chi2", ScoreMethod::Chi2), ("f_regression", ScoreMethod::FRegression)] {
        let scores = feature_scores(method, dataset.features.view(), &dataset.labels)?;
        feature_sets.push((name.to_string(), select_k_best(&scores, k)?));
    }

    let mut rows = Vec::new();
    let qsvm: Vec<f64> = feature_sets
        .iter()
        .map(|(_, feats)| {
            let spec = remap_circuit(template, feats)?;
            qsvm_cv_accuracy(dataset, &spec, FINAL_CV_FOLDS, seed, scale, svm)
        })
        .collect::<Result<_>>()?;
    rows.push(("QSVMF".to_string(), qsvm));
    for baseline in Baseline::ALL {
        let accs = feature_sets
            .iter()
            .map(|(_, feats)| cv_accuracy(dataset, feats, baseline, FINAL_CV_FOLDS, seed, svm))
            .collect::<Result<Vec<_>>>()?;
        rows.push((baseline.name().to_string(), accs));
    }
    Ok(ComparisonTable { feature_sets, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(acc: f64, features: Vec<usize>) -> ParetoSolution {
        ParetoSolution {
            chromosome: Chromosome::new(vec![false; 14], 4, 3).unwrap(),
            objectives: Objectives([1.0 - acc, 0.0, 0.0, features.len() as f64, 0.0]),
            accuracy: acc,
            features,
            gates: GateCounts { local: 0, cnot: 0 },
        }
    }

    #[test]
    fn aggregation_by_hand() {
        let sets: Vec<Vec<usize>> = vec![vec![1, 2], vec![2, 3], vec![2, 4]];
        let refs: Vec<&[usize]> = sets.iter().map(|s| s.as_slice()).collect();
        let m = aggregation_size(&refs);
        assert_eq!(m, 2);
        assert_eq!(aggregate_features(&refs, m), vec![2, 1]);
    }

    #[test]
    fn aggregation_identical_sets() {
        let sets: Vec<Vec<usize>> = vec![vec![3, 7, 9]; 4];
        let refs: Vec<&[usize]> = sets.iter().map(|s| s.as_slice()).collect();
        let m = aggregation_size(&refs);
        let mut agg = aggregate_features(&refs, m);
        agg.sort();
        assert_eq!(agg, vec![3, 7, 9]);
    }

    #[test]
    fn rounding_is_half_up() {
        let sets: Vec<Vec<usize>> = vec![vec![1], vec![1, 2]];
        let refs: Vec<&[usize]> = sets.iter().map(|s| s.as_slice()).collect();
        assert_eq!(aggregation_size(&refs), 2);
    }

    #[test]
    fn minimal_features_cases() {
        let front = vec![sol(0.95, vec![1, 2, 3, 4]), sol(0.80, vec![5])];
        let min = pareto_minimal_features(&front);
        assert_eq!(min.len(), 1);
        assert_eq!(min[0].features, vec![5]);

        let tied = vec![sol(0.9, vec![1]), sol(0.7, vec![2]), sol(0.95, vec![1, 2])];
        assert_eq!(pareto_minimal_features(&tied).len(), 2);
    }

    #[test]
    fn best_prefers_accuracy_then_fewer_features() {
        let front = vec![sol(0.9, vec![1, 2]), sol(0.9, vec![3]), sol(0.8, vec![4])];
        assert_eq!(best_index(&front), 1);
    }

    #[test]
    fn remap_cycles_features() {
        let spec = remap_circuit(&default_circuit(4), &[13, 23]).unwrap();
        assert_eq!(spec.qubit_feature, vec![13, 23, 13, 23]);
        assert_eq!(spec.selected_features, vec![13, 23]);
        spec.validate(30).unwrap();
        assert!(remap_circuit(&default_circuit(2), &[]).is_err());
    }

    #[test]
    fn config_guards() {
        assert!(QsvmfConfig::default().validate().is_ok());
        assert!(QsvmfConfig { n_qubits: 1, ..Default::default() }.validate().is_err());
        assert!(QsvmfConfig { k_folds: 1, ..Default::default() }.validate().is_err());
    }
}

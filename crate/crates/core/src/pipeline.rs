//! End-to-end search: sample, filter by KTA, score survivors, rank, evolve,
//! and evaluate the final circuits as QSVM kernels.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Family};
use crate::config::SearchConfig;
use crate::datasets::Dataset;
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::evolve::evolve_population;
use crate::proxies::{
    cross_gram, evaluate_proxies, gram_matrix, kernel_proxies, kta, theta_draw, GramMode, ProxyData, ProxyKind, ProxyVector,
};
use crate::qsvm::{accuracy, svm_predict, svm_train};
use crate::ranking::{aggregate, build_rank_table, kta_filter_indices, top_k};
use crate::rng::task_rng;
use crate::search_space::sample_population;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub id: u64,
    pub family: Family,
    pub gate_count: usize,
    pub depth: usize,
    /// KTA on this iteration's kernel subsample.
    pub kta: f64,
    pub survived_filter: bool,
    /// Present for filter survivors only.
    pub proxies: Option<ProxyVector>,
    pub ranks: Option<BTreeMap<ProxyKind, usize>>,
    pub score: Option<f64>,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub circuits: Vec<CircuitRecord>,
    /// Ids of the top-K circuits, best first.
    pub selected: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub id: u64,
    pub family: Family,
    pub score: f64,
    /// Index of the parameter draw that was kept.
    pub theta_restart: usize,
    pub theta: Vec<f64>,
    pub train_kta: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub circuit: Circuit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub dataset: String,
    pub n_qubits: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub iterations: Vec<IterationRecord>,
    pub final_results: Vec<FinalResult>,
    /// Set when the run aborted; the records above are then partial.
    pub error: Option<String>,
}

impl RunReport {
    pub fn best_test_accuracy(&self) -> Option<f64> {
        self.final_results.iter().map(|f| f.test_accuracy).reduce(f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTiming {
    pub t_filter: f64,
    pub t_proxies: f64,
    pub t_rank: f64,
    pub t_evolve: f64,
    pub t_iteration: f64,
}

impl IterationTiming {
    /// `t_filter + t_proxies`, the metric-evaluation time.
    pub fn t_metrics(&self) -> f64 {
        self.t_filter + self.t_proxies
    }
}

/// Wall-clock seconds, kept apart from the report so that reports compare
/// byte for byte across runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub iterations: Vec<IterationTiming>,
    pub t_sample: f64,
    pub t_qsvm: f64,
    pub t_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timings: Timings,
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when 0.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Loads data and device from `cfg` and runs the search.
pub fn run_search(cfg: &SearchConfig) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::default();
    run_search_recording(cfg, &mut outcome)?;
    Ok(outcome)
}

/// As [`run_search`], but leaves whatever was completed in `outcome` when a
/// stage fails, with the error recorded in the report.
pub fn run_search_recording(cfg: &SearchConfig, outcome: &mut RunOutcome) -> Result<()> {
    cfg.validate()?;
    let device = cfg.device.load()?;
    let (train, test) = cfg.dataset.prepare(cfg.run.seed)?;
    run_search_on(cfg, &train, &test, &device, outcome)
}

/// Runs the search on prepared data. Errors are also written into
/// `outcome.report.error`.
pub fn run_search_on(cfg: &SearchConfig, train: &Dataset, test: &Dataset, device: &DeviceModel, outcome: &mut RunOutcome) -> Result<()> {
    let result = with_workers(cfg.run.workers, || search(cfg, train, test, device, outcome)).and_then(|r| r);
    if let Err(e) = &result {
        outcome.report.error = Some(e.to_string());
    }
    result
}

fn search(cfg: &SearchConfig, train: &Dataset, test: &Dataset, device: &DeviceModel, outcome: &mut RunOutcome) -> Result<()> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = cfg.run.seed;
    let n_features = train.n_features();
    outcome.report = RunReport {
        seed,
        dataset: train.name.clone(),
        n_qubits: cfg.run.n_qubits,
        n_features,
        n_train: train.len(),
        n_test: test.len(),
        ..Default::default()
    };
    let sampler = cfg.sampler_for(n_features);
    let t0 = Instant::now();
    let mut population = sample_population(device, &sampler, cfg.run.population_size, seed)?;
    outcome.timings.t_sample = seconds(t0);
    let mut next_id = cfg.run.population_size as u64;
    let mut final_selection: Vec<(Circuit, f64)> = Vec::new();

    for t in 0..=cfg.run.iterations {
        let t_iter = Instant::now();
        let mut timing = IterationTiming::default();
        population.sort_by_key(Circuit::id);
        let data = ProxyData::from_dataset(train, &cfg.proxies, &mut task_rng(seed, "subsample", t as u64))?;

        let t0 = Instant::now();
        let ktas: Vec<f64> =
            population.par_iter().map(|c| kernel_proxies(c, &data, &cfg.proxies, seed).map(|(k, _)| k)).collect::<Result<_>>()?;
        let ids: Vec<u64> = population.iter().map(Circuit::id).collect();
        let kept = kta_filter_indices(&ids, &ktas, cfg.ranking.keep_fraction)?;
        timing.t_filter = seconds(t0);

        let t0 = Instant::now();
        let survivors: Vec<&Circuit> = kept.iter().map(|&i| &population[i]).collect();
        let proxies: Vec<ProxyVector> =
            survivors.par_iter().map(|c| evaluate_proxies(c, &data, device, &cfg.proxies, seed)).collect::<Result<_>>()?;
        timing.t_proxies = seconds(t0);

        let t0 = Instant::now();
        let table = build_rank_table(&proxies, &cfg.ranking)?;
        let scores = aggregate(&table)?;
        let chosen = top_k(&scores, cfg.ranking.top_k)?;
        timing.t_rank = seconds(t0);

        let mut records: Vec<CircuitRecord> = population
            .iter()
            .zip(&ktas)
            .map(|(c, &k)| CircuitRecord {
                id: c.id(),
                family: c.family(),
                gate_count: c.gates().len(),
                depth: c.depth(),
                kta: k,
                survived_filter: false,
                proxies: None,
                ranks: None,
                score: None,
                selected: false,
            })
            .collect();
        for (s, &pos) in kept.iter().enumerate() {
            let r = &mut records[pos];
            r.survived_filter = true;
            r.proxies = Some(proxies[s].clone());
            r.ranks = Some(table.ranks_of(s));
            r.score = Some(scores[s]);
        }
        for &s in &chosen {
            records[kept[s]].selected = true;
        }
        let parents: Vec<Circuit> = chosen.iter().map(|&s| survivors[s].clone()).collect();
        outcome.report.iterations.push(IterationRecord {
            iteration: t,
            circuits: records,
            selected: parents.iter().map(Circuit::id).collect(),
        });

        if t < cfg.run.iterations {
            let t0 = Instant::now();
            population = evolve_population(&parents, device, &sampler, &cfg.evolve, cfg.run.population_size, &mut next_id, seed)?;
            timing.t_evolve = seconds(t0);
        } else {
            final_selection = parents.into_iter().zip(chosen.iter().map(|&s| scores[s])).collect();
        }
        timing.t_iteration = seconds(t_iter);
        log::info!(
            "iteration {t}: filter {:.2}s, proxies {:.2}s, rank {:.3}s, evolve {:.2}s",
            timing.t_filter,
            timing.t_proxies,
            timing.t_rank,
            timing.t_evolve
        );
        outcome.timings.iterations.push(timing);
    }

    let t0 = Instant::now();
    let results: Vec<FinalResult> = final_selection
        .par_iter()
        .map(|(c, score)| evaluate_final(c, *score, train, test, cfg).map_err(|e| e.at_stage("qsvm", c.id())))
        .collect::<Result<_>>()?;
    outcome.timings.t_qsvm = seconds(t0);
    outcome.report.final_results = results;
    outcome.timings.t_total = seconds(start);
    Ok(())
}

/// Trains and scores a QSVM with the circuit as its feature map. With
/// several restarts the parameter draw with the highest training KTA wins.
pub fn evaluate_final(circuit: &Circuit, score: f64, train: &Dataset, test: &Dataset, cfg: &SearchConfig) -> Result<FinalResult> {
    let seed = cfg.run.seed;
    let mut best: Option<(usize, Vec<f64>, f64, crate::proxies::GramMatrix)> = None;
    for r in 0..cfg.run.theta_restarts.max(1) {
        let theta = theta_draw(circuit, seed, r);
        let gram = gram_matrix(circuit, &train.x, &theta, GramMode::Exact)?;
        let k = kta(&gram, &train.y).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| k > b.2) {
            best = Some((r, theta, k, gram));
        }
        if circuit.theta_count() == 0 {
            break;
        }
    }
    let (theta_restart, theta, train_kta, gram) = best.expect("at least one draw");
    let model = svm_train(&gram, &train.y, &cfg.run.svm)?;
    let train_pred = svm_predict(&model, gram.matrix())?;
    let cross = cross_gram(circuit, &test.x, &train.x, &theta)?;
    let test_pred = svm_predict(&model, &cross)?;
    Ok(FinalResult {
        id: circuit.id(),
        family: circuit.family(),
        score,
        theta_restart,
        theta,
        train_kta,
        train_accuracy: accuracy(&train_pred, &train.y)?,
        test_accuracy: accuracy(&test_pred, &test.y)?,
        circuit: circuit.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-circuit table: one row per circuit per iteration.
pub fn proxies_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration", "id", "family", "gate_count", "depth", "kta", "survived_filter"];
    let metrics = [
        ProxyKind::Concentration,
        ProxyKind::ExpressivityKl,
        ProxyKind::Led,
        ProxyKind::HwFidelity,
        ProxyKind::CnotCount,
        ProxyKind::ParamCount,
    ];
    header.extend(metrics.iter().map(|m| m.name()));
    header.push("expressivity_degenerate");
    let rank_headers: Vec<String> = ProxyKind::ALL.iter().map(|p| format!("rank_{p}")).collect();
    header.extend(rank_headers.iter().map(String::as_str));
    header.extend(["score", "selected"]);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for it in &report.iterations {
        for c in &it.circuits {
            let mut row = vec![
                it.iteration.to_string(),
                c.id.to_string(),
                c.family.name().to_string(),
                c.gate_count.to_string(),
                c.depth.to_string(),
                c.kta.to_string(),
                c.survived_filter.to_string(),
            ];
            row.extend(metrics.iter().map(|m| opt(c.proxies.as_ref().map(|p| m.value(p)))));
            row.push(c.proxies.as_ref().map(|p| p.expressivity_degenerate.to_string()).unwrap_or_default());
            row.extend(ProxyKind::ALL.iter().map(|p| c.ranks.as_ref().and_then(|r| r.get(p)).map(|r| r.to_string()).unwrap_or_default()));
            row.push(opt(c.score));
            row.push(c.selected.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Long-format metric values, `iteration,id,metric,value`, for every circuit
/// that received the full proxy evaluation, plus KTA for every circuit.
pub fn metric_distributions_csv(report: &RunReport) -> String {
    let mut out = String::from("iteration,id,metric,value\n");
    for it in &report.iterations {
        for c in &it.circuits {
            out.push_str(&format!("{},{},kta,{}\n", it.iteration, c.id, c.kta));
            out.push_str(&format!("{},{},gate_count,{}\n", it.iteration, c.id, c.gate_count));
            if let Some(p) = &c.proxies {
                for m in ProxyKind::ALL.iter().filter(|m| **m != ProxyKind::Kta) {
                    out.push_str(&format!("{},{},{},{}\n", it.iteration, c.id, m, m.value(p)));
                }
            }
        }
    }
    out
}

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const PROXIES_FILE: &str = "proxies.csv";
pub const CIRCUITS_FILE: &str = "final_circuits.json";
pub const DISTRIBUTIONS_FILE: &str = "metric_distributions.csv";

/// Writes the report, timings, per-circuit table, final circuits and metric
/// distributions into `out_dir`, creating it if needed.
pub fn emit_results(outcome: &RunOutcome, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let report = &outcome.report;
    fs::write(dir.join(REPORT_FILE), report.to_json()?)?;
    fs::write(dir.join(TIMINGS_FILE), serde_json::to_string_pretty(&outcome.timings)?)?;
    fs::write(dir.join(PROXIES_FILE), proxies_csv(report)?)?;
    let circuits: Vec<&Circuit> = report.final_results.iter().map(|f| &f.circuit).collect();
    fs::write(dir.join(CIRCUITS_FILE), serde_json::to_string_pretty(&circuits)?)?;
    fs::write(dir.join(DISTRIBUTIONS_FILE), metric_distributions_csv(report))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub population: usize,
    /// Mean metric-evaluation seconds over the repeats.
    pub t_metrics: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a + b x` with its coefficient of
/// determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (intercept, slope, r2)
}

/// Times one metric round (KTA filter plus full proxies on the survivors)
/// for each population size and fits the time linearly in the size. Repeat
/// `r` samples its population with seed `run.seed + r`, so the mean over
/// repeats estimates the expected cost rather than that of one draw.
pub fn bench_scaling(cfg: &SearchConfig, populations: &[usize], repeats: usize) -> Result<ScalingReport> {
    if populations.len() < 3 {
        return Err(Error::Config("bench-scaling needs at least 3 population sizes".into()));
    }
    let device = cfg.device.load()?;
    let (train, _) = cfg.dataset.prepare(cfg.run.seed)?;
    let sampler = cfg.sampler_for(train.n_features());
    let data = ProxyData::from_dataset(&train, &cfg.proxies, &mut task_rng(cfg.run.seed, "subsample", 0))?;
    let repeats = repeats.max(1);
    let mut points = Vec::new();
    for &size in populations {
        let mut total = 0.0;
        for r in 0..repeats {
            let seed = cfg.run.seed.wrapping_add(r as u64);
            let population = sample_population(&device, &sampler, size, seed)?;
            let t0 = Instant::now();
            with_workers(cfg.run.workers, || -> Result<()> {
                let ktas: Vec<f64> =
                    population.par_iter().map(|c| kernel_proxies(c, &data, &cfg.proxies, seed).map(|r| r.0)).collect::<Result<_>>()?;
                let ids: Vec<u64> = population.iter().map(Circuit::id).collect();
                let kept = kta_filter_indices(&ids, &ktas, cfg.ranking.keep_fraction)?;
                kept.par_iter()
                    .map(|&i| evaluate_proxies(&population[i], &data, &device, &cfg.proxies, seed))
                    .collect::<Result<Vec<_>>>()?;
                Ok(())
            })??;
            total += seconds(t0);
        }
        points.push(ScalingPoint { population: size, t_metrics: total / repeats as f64 });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.population as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.t_metrics).collect();
    let (intercept, slope, r_squared) = linear_fit(&xs, &ys);
    Ok(ScalingReport { points, slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_fit_exact_line() {
        let (a, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }

    fn small_config() -> SearchConfig {
        let mut cfg = SearchConfig::default();
        cfg.dataset.params.n = 40;
        cfg.dataset.params.d = 3;
        cfg.run.n_qubits = 3;
        cfg.run.population_size = 12;
        cfg.run.iterations = 1;
        cfg.ranking.keep_fraction = 0.5;
        cfg.ranking.top_k = 3;
        cfg.proxies.expressivity.n_fidelity_samples = 20;
        cfg.proxies.led.n_theta_samples = 3;
        cfg.proxies.led.data_subsample = 8;
        cfg
    }

    #[test]
    fn small_search_shape() {
        let out = run_search(&small_config()).unwrap();
        let r = &out.report;
        assert_eq!(r.iterations.len(), 2);
        for it in &r.iterations {
            assert_eq!(it.circuits.len(), 12);
            assert_eq!(it.circuits.iter().filter(|c| c.survived_filter).count(), 6);
            assert_eq!(it.selected.len(), 3);
        }
        assert_eq!(r.final_results.len(), 3);
        assert!(r.error.is_none());
        let csv = proxies_csv(r).unwrap();
        assert_eq!(csv.lines().count(), 1 + 24);
    }
}

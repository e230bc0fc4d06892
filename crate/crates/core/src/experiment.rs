//! End-to-end benchmark runs: POD, time-step estimate, then intrusive and
//! inferred operators for every reduced dimension, with pass/fail checks.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde_json::json;

use crate::benchmarks::{Benchmark, BenchmarkName};
use crate::diagnostics::{fmt_f64, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::exact_opinf::{
    estimate_dt, extend_ensemble, generate_ensemble, infer, rank_ensuring_pairs, solve_ensemble, standard_opinf,
    SnapshotEnsemble, TrajectoryData,
};
use crate::galerkin::{reduce, AggregatedOperator};
use crate::io::table_to_string;
use crate::pod::{pod_basis, PodBasis};

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    /// Largest reduced dimension; the benchmark's own maximum when `None`.
    pub n_max: Option<usize>,
    /// Inference step; estimated from the snapshots when `None`.
    pub dt: Option<f64>,
    /// Also fit the least-squares baseline on projected trajectory data.
    pub baseline: bool,
    /// Compare every extended ensemble with a freshly generated one.
    pub check_nested: bool,
    /// Compute `κ(P)` (one SVD per `n`).
    pub condition: bool,
    /// Allow `n_max` beyond the benchmark's documented range.
    pub force: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            n_max: None,
            dt: None,
            baseline: false,
            check_nested: false,
            condition: true,
            force: false,
        }
    }
}

/// Results for one reduced dimension.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub n: usize,
    pub ensemble_size: usize,
    /// Full-order steps carried over from the `n − 1` ensemble.
    pub reused: usize,
    pub report: DiagnosticsReport,
    pub residual: f64,
    /// `‖Â_2‖_F / ‖Ô‖_F`, when a quadratic block exists.
    pub quadratic_ratio: Option<f64>,
    /// Energy violation divided by `‖Ô‖_F`; `‖Â_2‖_F` itself may vanish (n = 1).
    pub energy_violation_scaled: Option<f64>,
    pub intrusive_energy_violation: Option<f64>,
    pub intrusive_symmetry_violation: Option<f64>,
    /// Largest entry of `Ô_extended − Ô_fresh`.
    pub nested_deviation: Option<f64>,
    pub baseline_error: Option<f64>,
    pub inferred: AggregatedOperator,
    pub intrusive: AggregatedOperator,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub benchmark: BenchmarkName,
    pub pod: PodBasis,
    pub dt_estimate: Option<f64>,
    pub dt_used: f64,
    pub records: Vec<StepRecord>,
    pub pod_elapsed: Duration,
}

/// One violated acceptance threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub check: &'static str,
    pub n: Option<usize>,
    pub value: f64,
    pub limit: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.n.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        write!(f, "check={} n={} value={} limit={}", self.check, n, fmt_f64(self.value), self.limit)
    }
}

/// Target step and the allowed multiplicative deviation.
pub fn dt_reference(name: BenchmarkName) -> (f64, f64) {
    match name {
        BenchmarkName::ChafeeInfante => (3.2733e-5, 2.0),
        BenchmarkName::Burgers => (0.1013, 2.0),
        BenchmarkName::ShallowIce => (1.4726e13, 10.0),
    }
}

/// Largest relative operator error tolerated per benchmark.
pub fn error_tolerance(name: BenchmarkName) -> f64 {
    match name {
        BenchmarkName::ShallowIce => 1e-6,
        _ => 1e-9,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}

/// `Σ_i C(n+i−1, i) + N_u`, computed without enumerating tuples.
pub fn expected_ensemble_size(n: usize, degrees: &[usize], n_inputs: usize) -> usize {
    degrees.iter().map(|&i| binomial(n + i - 1, i)).sum::<usize>() + n_inputs
}

pub fn run_experiment(
    bench: &Benchmark,
    opts: &ExperimentOptions,
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentResult> {
    let spec = &bench.spec;
    let n_max = opts.n_max.unwrap_or(spec.n_max);
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if n_max > spec.n_max && !opts.force {
        return Err(Error::InvalidArgument(format!(
            "n_max {n_max} exceeds the documented range 1..={} of {} (use force to override)",
            spec.n_max, spec.name
        )));
    }

    let start = Instant::now();
    let snapshots = bench.pod_snapshots()?;
    let pod = pod_basis(&snapshots, n_max)?;
    let pod_elapsed = start.elapsed();
    progress(&format!("{}: POD with {} snapshots in {:.2?}", spec.name, snapshots.len(), pod_elapsed));

    let dt_estimate = match opts.dt {
        Some(_) => None,
        None => Some(estimate_dt(&snapshots, &pod.modes().columns(0, 1).into_owned(), &spec.degrees)?),
    };
    let dt_used = opts.dt.or(dt_estimate).expect("one of the two is set");
    if !(dt_used > 0.0 && dt_used.is_finite()) {
        return Err(Error::InvalidArgument(format!("inference step must be positive, got {dt_used}")));
    }
    progress(&format!("{}: inference step {}", spec.name, fmt_f64(dt_used)));
    let trajectory = if opts.baseline { Some(snapshots) } else { None };

    let fom = bench.fom.as_ref();
    let mut records = Vec::with_capacity(n_max);
    let mut previous: Option<SnapshotEnsemble> = None;
    for n in 1..=n_max {
        let t0 = Instant::now();
        let v: DMatrix<f64> = pod.modes().columns(0, n).into_owned();
        let (ensemble, reused) = match &previous {
            Some(old) => extend_ensemble(old, fom, &v)?,
            None => (generate_ensemble(fom, &v, rank_ensuring_pairs(n, fom.degrees(), fom.input_dim())?, dt_used)?, 0),
        };
        let (inferred, residual, cond_p) = if opts.condition {
            let inf = infer(&ensemble)?;
            (inf.operator, inf.residual, inf.cond_p)
        } else {
            let (op, residual) = solve_ensemble(&ensemble)?;
            (op, residual, f64::NAN)
        };
        let intrusive = reduce(fom, &v)?;
        let report = DiagnosticsReport::compute(&inferred, &intrusive, cond_p)?;

        let nested_deviation = if opts.check_nested && n > 1 {
            let fresh = generate_ensemble(fom, &v, rank_ensuring_pairs(n, fom.degrees(), fom.input_dim())?, dt_used)?;
            let (op, _) = solve_ensemble(&fresh)?;
            Some((op.matrix() - inferred.matrix()).amax())
        } else {
            None
        };
        let baseline_error = match &trajectory {
            Some(traj) => {
                let data = TrajectoryData::project(traj, &v)?;
                let fit = standard_opinf(&data, inferred.basis(), 0.0)?;
                Some(crate::diagnostics::relative_operator_error(&fit.operator, &intrusive)?)
            }
            None => None,
        };

        let quadratic_ratio = inferred.block(2).map(|b| b.norm() / inferred.matrix().norm());
        let energy_violation_scaled = report.energy_violation.map(|e| e / inferred.matrix().norm());
        let intrusive_energy_violation = match (intrusive.block(2), intrusive.block(1)) {
            (Some(a2), Some(_)) => Some(crate::diagnostics::energy_violation(a2)?),
            _ => None,
        };
        let intrusive_symmetry_violation = intrusive
            .block(1)
            .and_then(|a1| crate::diagnostics::symmetry_violation(a1).ok());
        let record = StepRecord {
            n,
            ensemble_size: ensemble.len(),
            reused,
            report,
            residual,
            quadratic_ratio,
            energy_violation_scaled,
            intrusive_energy_violation,
            intrusive_symmetry_violation,
            nested_deviation,
            baseline_error,
            inferred,
            intrusive,
            elapsed: t0.elapsed(),
        };
        progress(&format!(
            "{}: n={:>2} n_f={:>5} error={} cond={} ({:.2?})",
            spec.name,
            n,
            record.ensemble_size,
            fmt_f64(record.report.relative_error),
            fmt_f64(record.report.cond_p),
            record.elapsed
        ));
        records.push(record);
        previous = Some(ensemble);
    }

    Ok(ExperimentResult {
        benchmark: spec.name,
        pod,
        dt_estimate,
        dt_used,
        records,
        pod_elapsed,
    })
}

impl ExperimentResult {
    /// Every acceptance threshold that applies to this benchmark and is violated.
    pub fn failures(&self) -> Vec<Failure> {
        let mut out = Vec::new();
        let mut check = |ok: bool, check: &'static str, n: Option<usize>, value: f64, limit: String| {
            if !ok {
                out.push(Failure { check, n, value, limit });
            }
        };
        let name = self.benchmark;
        let tol = error_tolerance(name);
        if let Some(est) = self.dt_estimate {
            let (reference, factor) = dt_reference(name);
            let ratio = est / reference;
            check(
                ratio <= factor && ratio >= 1.0 / factor,
                "dt_estimate",
                None,
                est,
                format!("{reference:e}x/{factor}"),
            );
        }
        for r in &self.records {
            let n = Some(r.n);
            let e = r.report.relative_error;
            check(e < tol, "operator_error", n, e, format!("<{tol:e}"));
            let basis = r.inferred.basis();
            let expected = expected_ensemble_size(r.n, basis.degrees().as_slice(), basis.n_inputs());
            check(r.ensemble_size == expected, "ensemble_size", n, r.ensemble_size as f64, format!("={expected}"));
            if let Some(d) = r.nested_deviation {
                check(d < 1e-12, "nestedness", n, d, "<1e-12".into());
            }
            match name {
                BenchmarkName::ChafeeInfante => {
                    let q = r.quadratic_ratio.unwrap_or(0.0);
                    check(q < 1e-9, "quadratic_vanishes", n, q, "<1e-9".into());
                    if r.n == 14 {
                        check(r.ensemble_size == 680, "golden_count", n, r.ensemble_size as f64, "=680".into());
                    }
                }
                BenchmarkName::ShallowIce => {
                    if r.n == 7 {
                        check(r.ensemble_size == 3087, "golden_count", n, r.ensemble_size as f64, "=3087".into());
                    }
                }
                BenchmarkName::Burgers => {
                    if let Some(scaled) = r.energy_violation_scaled {
                        check(scaled < 1e-11, "energy_violation", n, scaled, "<1e-11".into());
                    }
                    if let Some(s) = r.report.symmetry_violation {
                        check(s < 1e-12, "symmetry_violation", n, s, "<1e-12".into());
                    }
                    if let (Some(a), Some(b)) = (&r.report.spectrum_inferred, &r.report.spectrum_intrusive) {
                        let low = a.iter().copied().fold(f64::INFINITY, f64::min);
                        check(low >= -1e-10, "spectrum_sign", n, low, ">=-1e-10".into());
                        let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        check(diff < 1e-10, "spectrum_match", n, diff, "<1e-10".into());
                    }
                }
            }
        }
        out
    }

    /// Writes the CSV tables into `dir`; returns the file names written.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let meta = json!({ "benchmark": self.benchmark.as_str() });
        let mut written = Vec::new();
        let mut put = |name: &str, text: String| -> Result<()> {
            fs::write(dir.join(name), text)?;
            written.push(name.to_string());
            Ok(())
        };

        let first = self.records.first().ok_or_else(|| Error::InvalidArgument("no results".into()))?;
        let mut columns = vec!["n".to_string(), "ensemble_size".into(), "relative_error".into()];
        columns.extend(first.report.block_errors.iter().map(|(b, _)| format!("error_{b}")));
        columns.push("residual".into());
        if first.quadratic_ratio.is_some() {
            columns.push("quadratic_ratio".into());
        }
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                let mut row = vec![r.n.to_string(), r.ensemble_size.to_string(), fmt_f64(r.report.relative_error)];
                row.extend(r.report.block_errors.iter().map(|(_, e)| fmt_f64(*e)));
                row.push(fmt_f64(r.residual));
                if let Some(q) = r.quadratic_ratio {
                    row.push(fmt_f64(q));
                }
                row
            })
            .collect();
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        put("operator_errors.csv", table_to_string("operator-errors", &meta, &cols, &rows))?;

        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| vec![r.n.to_string(), r.ensemble_size.to_string(), fmt_f64(r.report.cond_p)])
            .collect();
        put("cond_P.csv", table_to_string("cond-p", &meta, &["n", "ensemble_size", "cond_P"], &rows))?;

        let (reference, factor) = dt_reference(self.benchmark);
        let est = self.dt_estimate.map(fmt_f64).unwrap_or_default();
        let ratio = self.dt_estimate.map(|e| fmt_f64(e / reference)).unwrap_or_default();
        put(
            "dt_estimate.csv",
            table_to_string(
                "dt-estimate",
                &meta,
                &["dt_estimate", "dt_used", "reference", "ratio", "allowed_factor"],
                &[vec![est, fmt_f64(self.dt_used), fmt_f64(reference), ratio, fmt_f64(factor)]],
            ),
        )?;

        let rows: Vec<Vec<String>> = self
            .pod
            .singular_values()
            .iter()
            .enumerate()
            .map(|(k, s)| vec![(k + 1).to_string(), fmt_f64(*s)])
            .collect();
        put("singular_values.csv", table_to_string("singular-values", &meta, &["k", "sigma"], &rows))?;

        if self.records.iter().any(|r| r.nested_deviation.is_some()) {
            let rows: Vec<Vec<String>> = self
                .records
                .iter()
                .filter_map(|r| {
                    r.nested_deviation.map(|d| {
                        vec![r.n.to_string(), r.reused.to_string(), (r.ensemble_size - r.reused).to_string(), fmt_f64(d)]
                    })
                })
                .collect();
            put(
                "nestedness.csv",
                table_to_string("nestedness", &meta, &["n", "reused", "new_steps", "max_abs_deviation"], &rows),
            )?;
        }

        if self.records.iter().any(|r| r.baseline_error.is_some()) {
            let rows: Vec<Vec<String>> = self
                .records
                .iter()
                .filter_map(|r| {
                    r.baseline_error
                        .map(|b| vec![r.n.to_string(), fmt_f64(r.report.relative_error), fmt_f64(b)])
                })
                .collect();
            put(
                "baseline.csv",
                table_to_string("baseline", &meta, &["n", "exact_error", "standard_error"], &rows),
            )?;
        }

        if self.benchmark == BenchmarkName::Burgers {
            let rows: Vec<Vec<String>> = self
                .records
                .iter()
                .map(|r| {
                    let ev = r.report.energy_violation.unwrap_or(f64::NAN);
                    let iv = r.intrusive_energy_violation.unwrap_or(f64::NAN);
                    let scale = r.intrusive.matrix().norm();
                    let quadratic = r.inferred.block(2).map(|b| b.norm()).unwrap_or(f64::NAN);
                    vec![
                        r.n.to_string(),
                        fmt_f64(ev),
                        fmt_f64(ev / r.inferred.matrix().norm()),
                        fmt_f64(ev / quadratic),
                        fmt_f64(iv),
                        fmt_f64(iv / scale),
                    ]
                })
                .collect();
            put(
                "energy_violation.csv",
                table_to_string(
                    "energy-violation",
                    &meta,
                    &["n", "inferred", "inferred_scaled", "inferred_per_quadratic_norm", "intrusive", "intrusive_scaled"],
                    &rows,
                ),
            )?;
            let rows: Vec<Vec<String>> = self
                .records
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_f64(r.report.symmetry_violation.unwrap_or(f64::NAN)),
                        fmt_f64(r.intrusive_symmetry_violation.unwrap_or(f64::NAN)),
                    ]
                })
                .collect();
            put(
                "symmetry_violation.csv",
                table_to_string("symmetry-violation", &meta, &["n", "inferred", "intrusive"], &rows),
            )?;
            let mut rows = Vec::new();
            for r in &self.records {
                if let (Some(a), Some(b)) = (&r.report.spectrum_inferred, &r.report.spectrum_intrusive) {
                    for (k, (x, y)) in a.iter().zip(b).enumerate() {
                        rows.push(vec![r.n.to_string(), (k + 1).to_string(), fmt_f64(*y), fmt_f64(*x), fmt_f64((x - y).abs())]);
                    }
                }
            }
            put(
                "spectra.csv",
                table_to_string("spectra", &meta, &["n", "k", "intrusive", "inferred", "abs_diff"], &rows),
            )?;
        }

        let failures = self.failures();
        let rows: Vec<Vec<String>> = failures
            .iter()
            .map(|f| {
                vec![
                    f.check.to_string(),
                    f.n.map(|n| n.to_string()).unwrap_or_default(),
                    fmt_f64(f.value),
                    f.limit.clone(),
                ]
            })
            .collect();
        put("failures.csv", table_to_string("failures", &meta, &["check", "n", "value", "limit"], &rows))?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::BenchmarkConfig;
    use crate::tensor_poly::monomial_count;

    #[test]
    fn expected_sizes_match_enumeration() {
        for n in 1..8 {
            for degrees in [vec![1, 2, 3], vec![3, 8], vec![0, 2, 5]] {
                let direct: usize = degrees.iter().map(|&i| monomial_count(n, i).unwrap()).sum();
                assert_eq!(expected_ensemble_size(n, &degrees, 2), direct + 2);
            }
        }
        assert_eq!(expected_ensemble_size(14, &[1, 2, 3], 1), 680);
        assert_eq!(expected_ensemble_size(7, &[3, 8], 0), 3087);
    }

    #[test]
    fn small_burgers_run_passes_and_writes_tables() {
        let config = BenchmarkConfig {
            dim: Some(32),
            horizon: Some(0.2),
            n_max: Some(4),
            ..Default::default()
        };
        let bench = Benchmark::build(BenchmarkName::Burgers, &config).unwrap();
        let opts = ExperimentOptions {
            dt: Some(0.05),
            check_nested: true,
            baseline: true,
            ..Default::default()
        };
        let mut log = Vec::new();
        let res = run_experiment(&bench, &opts, &mut |m| log.push(m.to_string())).unwrap();
        assert_eq!(res.records.len(), 4);
        assert!(log.len() >= 5);
        assert!(res.failures().is_empty(), "{:?}", res.failures());
        assert_eq!(res.records[3].reused, expected_ensemble_size(3, &[1, 2], 0));
        let dir = tempfile::tempdir().unwrap();
        let files = res.write_csv(dir.path()).unwrap();
        for f in ["operator_errors.csv", "cond_P.csv", "dt_estimate.csv", "energy_violation.csv", "symmetry_violation.csv", "spectra.csv", "nestedness.csv", "baseline.csv", "failures.csv"] {
            assert!(files.iter().any(|x| x == f), "{f}");
        }
        let ops = fs::read_to_string(dir.path().join("operator_errors.csv")).unwrap();
        assert_eq!(ops.lines().count(), 2 + 4);
        assert!(ops.starts_with("# exact-opinf operator-errors v1 {\"benchmark\":\"burgers\"}"));
        let failures = fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert_eq!(failures.lines().count(), 2);
    }

    #[test]
    fn range_is_enforced_unless_forced() {
        let config = BenchmarkConfig {
            dim: Some(16),
            horizon: Some(0.05),
            ..Default::default()
        };
        let bench = Benchmark::build(BenchmarkName::Burgers, &config).unwrap();
        let opts = ExperimentOptions {
            n_max: Some(11),
            dt: Some(0.1),
            condition: false,
            ..Default::default()
        };
        assert!(matches!(run_experiment(&bench, &opts, &mut |_| {}), Err(Error::InvalidArgument(_))));
        let forced = ExperimentOptions { force: true, ..opts };
        let res = run_experiment(&bench, &forced, &mut |_| {}).unwrap();
        assert_eq!(res.records.len(), 11);
        assert!(res.records[0].report.cond_p.is_nan());
    }

    #[test]
    fn failures_render_machine_readably() {
        let f = Failure {
            check: "operator_error",
            n: Some(3),
            value: 0.5,
            limit: "<1e-9".into(),
        };
        assert_eq!(f.to_string(), "check=operator_error n=3 value=5.0000000000000000e-1 limit=<1e-9");
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use combfit::bench::{run_bench, BenchOptions, BenchReport};
use combfit::bootstrap::{parametric_bootstrap, BootstrapOptions};
use combfit::copula::CopulaFamily;
use combfit::data::{load_claims, summarize, write_claims, DatasetSummary, LoadOptions, Unit};
use combfit::estimation::ifm::{fit_ifm, FitOptions, FitReport, ParameterInterval};
use combfit::estimation::spearman::{spearman_bounds, spearman_rho};
use combfit::estimation::zero_mixed::{zero_mixed_fit, SubsetFitStatus, ZeroMixedReport};
use combfit::estimation::NelderMeadOptions;
use combfit::marginals::MixedMarginal;
use combfit::model::{default_labels, simulate, ClaimSeries, CombBernoulliModel};
use combfit::mvn::{CorrelationMatrix, MvnOptions};
use combfit::rng::derive_seed;

use crate::report::{fmt_opt, guard, provenance, Sink};
use crate::{Command, DataArgs, Failure, Family, FitArgs, SeedArgs, UnitArg};

/// Model interchange document shared by `fit --model-out` and `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub marginals: Vec<MarginalSpec>,
    pub correlation: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub p: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl ModelFile {
    fn from_fit(fit: &FitReport) -> Self {
        Self {
            labels: Some(fit.labels.clone()),
            marginals: fit
                .marginals
                .iter()
                .map(|m| MarginalSpec {
                    p: m.p,
                    mu: m.severity.mu,
                    sigma: m.severity.sigma,
                })
                .collect(),
            correlation: fit.correlation.to_rows(),
        }
    }

    fn model(&self) -> Result<CombBernoulliModel, Failure> {
        let marginals = self
            .marginals
            .iter()
            .map(|m| MixedMarginal::lognormal(m.p, m.mu, m.sigma))
            .collect::<combfit::Result<Vec<_>>>()?;
        let r = CorrelationMatrix::from_rows(&self.correlation)?;
        Ok(CombBernoulliModel::new(marginals, r)?)
    }
}

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Stats(data) => stats(&data),
        Command::Fit { data, fit, model_out } => fit_cmd(&data, &fit, model_out.as_deref()),
        Command::Simulate { model, rows, out, seed } => simulate_cmd(&model, rows, &out, &seed),
        Command::Bootstrap {
            data,
            fit,
            replicas,
            alpha,
            no_bonferroni,
            marginals,
        } => bootstrap_cmd(&data, &fit, replicas, alpha, !no_bonferroni, marginals),
        Command::Spearman(data) => spearman_cmd(&data),
        Command::ZeroMixed(data) => zero_mixed_cmd(&data),
        Command::Bench {
            dims,
            rows,
            horizon,
            repetitions,
            levy_max_dim,
            copula,
            nu,
            json,
            out,
            seed,
        } => {
            let family = match copula {
                Family::Gaussian => CopulaFamily::Gaussian,
                Family::T => CopulaFamily::StudentT { nu },
            };
            let opts = BenchOptions {
                dims,
                n_rows: rows,
                levy_horizon: horizon,
                repetitions,
                seed: require_seed(&seed)?,
                family,
                levy_max_dim,
                threads: 1,
                ..BenchOptions::default()
            };
            bench_cmd(opts, json, &out)
        }
    }
}

fn require_seed(s: &SeedArgs) -> Result<u64, Failure> {
    s.seed
        .ok_or_else(|| Failure::usage("a seed is required: pass --seed or set COMBFIT_SEED"))
}

fn load(data: &DataArgs) -> Result<ClaimSeries, Failure> {
    if !data.input.exists() {
        return Err(Failure::usage(format!("input file {} not found", data.input.display())));
    }
    let opts = LoadOptions {
        unit: match data.unit {
            UnitArg::Dkk => Unit::Dkk,
            UnitArg::Millions => Unit::Millions,
        },
        date_column: None,
        columns: data.columns.clone(),
    };
    Ok(load_claims(&data.input, &opts)?)
}

fn data_options(data: &DataArgs) -> Value {
    json!({
        "input": data.input.display().to_string(),
        "unit": format!("{:?}", data.unit).to_lowercase(),
        "columns": data.columns,
    })
}

// ---------------------------------------------------------------------------

fn stats(data: &DataArgs) -> Result<(), Failure> {
    let sink = Sink::open(&data.out)?;
    let series = load(data)?;
    let summary = summarize(&series);
    let prov = provenance("stats", None, None, data_options(data));
    let mut body = serde_json::to_value(&summary).expect("summary serializes");
    body["labels"] = json!(series.labels());
    sink.emit(&prov, body, || stats_table(series.labels(), &summary))
}

fn stats_table(labels: &[String], s: &DatasetSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "days: {}", s.n_days);
    let _ = writeln!(t, "{:<12} {:>8} {:>7} {:>10} {:>10} {:>10}", "column", "claims", "share", "mean", "min", "max");
    for c in &s.columns {
        let _ = writeln!(
            t,
            "{:<12} {:>8} {:>7.3} {:>10} {:>10} {:>10}",
            c.label,
            c.n_positive,
            c.share,
            fmt_opt(c.mean, 3),
            fmt_opt(c.min, 3),
            fmt_opt(c.max, 3)
        );
    }
    let d = labels.len();
    for i in 0..d {
        for j in i + 1..d {
            let _ = writeln!(
                t,
                "{} & {}: co-jumps {}, no-jumps {}",
                labels[i], labels[j], s.co_jumps[i][j], s.no_jumps[i][j]
            );
        }
    }
    let _ = writeln!(t, "all columns: co-jumps {}, no-jumps {}", s.all_co_jumps, s.all_no_jumps);
    t
}

// ---------------------------------------------------------------------------

fn fit_options(f: &FitArgs, seed: u64) -> FitOptions {
    FitOptions {
        nelder_mead: NelderMeadOptions {
            xtol: f.tol,
            max_iter: f.max_iter,
            ..FitOptions::default().nelder_mead
        },
        restarts: f.restarts,
        seed,
        mvn: MvnOptions::with_tol(f.mvn_tol).with_seed(derive_seed(seed, 0)),
        warm_start: None,
    }
}

fn fit_option_values(f: &FitArgs) -> Value {
    json!({ "restarts": f.restarts, "max_iter": f.max_iter, "tol": f.tol })
}

fn merge(a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Object(mut x), Value::Object(y)) => {
            x.extend(y);
            Value::Object(x)
        }
        (a, _) => a,
    }
}

fn fit_cmd(data: &DataArgs, f: &FitArgs, model_out: Option<&Path>) -> Result<(), Failure> {
    let seed = require_seed(&f.seed)?;
    let sink = Sink::open(&data.out)?;
    if let Some(p) = model_out {
        guard(p, data.out.force)?;
    }
    let series = load(data)?;
    let report = fit_ifm(&series, &fit_options(f, seed))?;
    let prov = provenance(
        "fit",
        Some(seed),
        Some(f.mvn_tol),
        merge(data_options(data), fit_option_values(f)),
    );
    if let Some(p) = model_out {
        let text = serde_json::to_string_pretty(&ModelFile::from_fit(&report)).expect("model serializes") + "\n";
        fs::write(p, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display())))?;
    }
    sink.emit(&prov, json!({ "fit": report }), || fit_table(&report))?;
    if !report.converged {
        return Err(Failure::not_converged(format!(
            "optimizer stopped after {} iterations without converging; partial report written",
            report.iterations
        )));
    }
    Ok(())
}

fn fit_table(r: &FitReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{:<12} {:>8} {:>8} {:>8}", "column", "p", "mu", "sigma");
    for (l, m) in r.labels.iter().zip(&r.marginals) {
        let _ = writeln!(t, "{:<12} {:>8.4} {:>8.4} {:>8.4}", l, m.p, m.severity.mu, m.severity.sigma);
    }
    let names = r.correlation_names();
    let values = r.correlation.upper_entries();
    for (k, (n, v)) in names.iter().zip(&values).enumerate() {
        let ci = r
            .ci
            .as_ref()
            .and_then(|c| c.get(k))
            .map(|c| format!("  [{:.4}, {:.4}]", c.lower, c.upper))
            .unwrap_or_default();
        let _ = writeln!(t, "{n:<28} {v:>8.4}{ci}");
    }
    let _ = writeln!(
        t,
        "log-likelihood {:.4}, converged {}, iterations {}",
        r.loglik, r.converged, r.iterations
    );
    t
}

// ---------------------------------------------------------------------------

fn simulate_cmd(model_path: &Path, rows: usize, out: &crate::OutputArgs, seed: &SeedArgs) -> Result<(), Failure> {
    let seed = require_seed(seed)?;
    let sink = Sink::open(out)?;
    let text = fs::read_to_string(model_path)
        .map_err(|e| Failure::usage(format!("cannot read model {}: {e}", model_path.display())))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid model file: {e}")))?;
    let model = file.model()?;
    let sim = simulate(&model, rows, seed)?;
    let labels = file.labels.clone().unwrap_or_else(|| default_labels(model.dim()));
    let sim = ClaimSeries::new(labels, sim.to_rows())?;
    let mut buf = Vec::new();
    write_claims(&sim, &mut buf)?;
    sink.write(&String::from_utf8(buf).expect("csv is utf-8"))
}

// ---------------------------------------------------------------------------

fn bootstrap_cmd(
    data: &DataArgs,
    f: &FitArgs,
    replicas: usize,
    alpha: f64,
    bonferroni: bool,
    marginals: bool,
) -> Result<(), Failure> {
    let seed = require_seed(&f.seed)?;
    let sink = Sink::open(&data.out)?;
    let series = load(data)?;
    let fit_opts = fit_options(f, seed);
    let mut report = fit_ifm(&series, &fit_opts)?;
    let options = merge(
        merge(data_options(data), fit_option_values(f)),
        json!({ "replicas": replicas, "alpha": alpha, "bonferroni": bonferroni, "marginals": marginals }),
    );
    let prov = provenance("bootstrap", Some(seed), Some(f.mvn_tol), options);
    if !report.converged {
        sink.emit(&prov, json!({ "fit": report }), || fit_table(&report))?;
        return Err(Failure::not_converged(
            "fit did not converge; bootstrap skipped, partial report written",
        ));
    }
    let model = report.model()?.with_mvn(fit_opts.mvn);
    let boot_opts = BootstrapOptions {
        replicas,
        alpha,
        seed: derive_seed(seed, 1),
        bonferroni,
        include_marginals: marginals,
        fit: FitOptions {
            restarts: 1,
            ..fit_opts
        },
    };
    let boot = parametric_bootstrap(&model, series.n_rows(), &boot_opts)?;
    let mut estimates = report.correlation.upper_entries();
    if marginals {
        for m in &report.marginals {
            estimates.extend([m.p, m.severity.mu, m.severity.sigma]);
        }
    }
    let mut names = report.correlation_names();
    if marginals {
        names = combfit::bootstrap::parameter_names(&report.labels, true);
    }
    let intervals: Vec<Value> = names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            json!({
                "name": n,
                "estimate": estimates[k],
                "lower": boot.intervals[k].0,
                "upper": boot.intervals[k].1,
                "lower_unadjusted": boot.intervals_unadjusted[k].0,
                "upper_unadjusted": boot.intervals_unadjusted[k].1,
                "lower_bonferroni": boot.intervals_bonferroni[k].0,
                "upper_bonferroni": boot.intervals_bonferroni[k].1,
            })
        })
        .collect();
    report.ci = Some(
        names
            .iter()
            .zip(&boot.intervals)
            .map(|(n, &(lower, upper))| ParameterInterval {
                name: n.clone(),
                lower,
                upper,
            })
            .collect(),
    );
    let table = {
        let mut t = String::new();
        let _ = writeln!(
            t,
            "{:<28} {:>8} {:>18} {:>18}",
            "parameter", "estimate", "interval", "per-parameter"
        );
        for (k, n) in names.iter().enumerate() {
            let _ = writeln!(
                t,
                "{:<28} {:>8.4} [{:>7.4}, {:>7.4}] [{:>7.4}, {:>7.4}]",
                n,
                estimates[k],
                boot.intervals[k].0,
                boot.intervals[k].1,
                boot.intervals_unadjusted[k].0,
                boot.intervals_unadjusted[k].1
            );
        }
        let _ = writeln!(
            t,
            "replicas {} ({} failed, {} not converged), alpha {}, bonferroni {}",
            boot.replicas.len(),
            boot.failed,
            boot.not_converged,
            alpha,
            bonferroni
        );
        t
    };
    sink.emit(
        &prov,
        json!({ "fit": report, "bootstrap": boot, "intervals": intervals }),
        || table,
    )
}

// ---------------------------------------------------------------------------

fn spearman_cmd(data: &DataArgs) -> Result<(), Failure> {
    let sink = Sink::open(&data.out)?;
    let series = load(data)?;
    let labels = series.labels().to_vec();
    let d = series.n_cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| series.column(j)).collect();
    let mut pairs = Vec::new();
    let mut table = format!(
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "pair", "rho", "min", "max", "r_min", "r_max"
    );
    for i in 0..d {
        for j in i + 1..d {
            let b = spearman_bounds(&cols[i], &cols[j])?;
            let rho = spearman_rho(&cols[i], &cols[j])?;
            let (rlo, rhi) = b.correlation_scale();
            let _ = writeln!(
                table,
                "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                format!("{} & {}", labels[i], labels[j]),
                rho,
                b.min,
                b.max,
                rlo,
                rhi
            );
            pairs.push(json!({
                "i": i,
                "j": j,
                "labels": [labels[i], labels[j]],
                "rho_midrank": rho,
                "min": b.min,
                "max": b.max,
                "correlation_min": rlo,
                "correlation_max": rhi,
                "degenerate": b.degenerate,
            }));
        }
    }
    let prov = provenance("spearman", None, None, data_options(data));
    sink.emit(&prov, json!({ "labels": labels, "pairs": pairs }), || table)
}

// ---------------------------------------------------------------------------

fn zero_mixed_cmd(data: &DataArgs) -> Result<(), Failure> {
    let sink = Sink::open(&data.out)?;
    let series = load(data)?;
    let report = zero_mixed_fit(&series)?;
    let labels = series.labels().to_vec();
    let prov = provenance("zero-mixed", None, None, data_options(data));
    sink.emit(&prov, json!({ "labels": labels, "zero_mixed": report }), || {
        zero_mixed_table(&labels, &report)
    })
}

fn subset_name(labels: &[String], s: &[usize]) -> String {
    if s.is_empty() {
        return "{}".into();
    }
    format!("{{{}}}", s.iter().map(|&i| labels[i].as_str()).collect::<Vec<_>>().join(","))
}

fn zero_mixed_table(labels: &[String], r: &ZeroMixedReport) -> String {
    let mut t = String::new();
    for f in &r.frequencies {
        let _ = writeln!(
            t,
            "{:<36} {:>6} {:>7.3} [{:.3}, {:.3}]",
            subset_name(labels, &f.subset),
            f.count,
            f.probability,
            f.ci.0,
            f.ci.1
        );
    }
    for c in &r.copulas {
        for p in &c.pairs {
            let status = match c.status {
                SubsetFitStatus::Undetermined => "undetermined".to_string(),
                SubsetFitStatus::Fitted => {
                    let (lo, hi) = p.ci.unwrap_or((f64::NAN, f64::NAN));
                    format!(
                        "{:.3} [{lo:.3}, {hi:.3}]{}",
                        p.rho.unwrap_or(f64::NAN),
                        if p.wide { " wide" } else { "" }
                    )
                }
            };
            let _ = writeln!(
                t,
                "copula {} rho({},{}) on {} rows: {}",
                subset_name(labels, &c.subset),
                labels[p.i],
                labels[p.j],
                c.rows,
                status
            );
        }
    }
    let _ = writeln!(t, "parameters: {}", r.parameter_count);
    t
}

// ---------------------------------------------------------------------------

fn bench_cmd(opts: BenchOptions, json_out: bool, out: &crate::OutputArgs) -> Result<(), Failure> {
    if opts.dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::usage("--dims must be strictly increasing"));
    }
    let sink = Sink::open(out)?;
    let report = run_bench(&opts)?;
    if json_out {
        let prov = provenance("bench", Some(opts.seed), None, serde_json::to_value(&opts).expect("options serialize"));
        return sink.emit(&prov, json!({ "bench": report }), || bench_summary(&report));
    }
    let mut csv = String::from("dim,comb_seconds,levy_seconds,levy_status,levy_processes\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.dim,
            r.comb_seconds,
            r.levy_seconds.map_or(String::new(), |v| v.to_string()),
            serde_json::to_value(r.levy_status).expect("status serializes").as_str().unwrap_or(""),
            r.levy_processes.map_or(String::new(), |v| v.to_string())
        );
    }
    sink.write(&csv)?;
    eprint!("{}", bench_summary(&report));
    Ok(())
}

fn bench_summary(r: &BenchReport) -> String {
    let mut t = String::new();
    if let (Some(l), Some(e)) = (r.comb_linear, r.comb_exponential) {
        let _ = writeln!(
            t,
            "copula simulator: linear R² {:.4}, AIC linear {:.2} vs exponential {:.2}: {:?}",
            l.r_squared, l.aic, e.aic, r.comb_growth
        );
    }
    if let (Some(l), Some(e)) = (r.levy_linear, r.levy_exponential) {
        let _ = writeln!(
            t,
            "subset processes: AIC linear {:.2} vs exponential {:.2}: {:?}",
            l.aic, e.aic, r.levy_growth
        );
    }
    for (a, b, ratio) in &r.levy_step_ratios {
        let _ = writeln!(t, "subset processes d={a}->{b}: {ratio:.3} per added dimension");
    }
    t
}

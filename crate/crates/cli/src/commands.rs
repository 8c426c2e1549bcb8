//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use fdmap::channel::{parse_snr_grid, snr_sweep, ChannelKind, ChannelModel, Decoder, DecoderTraining};
use fdmap::divergence::log_grid;
use fdmap::mixture::{mixture_bench, MixtureConfig};
use fdmap::nn::checkpoint;
use fdmap::objectives::SupportBox;
use fdmap::par::{map_indexed, Execution};
use fdmap::posterior::posterior_from_d;
use fdmap::toy::{fit_and_grid, linspace, network_estimate, simpson, ToyFit, ToyKind, ToyTaskConfig};
use fdmap::verify::run_all;
use fdmap::{Divergence, DivergenceSpec, Form};
use ndarray::Array2;
use serde::Serialize;

use crate::config::{config_hash, Arch, ExperimentConfig};
use crate::output::{write_csv, write_json, ResultRecord, Summary};
use crate::{CliError, Common};

fn execution(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Print the resolved settings for `--dry-run`.
fn dry_run<S: Serialize>(command: &str, hash: &str, settings: &S) -> Result<(), CliError> {
    println!("command: {command}");
    println!("config_hash: {hash}");
    println!("{}", serde_json::to_string_pretty(settings)?);
    Ok(())
}

fn reject_unused(fields: &[(&str, bool)]) -> Result<(), CliError> {
    match fields.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(CliError::field(name, "not used by this command")),
        None => Ok(()),
    }
}

pub fn verify(common: &Common, cfg: &ExperimentConfig) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Settings {
        seed: u64,
    }
    let settings = Settings { seed: cfg.seed() };
    let hash = config_hash("verify", &settings)?;
    if common.dry_run {
        return dry_run("verify", &hash, &settings);
    }
    let start = Instant::now();
    let report = run_all(settings.seed);
    let mut records = Vec::new();
    for c in &report.checks {
        println!(
            "{} {:<55} worst {:.3e}  tolerance {:.1e}  ({:.2} s)  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.seconds,
            c.detail
        );
        records.push(ResultRecord {
            experiment: c.name.clone(),
            config_hash: hash.clone(),
            metric: "worst".into(),
            value: c.worst,
            stderr: None,
            wall_clock_s: c.seconds,
            seed: settings.seed,
        });
    }
    let summary = Summary {
        command: "verify".into(),
        config_hash: hash,
        seed: settings.seed,
        wall_clock_s: start.elapsed().as_secs_f64(),
        settings: &report,
        records,
    };
    write_json(&cfg.out_dir().join("verify.json"), &summary)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Verification(failed.join("; ")))
    }
}

fn decoder_training(cfg: &ExperimentConfig, mut training: DecoderTraining) -> Result<DecoderTraining, CliError> {
    cfg.apply_training(&mut training.train)?;
    if let Some(d) = cfg.dropout {
        if !(0.0..1.0).contains(&d) {
            return Err(CliError::field("dropout", format!("must lie in [0, 1), got {d}")));
        }
        training.dropout = d;
    }
    if let Some(h) = &cfg.hidden {
        if h.is_empty() || h.contains(&0) {
            return Err(CliError::field("hidden", "need at least one layer of positive width"));
        }
        training.hidden = h.clone();
    }
    Ok(training)
}

pub fn decode_sweep(common: &Common, cfg: &ExperimentConfig) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Settings {
        channel: ChannelModel,
        decoders: Vec<Decoder>,
        snr_db: Vec<f64>,
        n_symbols: usize,
        seed: u64,
        training: DecoderTraining,
    }
    cfg.require_arch(Arch::Supervised)?;
    reject_unused(
        &[
            ("task", cfg.task.is_some()),
            ("n_train", cfg.n_train.is_some()),
            ("n_test", cfg.n_test.is_some()),
            ("tx_measure", cfg.tx_measure.is_some()),
            ("support_box", cfg.support_box.is_some()),
            ("normalize", cfg.normalize.is_some()),
        ],
    )?;
    let kind: ChannelKind = cfg.channel.as_deref().unwrap_or("pam4").parse()?;
    let mut decoders = vec![Decoder::MapGenie, Decoder::MaxL];
    let names = cfg.divergence.as_ref().map(|l| l.names()).unwrap_or_else(|| vec!["sl".into()]);
    for name in names {
        let dec: Decoder = name
            .parse()
            .map_err(|_| CliError::field("divergence", format!("unknown divergence or decoder `{name}` (expected kl, rkl, hd, gan, p, sl, ce)")))?;
        if !decoders.contains(&dec) {
            decoders.push(dec);
        }
    }
    let n_symbols = cfg.n.unwrap_or(1_000_000);
    if n_symbols == 0 {
        return Err(CliError::field("n", "must be positive"));
    }
    let settings = Settings {
        channel: ChannelModel::new(kind, 0.0)?,
        decoders,
        snr_db: parse_snr_grid(cfg.snr.as_deref().unwrap_or("0:2:16"))?,
        n_symbols,
        seed: cfg.seed(),
        training: decoder_training(cfg, DecoderTraining::default())?,
    };
    let hash = config_hash("decode-sweep", &settings)?;
    if common.dry_run {
        return dry_run("decode-sweep", &hash, &settings);
    }
    let start = Instant::now();
    let curve = snr_sweep(
        &settings.channel,
        &settings.decoders,
        &settings.snr_db,
        settings.n_symbols,
        settings.seed,
        &settings.training,
        execution(common),
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    let rows = curve.rows();
    let out = cfg.out_dir();
    write_csv(&out.join("decode-sweep.csv"), &rows)?;
    let records = rows
        .iter()
        .map(|r| ResultRecord {
            experiment: format!("{}@{}dB/{}", curve.channel, r.snr_db, r.decoder),
            config_hash: hash.clone(),
            metric: "ser".into(),
            value: r.ser,
            stderr: Some(r.stderr),
            wall_clock_s: elapsed,
            seed: r.seed,
        })
        .collect();
    for r in &rows {
        println!("{:>6.1} dB  {:<10} SER {:.5} +- {:.5}", r.snr_db, r.decoder, r.ser, 2.0 * r.stderr);
    }
    let summary = Summary {
        command: "decode-sweep".into(),
        config_hash: hash,
        seed: settings.seed,
        wall_clock_s: elapsed,
        settings: &settings,
        records,
    };
    write_json(&out.join("decode-sweep.json"), &summary)?;
    println!("wrote {}", out.join("decode-sweep.csv").display());
    Ok(())
}

fn toy_config(cfg: &ExperimentConfig) -> Result<ToyTaskConfig, CliError> {
    let kind = match cfg.task.as_deref().unwrap_or("exp") {
        "exp" => ToyKind::Exponential { lambda: 1.0 },
        "gauss" => ToyKind::Gaussian { sigma_x: 1.0, sigma_n: 1.0 },
        other => return Err(CliError::field("task", format!("unknown task `{other}` (expected exp or gauss)"))),
    };
    let mut config = ToyTaskConfig::new(kind, cfg.seed())?;
    match (cfg.support_box, cfg.tx_measure) {
        (Some([lo, hi]), tx) => {
            config.support = SupportBox::interval(lo, hi)
                .map_err(|e| CliError::field("support_box", e.to_string()))?;
            if let Some(t) = tx {
                if (t - (hi - lo)).abs() > 1e-9 * t.abs().max(1.0) {
                    return Err(CliError::field("tx_measure", format!("{t} disagrees with support_box width {}", hi - lo)));
                }
            }
        }
        (None, Some(t)) => {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::field("tx_measure", format!("must be positive, got {t}")));
            }
            let lo = config.support.lo[0];
            config.support = SupportBox::interval(lo, lo + t)?;
        }
        (None, None) => {}
    }
    if let Some(n) = cfg.n_train {
        config.n_train = n;
    }
    if let Some(h) = &cfg.hidden {
        if h.is_empty() || h.contains(&0) {
            return Err(CliError::field("hidden", "need at least one layer of positive width"));
        }
        config.hidden = h.clone();
    }
    if cfg.dropout.is_some_and(|d| d != 0.0) {
        return Err(CliError::field("dropout", "toy estimators are trained without dropout"));
    }
    cfg.apply_training(&mut config.train)?;
    config.validate()?;
    Ok(config)
}

/// Each row of the grid divided by the estimate's integral over the
/// support box at that `y`.
fn normalized_grid(fit: &ToyFit, config: &ToyTaskConfig, kind: Divergence) -> Result<Array2<f64>, CliError> {
    const INTERVALS: usize = 1000;
    let (lo, hi) = (config.support.lo[0], config.support.hi[0]);
    let xs = linspace(lo, hi, INTERVALS + 1);
    let mut out = fit.grid.estimate.clone();
    for (j, &y) in fit.grid.y_axis.iter().enumerate() {
        let inputs = Array2::from_shape_fn((xs.len(), 2), |(i, c)| if c == 0 { xs[i] } else { y });
        let values = network_estimate(&fit.net, kind, &inputs)?;
        let h = (hi - lo) / INTERVALS as f64;
        let z = simpson(|x| values[((x - lo) / h).round() as usize], lo, hi, INTERVALS);
        if !(z > 0.0) {
            return Err(CliError::Core(fdmap::Error::Training(format!("posterior estimate at y = {y} integrates to {z}"))));
        }
        out.row_mut(j).mapv_inplace(|v| v / z);
    }
    Ok(out)
}

pub fn toy(common: &Common, cfg: &ExperimentConfig, checkpoint_dir: Option<&Path>) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Settings {
        task: ToyTaskConfig,
        divergences: Vec<Divergence>,
        normalize: bool,
    }
    cfg.require_arch(Arch::Unsupervised)?;
    reject_unused(
        &[("channel", cfg.channel.is_some()), ("snr", cfg.snr.is_some()), ("n", cfg.n.is_some()), ("n_test", cfg.n_test.is_some())],
    )?;
    let settings = Settings {
        task: toy_config(cfg)?,
        divergences: cfg.divergences(&[Divergence::Sl])?,
        normalize: cfg.normalize.unwrap_or(false),
    };
    let hash = config_hash("toy", &settings)?;
    if common.dry_run {
        return dry_run("toy", &hash, &settings);
    }
    let start = Instant::now();
    let task = &settings.task;
    let fits = map_indexed(execution(common), settings.divergences.len(), |i| {
        let t0 = Instant::now();
        fit_and_grid(task, settings.divergences[i]).map(|f| (f, t0.elapsed().as_secs_f64()))
    });
    let out = cfg.out_dir();
    let name = task.kind.name();
    let mut records = Vec::new();
    for (&kind, fit) in settings.divergences.iter().zip(fits) {
        let (fit, seconds) = fit?;
        let experiment = format!("toy-{name}-{kind}");
        let record = |metric: &str, value: f64| ResultRecord {
            experiment: experiment.clone(),
            config_hash: hash.clone(),
            metric: metric.into(),
            value,
            stderr: None,
            wall_clock_s: seconds,
            seed: task.seed,
        };
        records.push(record("mse", fit.grid.mse));
        records.push(record("final_loss", fit.report.final_loss()));
        let mut grid = fit.grid.clone();
        if settings.normalize {
            grid.estimate = normalized_grid(&fit, task, kind)?;
            grid.mse = fdmap::toy::grid_mse(&grid.estimate, &grid.oracle, &grid.mask)?;
            records.push(record("mse_normalized", grid.mse));
        }
        write_csv(&out.join(format!("{experiment}.csv")), &grid.rows())?;
        if let Some(dir) = checkpoint_dir {
            crate::output::write_atomic(&dir.join(format!("{experiment}.net")), checkpoint::to_text(&fit.net).as_bytes())?;
        }
        println!("{experiment}: grid MSE {:.5} ({seconds:.1} s)", fit.grid.mse);
    }
    let summary = Summary {
        command: "toy".into(),
        config_hash: hash,
        seed: task.seed,
        wall_clock_s: start.elapsed().as_secs_f64(),
        settings: &settings,
        records,
    };
    write_json(&out.join(format!("toy-{name}.json")), &summary)?;
    Ok(())
}

pub fn mixture(common: &Common, cfg: &ExperimentConfig, posterior_points: usize) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Settings {
        mixture: MixtureConfig,
        divergences: Vec<Divergence>,
        normalize: bool,
    }
    #[derive(Serialize)]
    struct AccuracyRow {
        divergence: String,
        accuracy: f64,
        bayes_accuracy: f64,
        gap_to_bayes: f64,
        n_test: usize,
        seed: u64,
    }
    #[derive(Serialize)]
    struct PosteriorRow {
        divergence: String,
        index: usize,
        class: usize,
        estimate: f64,
        exact: f64,
    }
    cfg.require_arch(Arch::Supervised)?;
    reject_unused(
        &[
            ("channel", cfg.channel.is_some()),
            ("snr", cfg.snr.is_some()),
            ("n", cfg.n.is_some()),
            ("task", cfg.task.is_some()),
            ("n_train", cfg.n_train.is_some()),
            ("tx_measure", cfg.tx_measure.is_some()),
            ("support_box", cfg.support_box.is_some()),
        ],
    )?;
    let mut mixture = MixtureConfig::new(cfg.seed());
    if let Some(n) = cfg.n_test {
        if n == 0 {
            return Err(CliError::field("n_test", "must be positive"));
        }
        mixture.n_test = n;
    }
    mixture.posterior_points = posterior_points;
    mixture.training = decoder_training(cfg, mixture.training)?;
    let settings = Settings { mixture, divergences: cfg.divergences(&Divergence::ALL)?, normalize: cfg.normalize.unwrap_or(false) };
    let hash = config_hash("mixture-bench", &settings)?;
    if common.dry_run {
        return dry_run("mixture-bench", &hash, &settings);
    }
    let start = Instant::now();
    let report = mixture_bench(&settings.mixture, &settings.divergences, execution(common))?;
    let elapsed = start.elapsed().as_secs_f64();
    let seed = report.seed;
    let rows: Vec<AccuracyRow> = report
        .entries
        .iter()
        .map(|e| AccuracyRow {
            divergence: e.divergence.clone(),
            accuracy: e.accuracy,
            bayes_accuracy: report.bayes_test_accuracy,
            gap_to_bayes: e.gap_to_bayes,
            n_test: report.n_test,
            seed,
        })
        .collect();
    let out = cfg.out_dir();
    write_csv(&out.join("mixture-bench.csv"), &rows)?;
    println!("Bayes rate {:.4}, Bayes test accuracy {:.4}", report.bayes_rate, report.bayes_test_accuracy);
    let mut records = vec![ResultRecord {
        experiment: "bayes".into(),
        config_hash: hash.clone(),
        metric: "bayes_rate".into(),
        value: report.bayes_rate,
        stderr: None,
        wall_clock_s: elapsed,
        seed,
    }];
    for r in &rows {
        println!("{:<4} accuracy {:.4} (gap {:+.4})", r.divergence, r.accuracy, r.gap_to_bayes);
        let acc_stderr = (r.accuracy * (1.0 - r.accuracy) / r.n_test as f64).sqrt();
        records.push(ResultRecord {
            experiment: format!("mixture-{}", r.divergence),
            config_hash: hash.clone(),
            metric: "accuracy".into(),
            value: r.accuracy,
            stderr: Some(acc_stderr),
            wall_clock_s: elapsed,
            seed,
        });
    }
    if posterior_points > 0 {
        let mut prow = Vec::new();
        for e in &report.entries {
            for (index, (est, exact)) in e.posteriors.iter().zip(&report.bayes_posteriors).enumerate() {
                let total: f64 = est.iter().sum();
                for (class, (&v, &x)) in est.iter().zip(exact).enumerate() {
                    let estimate = if settings.normalize { v / total } else { v };
                    prow.push(PosteriorRow { divergence: e.divergence.clone(), index, class, estimate, exact: x });
                }
            }
        }
        write_csv(&out.join("mixture-posteriors.csv"), &prow)?;
    }
    let summary = Summary {
        command: "mixture-bench".into(),
        config_hash: hash,
        seed,
        wall_clock_s: elapsed,
        settings: &settings,
        records,
    };
    write_json(&out.join("mixture-bench.json"), &summary)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow {
    divergence: &'static str,
    form: &'static str,
    quantity: &'static str,
    arg: f64,
    value: f64,
}

/// Generators, conjugates (at `t = f'(u)`), `r(D)`, the optimal `D` for a
/// posterior density, and the posterior recovered from `D`.
fn report_rows(kind: Divergence, tx_measure: f64, points: usize) -> Result<Vec<ReportRow>, CliError> {
    let spec = DivergenceSpec::new(kind, tx_measure).map_err(|e| CliError::field("tx_measure", e.to_string()))?;
    let mut rows = Vec::new();
    let mut push = |form, quantity, arg, value| rows.push(ReportRow { divergence: kind.name(), form, quantity, arg, value });
    for (form, label, scale) in [(Form::Supervised, "supervised", 1.0), (Form::Unsupervised, "unsupervised", tx_measure)] {
        push(label, "constant_term", scale, spec.constant_term(form));
        for u in log_grid(0.05 * scale, 20.0 * scale, points) {
            push(label, "f", u, spec.f(u, form)?);
        }
        for u in log_grid(0.05 * scale, 20.0 * scale, points) {
            let t = spec.f_prime(u, form)?;
            push(label, "f_star", t, spec.f_star(t, form)?);
        }
    }
    let d_grid = match kind.d_domain().hi {
        hi if hi.is_finite() => linspace(0.02, 0.98, points),
        _ => log_grid(0.05, 20.0, points),
    };
    for &d in &d_grid {
        push("supervised", "r", d, spec.r(d)?);
    }
    for &d in &d_grid {
        push("supervised", "posterior_from_d", d, posterior_from_d(kind, d)?);
    }
    for p in log_grid(0.05, 20.0, points) {
        push("supervised", "optimal_d", p, spec.optimal_d(p)?);
    }
    Ok(rows)
}

pub fn divergence_report(common: &Common, cfg: &ExperimentConfig, points: usize) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Settings {
        divergences: Vec<Divergence>,
        tx_measure: f64,
        points: usize,
    }
    if points < 2 {
        return Err(CliError::field("points", "need at least two grid points"));
    }
    let settings = Settings {
        divergences: cfg.divergences(&Divergence::ALL)?,
        tx_measure: cfg.tx_measure.unwrap_or(1.0),
        points,
    };
    let hash = config_hash("divergence-report", &settings)?;
    if common.dry_run {
        return dry_run("divergence-report", &hash, &settings);
    }
    let mut rows = Vec::new();
    for &kind in &settings.divergences {
        rows.extend(report_rows(kind, settings.tx_measure, points)?);
    }
    let path = cfg.out_dir().join("divergence-report.csv");
    write_csv(&path, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_rows_are_finite() {
        for kind in Divergence::ALL {
            let rows = report_rows(kind, 2.5, 9).unwrap();
            assert!(rows.iter().all(|r| r.value.is_finite()), "{kind}");
            let k = rows.iter().find(|r| r.quantity == "constant_term" && r.form == "unsupervised").unwrap();
            let spec = DivergenceSpec::new(kind, 2.5).unwrap();
            let diff = spec.f(2.5, Form::Unsupervised).unwrap() - spec.f_raw(2.5, Form::Unsupervised).unwrap();
            assert!((diff - k.value).abs() < 1e-12);
        }
    }
}

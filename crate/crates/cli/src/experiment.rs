use std::fs::File;
use std::path::Path;

use gscreen::model::QRule;
use gscreen_simlab::experiment::{MethodSummary, RepOutcome};
use gscreen_simlab::misspec::Misspecification;
use gscreen_simlab::noise::NoiseKind;
use gscreen_simlab::signal::SignalLaw;
use gscreen_simlab::{preset, run_experiment, ExperimentConfig, HammingReport, Method, Scale, Setting};
use serde::Serialize;

use crate::args::{ExperimentArgs, MethodArg, QRuleArg};
use crate::output::{ensure_dir, write_csv, write_json, Header, Sink};
use crate::{resolve_seed, CliError};

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let file = File::open(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Gs => Method::Gs,
        MethodArg::Ups => Method::Ups,
        MethodArg::Lasso => Method::Lasso,
    }
}

/// The preset or config file with the command-line overrides applied.
fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&args.id, &args.config) {
        (Some(id), None) => {
            let scale = if args.reduced { Scale::Reduced } else { Scale::Full };
            preset(id, scale)?
        }
        (None, Some(path)) => read_config(path)?,
        _ => return Err(CliError::Usage("give an experiment id or --config".into())),
    };
    if let Some(p) = args.p {
        config.p = p;
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    if args.seed.seed.is_some() || std::env::var_os(crate::SEED_ENV).is_some() {
        config.seed = resolve_seed(&args.seed)?;
    }
    if !args.method.is_empty() {
        let mut methods: Vec<Method> = args.method.iter().copied().map(method).collect();
        methods.dedup();
        config.methods = methods;
    }
    let t = &args.tuning;
    if let Some(m0) = t.m0 {
        config.gs.m0 = m0;
    }
    if let Some(q0) = t.q0 {
        config.gs.q0 = q0;
    }
    if let Some(k) = t.iterations {
        config.gs.iterations = k;
    }
    match t.q_rule {
        Some(QRuleArg::Max) => config.gs.q_rule = QRule::Max,
        Some(QRuleArg::Conservative) => config.gs.q_rule = QRule::Conservative,
        Some(QRuleArg::Fixed) => {
            return Err(CliError::Usage(
                "experiments derive q per setting; a fixed rule is available only through --config".into(),
            ))
        }
        None => {}
    }
    config.validate()?;
    Ok(config)
}

fn law_name(law: SignalLaw) -> &'static str {
    match law {
        SignalLaw::IidEqual { random_signs: false } => "equal",
        SignalLaw::IidEqual { random_signs: true } => "equal_signed",
        SignalLaw::IidMixture => "mixture",
        SignalLaw::BlockPairs => "pairs",
        SignalLaw::BlockQuads => "quads",
    }
}

/// One point of a curve: which series it belongs to and where it sits on the x axis.
struct CurvePoint {
    series: String,
    x_name: &'static str,
    x: f64,
}

/// The varied knob of each setting; settings sharing every other knob form one series.
fn curve_points(config: &ExperimentConfig, index: usize, s: &Setting) -> Vec<CurvePoint> {
    let cell = format!("vartheta={},tau={:.4}", s.vartheta, s.tau);
    let point = |series: String, x_name, x| CurvePoint { series, x_name, x };
    let id = config.id.as_str();
    match id {
        "1" | "3" | "4a" | "4b" | "4c" => {
            let series = if id == "3" {
                format!("vartheta={},law={}", s.vartheta, law_name(s.law))
            } else {
                format!("vartheta={}", s.vartheta)
            };
            vec![point(series, "tau", s.tau)]
        }
        "2a" | "2b" => vec![point(cell, "eta", s.eta.unwrap_or(0.0))],
        "5a" => vec![point(cell, "q_multiplier", s.q_multiplier)],
        "5b" => vec![point(cell, "vartheta_ratio", s.vartheta_ratio)],
        "5c" => vec![point(cell, "r_ratio", s.r_ratio)],
        "5d" => {
            // The unperturbed setting sits on both curves.
            let mut v = Vec::new();
            if s.r_ratio == 1.0 {
                v.push(point(format!("{cell},curve=vartheta_ratio"), "vartheta_ratio", s.vartheta_ratio));
            }
            if s.vartheta_ratio == 1.0 {
                v.push(point(format!("{cell},curve=r_ratio"), "r_ratio", s.r_ratio));
            }
            v
        }
        "6a" => match s.noise {
            NoiseKind::ScaledT { df } => vec![point(cell, "df", df)],
            NoiseKind::Gaussian => vec![point(cell, "df", f64::INFINITY)],
        },
        "6b" | "6c" => {
            let name = match s.misspecification {
                Misspecification::Nonlinear { .. } => "nonlinear_eta",
                _ => "missing_eta",
            };
            vec![point(cell, name, s.misspecification.eta().unwrap_or(0.0))]
        }
        _ => vec![point("all".into(), "setting", index as f64)],
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn noise_label(n: NoiseKind) -> String {
    match n {
        NoiseKind::Gaussian => "gaussian".into(),
        NoiseKind::ScaledT { df } => format!("t{df}"),
    }
}

fn misspec_label(m: Misspecification) -> String {
    match m {
        Misspecification::None => "none".into(),
        Misspecification::MissingPredictors { eta } => format!("missing:{eta}"),
        Misspecification::Nonlinear { eta } => format!("nonlinear:{eta}"),
    }
}

fn write_summary_csv(dir: &Path, header: &Header, report: &HammingReport) -> Result<(), CliError> {
    write_csv(&Sink::in_dir(Some(dir), "summary.csv"), header, |w| {
        w.write_record([
            "setting",
            "method",
            "vartheta",
            "tau",
            "law",
            "eta",
            "noise",
            "misspecification",
            "q_multiplier",
            "vartheta_ratio",
            "r_ratio",
            "mean_hamming",
            "sd_hamming",
            "se_hamming",
            "mean_ratio",
            "sd_ratio",
            "completed",
            "failed",
        ])?;
        for m in &report.summaries {
            let s: &Setting = &report.config.settings[m.setting];
            w.write_record([
                m.setting.to_string(),
                m.method.as_str().to_string(),
                s.vartheta.to_string(),
                s.tau.to_string(),
                law_name(s.law).to_string(),
                opt(s.eta),
                noise_label(s.noise),
                misspec_label(s.misspecification),
                s.q_multiplier.to_string(),
                s.vartheta_ratio.to_string(),
                s.r_ratio.to_string(),
                m.mean_distance.to_string(),
                m.sd_distance.to_string(),
                m.se_distance().to_string(),
                m.mean_ratio.to_string(),
                m.sd_ratio.to_string(),
                m.completed.to_string(),
                m.failed.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn write_outcomes_csv(dir: &Path, header: &Header, outcomes: &[RepOutcome]) -> Result<(), CliError> {
    write_csv(&Sink::in_dir(Some(dir), "outcomes.csv"), header, |w| {
        w.write_record([
            "setting",
            "rep",
            "method",
            "hamming",
            "ratio",
            "signals",
            "screen_misses",
            "max_component",
            "lambda",
            "error",
        ])?;
        for o in outcomes {
            w.write_record([
                o.setting.to_string(),
                o.rep.to_string(),
                o.method.as_str().to_string(),
                opt(o.distance),
                opt(o.ratio),
                o.signals.to_string(),
                opt(o.screen_misses),
                opt(o.max_component),
                opt(o.lambda),
                o.error.clone().unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

fn write_curves_csv(dir: &Path, header: &Header, report: &HammingReport) -> Result<(), CliError> {
    let mut rows: Vec<(CurvePoint, &MethodSummary)> = Vec::new();
    for m in &report.summaries {
        let s = &report.config.settings[m.setting];
        rows.extend(curve_points(&report.config, m.setting, s).into_iter().map(|pt| (pt, m)));
    }
    rows.sort_by(|(a, ma), (b, mb)| {
        (a.series.as_str(), ma.method)
            .cmp(&(b.series.as_str(), mb.method))
            .then(a.x.total_cmp(&b.x))
    });
    // The 5d grids repeat the unperturbed setting; keep one point per (series, method, x).
    rows.dedup_by(|(a, ma), (b, mb)| a.series == b.series && ma.method == mb.method && a.x == b.x);
    write_csv(&Sink::in_dir(Some(dir), "curves.csv"), header, |w| {
        w.write_record(["series", "x_name", "x", "method", "mean_ratio", "sd_ratio", "completed"])?;
        for (pt, m) in &rows {
            w.write_record([
                pt.series.clone(),
                pt.x_name.to_string(),
                pt.x.to_string(),
                m.method.as_str().to_string(),
                m.mean_ratio.to_string(),
                m.sd_ratio.to_string(),
                m.completed.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    summaries: &'a [MethodSummary],
    failed_reps: usize,
}

pub(crate) fn run(args: &ExperimentArgs) -> Result<(), CliError> {
    let config = resolve_config(args)?;
    let header = Header::new(&config, config.seed)?;
    ensure_dir(&args.output_dir)?;
    write_json(&args.output_dir.join("config.json"), &header, &config)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start the worker pool: {e}")))?;
    log::info!(
        "experiment {}: {} settings x {} methods x {} reps",
        config.id,
        config.settings.len(),
        config.methods.len(),
        config.reps
    );
    let report = pool.install(|| run_experiment(&config))?;

    let dir = args.output_dir.as_path();
    write_summary_csv(dir, &header, &report)?;
    write_outcomes_csv(dir, &header, &report.outcomes)?;
    write_curves_csv(dir, &header, &report)?;
    let failed_reps = report.outcomes.iter().filter(|o| o.error.is_some()).count();
    if failed_reps > 0 {
        log::warn!("{failed_reps} method runs aborted; see the error column of outcomes.csv");
    }
    write_json(
        &dir.join("summary.json"),
        &header,
        &SummaryFile {
            config: &report.config,
            summaries: &report.summaries,
            failed_reps,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensitivity_curves_keep_the_cell_fixed() {
        let config = preset("5d", Scale::Reduced).unwrap();
        let mut points: Vec<(String, u64)> = config
            .settings
            .iter()
            .enumerate()
            .flat_map(|(i, s)| curve_points(&config, i, s))
            .map(|p| (p.series, p.x.to_bits()))
            .collect();
        points.sort();
        points.dedup();
        // Two cells, each with a six-point ϑ curve and a six-point r curve.
        assert_eq!(points.len(), 24);
        let series: std::collections::BTreeSet<&str> = points.iter().map(|p| p.0.as_str()).collect();
        assert_eq!(series.len(), 4);
        for name in series {
            assert_eq!(points.iter().filter(|p| p.0 == name).count(), 6);
        }
    }

    #[test]
    fn tau_curves_group_by_sparsity() {
        let config = preset("1", Scale::Reduced).unwrap();
        let pts: Vec<CurvePoint> =
            config.settings.iter().enumerate().flat_map(|(i, s)| curve_points(&config, i, s)).collect();
        assert!(pts.iter().all(|p| p.x_name == "tau"));
        assert_eq!(pts.iter().filter(|p| p.series == "vartheta=0.25").count(), 5);
    }
}

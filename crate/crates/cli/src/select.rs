use gscreen::baselines::{lasso_cd, FitStatus, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use gscreen::io::read_design_file;
use gscreen::model::{ArwParams, DesignData, QRule, TuningParams};
use gscreen_simlab::design::random_design_tol;
use gscreen::selector::{Diagnostics, InitialEstimate, PreparedDesign};
use nalgebra::DVector;
use serde::Serialize;

use crate::args::{MethodArg, QRuleArg, SelectArgs, TuningArgs};
use crate::output::{ensure_dir, file_digest, write_csv, write_json, Header, Sink};
use crate::{resolve_seed, CliError};

/// Everything that determines the output of `select`; its hash goes into the headers.
#[derive(Debug, Serialize)]
struct SelectRecord {
    input_sha256: String,
    method: &'static str,
    sigma: f64,
    normalize: bool,
    params: ArwParams,
    tuning: TuningParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum MethodDiagnostics {
    Screening(Box<Diagnostics>),
    Lasso { lambda: f64, status: FitStatus },
}

#[derive(Debug, Serialize)]
struct DiagnosticsFile<'a> {
    method: &'static str,
    n: usize,
    p: usize,
    selected_count: usize,
    config: &'a SelectRecord,
    diagnostics: MethodDiagnostics,
}

pub(crate) fn apply_tuning_overrides(
    tuning: &mut TuningParams,
    args: &TuningArgs,
    fixed_q: Option<f64>,
) -> Result<(), CliError> {
    if let Some(m0) = args.m0 {
        tuning.m0 = m0;
    }
    if let Some(q0) = args.q0 {
        tuning.q0 = q0;
    }
    if let Some(k) = args.iterations {
        tuning.max_iterations = k;
    }
    tuning.q_rule = match (args.q_rule, fixed_q) {
        (None | Some(QRuleArg::Fixed), Some(q)) => QRule::Fixed(q),
        (Some(QRuleArg::Fixed), None) => {
            return Err(CliError::Usage("--q-rule fixed needs --q".into()));
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--q sets a fixed rule; drop --q-rule or use --q-rule fixed".into()));
        }
        (Some(QRuleArg::Max), None) => QRule::Max,
        (Some(QRuleArg::Conservative), None) => QRule::Conservative,
        (None, None) => tuning.q_rule,
    };
    Ok(())
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Gs => "gs",
        MethodArg::Ups => "ups",
        MethodArg::Lasso => "lasso",
    }
}

/// (ϑ, r) from the flags, or the pair implied by u = σ√(2ϑ ln p) and v = σ√(2r ln p).
fn arw_params(args: &SelectArgs, sigma: f64, p: usize) -> Result<ArwParams, CliError> {
    let two_log = 2.0 * (p as f64).ln() * sigma * sigma;
    let params = match (args.theta, args.r, args.u, args.v) {
        (Some(theta), Some(r), _, _) => ArwParams::new(theta, r, p)?,
        (None, None, Some(u), Some(v)) => ArwParams::new(u * u / two_log, v * v / two_log, p)?,
        _ => {
            return Err(CliError::Usage(
                "supply --theta and --r, or --u and --v (with --q for a fixed screening constant)".into(),
            ))
        }
    };
    Ok(params)
}

pub(crate) fn run(args: &SelectArgs) -> Result<(), CliError> {
    let sigma = args
        .sigma
        .ok_or_else(|| CliError::Usage("missing --sigma: the noise level is required".into()))?;
    let seed = resolve_seed(&args.seed)?;
    let (x, y) = read_design_file(&args.input)?;
    let design = if args.normalize {
        DesignData::renormalized(x, y, sigma)?
    } else {
        let tol = random_design_tol(x.nrows());
        DesignData::new(x, y, sigma, tol)?
    };
    let p = design.p();
    let params = arw_params(args, sigma, p)?;
    let mut tuning = TuningParams::from_arw(&params, sigma);
    if let Some(u) = args.u {
        tuning.u_gs = u;
    }
    if let Some(v) = args.v {
        tuning.v_gs = v;
    }
    if let Some(delta) = args.delta {
        tuning.delta = delta;
    }
    if let Some(cap) = args.component_cap {
        tuning.component_cap = cap;
    }
    apply_tuning_overrides(&mut tuning, &args.tuning, args.q)?;
    if args.method == MethodArg::Ups {
        tuning.m0 = 1;
    }
    tuning.validate()?;
    let lambda = (args.method == MethodArg::Lasso)
        .then(|| args.lambda.unwrap_or(sigma * (2.0 * (p as f64).ln()).sqrt()));
    if let Some(l) = lambda {
        if !(l.is_finite() && l >= 0.0) {
            return Err(CliError::Usage(format!("--lambda must be a finite value >= 0, got {l}")));
        }
    }

    let record = SelectRecord {
        input_sha256: file_digest(&args.input)?,
        method: method_name(args.method),
        sigma,
        normalize: args.normalize,
        params,
        tuning: tuning.clone(),
        lambda,
    };
    let header = Header::new(&record, seed)?;

    let (beta_hat, diagnostics): (DVector<f64>, MethodDiagnostics) = match (args.method, lambda) {
        (MethodArg::Lasso, Some(lambda)) => {
            let path = lasso_cd(&design, &[lambda], DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
            (
                path.coefficients[0].clone(),
                MethodDiagnostics::Lasso {
                    lambda,
                    status: path.status[0],
                },
            )
        }
        _ => {
            let prepared = PreparedDesign::new(&design, tuning.delta)?;
            let result = if tuning.max_iterations > 1 {
                prepared.iterative_gs(&params, &tuning, InitialEstimate::default())?
            } else {
                prepared.graphlet_screening(&params, &tuning)?
            };
            (result.beta_hat, MethodDiagnostics::Screening(Box::new(result.diagnostics)))
        }
    };
    let selected: Vec<usize> = (0..p).filter(|&j| beta_hat[j] != 0.0).collect();

    ensure_dir(&args.output_dir)?;
    let dir = Some(args.output_dir.as_path());
    write_csv(&Sink::in_dir(dir, "beta_hat.csv"), &header, |w| {
        w.write_record(["index", "beta_hat"])?;
        for (j, b) in beta_hat.iter().enumerate() {
            w.write_record([(j + 1).to_string(), b.to_string()])?;
        }
        Ok(())
    })?;
    write_csv(&Sink::in_dir(dir, "selected.csv"), &header, |w| {
        w.write_record(["index"])?;
        for j in &selected {
            w.write_record([(j + 1).to_string()])?;
        }
        Ok(())
    })?;
    write_json(
        &args.output_dir.join("diagnostics.json"),
        &header,
        &DiagnosticsFile {
            method: record.method,
            n: design.n(),
            p,
            selected_count: selected.len(),
            config: &record,
            diagnostics,
        },
    )?;
    log::info!("selected {} of {p} predictors", selected.len());
    Ok(())
}

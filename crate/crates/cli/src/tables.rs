use std::fs::File;

use gscreen::exponents::{phase_boundary, rho_block, CrossingKind, ExponentMethod};
use gscreen::io::write_matrix_csv;
use gscreen_simlab::omega::{gen_omega, OmegaKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{ExponentArgs, ExponentMethodArg, OmegaArgs, OmegaKindArg, PhaseArgs};
use crate::output::{ensure_dir, write_csv, Header, Sink};
use crate::{resolve_seed, CliError};

/// The (ϑ, r, h0) columns of the standard exponent table.
pub const TABLE1_TRIPLES: [(f64, f64, f64); 8] = [
    (0.1, 11.0, 0.8),
    (0.3, 9.0, 0.8),
    (0.5, 4.0, 0.8),
    (0.1, 4.0, 0.4),
    (0.3, 4.0, 0.4),
    (0.5, 4.0, 0.4),
    (0.1, 3.0, 0.2),
    (0.3, 3.0, 0.2),
];

fn parse_triple(text: &str) -> Result<(f64, f64, f64), CliError> {
    let bad = || CliError::Usage(format!("--triple expects theta,r,h0; got {text:?}"));
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match parts.as_slice() {
        [t, r, h] => Ok((*t, *r, *h)),
        _ => Err(bad()),
    }
}

fn read_triples(path: &std::path::Path) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let file = File::open(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{} has no {name:?} column", path.display())))
    };
    let (ct, cr, ch) = (column("theta")?, column("r")?, column("h0")?);
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| -> Result<f64, CliError> {
            record.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| {
                CliError::Usage(format!("{}: row {} has a non-numeric field", path.display(), line + 1))
            })
        };
        out.push((field(ct)?, field(cr)?, field(ch)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ExponentRecord<'a> {
    command: &'static str,
    triples: &'a [(f64, f64, f64)],
}

pub(crate) fn exponents(args: &ExponentArgs) -> Result<(), CliError> {
    let seed = resolve_seed(&args.seed)?;
    let mut triples = Vec::new();
    if args.table1 {
        triples.extend_from_slice(&TABLE1_TRIPLES);
    }
    for t in &args.triple {
        triples.push(parse_triple(t)?);
    }
    if let Some(path) = &args.input {
        triples.extend(read_triples(path)?);
    }
    if triples.is_empty() {
        return Err(CliError::Usage("give --table1, --triple or --input".into()));
    }
    let mut rows = Vec::with_capacity(triples.len());
    for &(theta, r, h0) in &triples {
        let methods = [ExponentMethod::Gs, ExponentMethod::Ss, ExponentMethod::Lasso];
        let reports = methods
            .iter()
            .map(|&m| rho_block(m, theta, r, h0))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((theta, r, h0, reports));
    }
    let header = Header::new(&ExponentRecord { command: "exponents", triples: &triples }, seed)?;
    if let Some(dir) = &args.output_dir {
        ensure_dir(dir)?;
    }
    write_csv(&Sink::in_dir(args.output_dir.as_deref(), "exponents.csv"), &header, |w| {
        w.write_record([
            "theta", "r", "h0", "rho_gs", "rho_ss", "rho_lasso", "branch_gs", "branch_ss", "branch_lasso",
        ])?;
        for (theta, r, h0, reports) in &rows {
            let mut record = vec![theta.to_string(), r.to_string(), h0.to_string()];
            record.extend(reports.iter().map(|rep| format!("{:.6}", rep.value)));
            record.extend(reports.iter().map(|rep| rep.branch.to_string()));
            w.write_record(&record)?;
        }
        Ok(())
    })
}

fn exponent_method(m: ExponentMethodArg) -> ExponentMethod {
    match m {
        ExponentMethodArg::Gs => ExponentMethod::Gs,
        ExponentMethodArg::Ss => ExponentMethod::Ss,
        ExponentMethodArg::Lasso => ExponentMethod::Lasso,
        ExponentMethodArg::Universal => ExponentMethod::Universal,
    }
}

#[derive(Serialize)]
struct PhaseRecord {
    command: &'static str,
    method: ExponentMethod,
    h0: f64,
    points: usize,
}

pub(crate) fn phase(args: &PhaseArgs) -> Result<(), CliError> {
    let seed = resolve_seed(&args.seed)?;
    if args.points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    let method = exponent_method(args.method);
    let grid: Vec<f64> = (1..=args.points).map(|i| i as f64 / (args.points + 1) as f64).collect();
    let boundary = phase_boundary(method, args.h0, &grid)?;
    let header = Header::new(
        &PhaseRecord {
            command: "phase",
            method,
            h0: args.h0,
            points: args.points,
        },
        seed,
    )?;
    if let Some(dir) = &args.output_dir {
        ensure_dir(dir)?;
    }
    write_csv(&Sink::in_dir(args.output_dir.as_deref(), "phase.csv"), &header, |w| {
        w.write_record(["theta", "r", "kind"])?;
        for b in &boundary {
            let kind = match b.kind {
                CrossingKind::Root => "root",
                CrossingKind::Jump => "jump",
            };
            w.write_record([b.vartheta.to_string(), format!("{:.10}", b.r), kind.to_string()])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct OmegaRecord {
    command: &'static str,
    kind: OmegaKind,
    p: usize,
}

pub(crate) fn omega(args: &OmegaArgs) -> Result<(), CliError> {
    let seed = resolve_seed(&args.seed)?;
    let kind = match args.kind {
        OmegaKindArg::Identity => OmegaKind::Identity,
        OmegaKindArg::Block2 => OmegaKind::Block2 { h0: args.h0 },
        OmegaKindArg::Block4 => OmegaKind::Block4,
        OmegaKindArg::Tridiag => OmegaKind::TridiagBlock,
        OmegaKindArg::Pentadiag => OmegaKind::Pentadiag,
        OmegaKindArg::RandomSparse => OmegaKind::RandomSparse { k: args.k, a: args.a },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = gen_omega(kind, args.p, &mut rng)?;
    let header = Header::new(
        &OmegaRecord {
            command: "omega",
            kind,
            p: args.p,
        },
        seed,
    )?;
    let write = |out: &mut dyn std::io::Write, path: std::path::PathBuf| -> Result<(), CliError> {
        writeln!(out, "{}", header.comment_line()).map_err(|source| CliError::Output { path, source })?;
        write_matrix_csv(out, &m)?;
        Ok(())
    };
    match &args.output_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join("omega.csv");
            let mut file = std::io::BufWriter::new(File::create(&path).map_err(|source| CliError::Output {
                path: path.clone(),
                source,
            })?);
            write(&mut file, path)
        }
        None => write(&mut std::io::stdout().lock(), "<stdout>".into()),
    }
}

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use wbrm_npt::experiments::{self, output, SweepConfig};
use wbrm_npt::model::{diagonalize, eigenvalue, generate_wbrm, hamiltonian};
use wbrm_npt::npt::{npt_region, u_spectral_radius, Method, NptRegion};
use wbrm_npt::shapes::{accumulate_ef, accumulate_ldos, ShapeKind, ShapeProfile, StateFilter};
use wbrm_npt::Error;

use crate::{Cli, Command, ExperimentArgs, ExperimentKind, MethodArg, NptArgs, ShapeArg, ShapesArgs};

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RESONANCE: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::EmptyFilter | Error::TooLarge { .. } => EXIT_INVALID,
            Error::Resonance { .. } => EXIT_RESONANCE,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure {
                code: EXIT_INVALID,
                message: "--workers must be positive".into(),
            });
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Npt(a) => npt(a),
        Command::Experiment { kind, args } => experiment(*kind, args),
        Command::Shapes(a) => shapes(a),
    };
    if cli.verbose > 0 {
        eprintln!("elapsed {:.3} s on {} workers", start.elapsed().as_secs_f64(), rayon::current_num_threads());
    }
    result
}

#[derive(Debug, Serialize)]
struct SCheck {
    radius: f64,
    passes: bool,
}

#[derive(Debug, Serialize)]
struct RegionJson {
    method: Method,
    /// Which path produced the interval; differs from `method` when the
    /// pivot scan hands a narrow region to the oracle.
    path: Method,
    p1: usize,
    p2: usize,
    width: usize,
    s_check: SCheck,
}

#[derive(Debug, Serialize)]
struct NptJson {
    n: usize,
    b: usize,
    lambda: f64,
    seed: u64,
    alpha_index: usize,
    e_alpha: f64,
    regions: Vec<RegionJson>,
    /// Present only for `--method both`.
    #[serde(skip_serializing_if = "Option::is_none")]
    agree: Option<bool>,
}

fn npt(a: &NptArgs) -> Result<(), Failure> {
    let inst = generate_wbrm(a.n, a.b, a.lambda, a.seed)?;
    let alpha = a.alpha_index.unwrap_or(a.n / 2);
    if alpha >= a.n {
        return Err(Error::InvalidParameter(format!("alpha index {alpha} out of range for n = {}", a.n)).into());
    }
    let e_alpha = eigenvalue(&hamiltonian(&inst), alpha)?;
    let methods: &[Method] = match a.method {
        MethodArg::Oracle => &[Method::Oracle],
        MethodArg::Iterative => &[Method::Iterative],
        MethodArg::Both => &[Method::Oracle, Method::Iterative],
    };
    let mut found: Vec<(Method, NptRegion)> = Vec::new();
    for &m in methods {
        found.push((m, npt_region(&inst, e_alpha, m)?));
    }
    let mut regions = Vec::new();
    for (m, r) in &found {
        let radius = u_spectral_radius(&inst, e_alpha, r.p1, r.p2)?;
        regions.push(RegionJson {
            method: *m,
            path: r.method,
            p1: r.p1,
            p2: r.p2,
            width: r.width,
            s_check: SCheck {
                radius,
                passes: radius < 1.0,
            },
        });
    }
    let agree = (found.len() == 2).then(|| found[0].1.same_interval(&found[1].1));
    let out = NptJson {
        n: a.n,
        b: a.b,
        lambda: a.lambda,
        seed: a.seed,
        alpha_index: alpha,
        e_alpha,
        regions,
        agree,
    };
    let failed_check = out.regions.iter().any(|r| !r.s_check.passes);
    let json = serde_json::to_string_pretty(&out).map_err(|e| Failure::runtime(e.to_string()))?;
    writeln!(io::stdout().lock(), "{json}")?;
    if failed_check {
        return Err(Failure::runtime("s(U) >= 1 at a returned region"));
    }
    if agree == Some(false) {
        return Err(Failure::runtime("oracle and iterative regions differ"));
    }
    Ok(())
}

fn load_config(a: &ExperimentArgs) -> Result<SweepConfig, Failure> {
    let invalid = |e: Error| Failure {
        code: EXIT_INVALID,
        message: e.to_string(),
    };
    let mut cfg = SweepConfig::load(&a.config).map_err(invalid)?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = a.realizations {
        cfg.realizations = r;
    }
    if let Some(s) = a.states {
        cfg.states_per_realization = s;
    }
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn experiment(kind: ExperimentKind, a: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = load_config(a)?;
    let dir = cfg.output_dir.clone();
    let start = Instant::now();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let violations = match kind {
        ExperimentKind::Sweep => {
            let res = experiments::run_sweep(&cfg)?;
            let files = output::write_sweep(&dir, &cfg, &res, start.elapsed().as_secs_f64())?;
            writeln!(out, "{:>10} {:>12} {:>12} {:>7} {:>7}", "lambda", "mean_np", "std_np", "states", "skipped")?;
            for r in &res.records {
                writeln!(out, "{:>10} {:>12.4} {:>12.4} {:>7} {:>7}", r.lambda, r.mean_np, r.std_np, r.states, r.skipped)?;
            }
            for f in &res.fits {
                writeln!(out, "fit {}: {:?} r2 {:.4}", f.name, f.fit.params, f.fit.r2)?;
            }
            list_files(&mut out, &files)?;
            0
        }
        ExperimentKind::Compare => {
            let res = experiments::run_compare(&cfg)?;
            let files = output::write_compare(&dir, &cfg, &res, start.elapsed().as_secs_f64())?;
            writeln!(out, "{:>10} {:>10} {:>10} {:>10} {:>10} {:>8}", "lambda", "mean_np", "w_l", "w_f", "l_mean", "eta")?;
            let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            for r in &res {
                writeln!(
                    out,
                    "{:>10} {:>10.3} {:>10} {:>10} {:>10} {:>8}",
                    r.lambda,
                    r.mean_np,
                    show(r.w_l),
                    show(r.w_f),
                    show(r.l_mean),
                    show(r.eta)
                )?;
            }
            list_files(&mut out, &files)?;
            0
        }
        ExperimentKind::Confirm => {
            let res = experiments::run_confirm(&cfg)?;
            let files = output::write_confirm(&dir, &cfg, &res, start.elapsed().as_secs_f64())?;
            writeln!(
                out,
                "{:>10} {:>10} {:>12} {:>7} {:>10} {:>9} {:>7}",
                "lambda", "np_oracle", "np_iterative", "states", "mismatches", "fallbacks", "skipped"
            )?;
            for s in &res.summary {
                writeln!(
                    out,
                    "{:>10} {:>10.3} {:>12.3} {:>7} {:>10} {:>9} {:>7}",
                    s.lambda, s.np_oracle, s.np_iterative, s.states, s.mismatches, s.fallbacks, s.skipped
                )?;
            }
            writeln!(out, "mismatches {} fallbacks {}", res.mismatches, res.fallbacks)?;
            list_files(&mut out, &files)?;
            res.mismatches
        }
        ExperimentKind::Dist => {
            let res = experiments::run_distributions(&cfg)?;
            let files = output::write_distributions(&dir, &cfg, &res, start.elapsed().as_secs_f64())?;
            if let Some(f) = &res.x.fit {
                writeln!(out, "X fit: {:?} ks {:.4}", f.params, res.x_ks)?;
            }
            for h in &res.h {
                writeln!(out, "h tail b={} m={}: slope {:.4} r2 {:.4}", h.b, h.m, h.tail_fit.slope, h.tail_fit.r2)?;
            }
            let mut bad = 0;
            for l in &res.ladders {
                let ok = l.is_non_increasing() && l.n_p_vanishes();
                bad += usize::from(!ok);
                writeln!(
                    out,
                    "ladder b={} lambda={}: n_c {:.2} sum {:.2} monotone {}",
                    l.b,
                    l.estimate.lambda,
                    l.estimate.n_c,
                    l.estimate.sum,
                    ok
                )?;
            }
            list_files(&mut out, &files)?;
            bad
        }
    };
    if violations > 0 {
        return Err(Failure::runtime(format!("{violations} invariant violation(s) during the run")));
    }
    Ok(())
}

fn list_files(out: &mut impl Write, files: &[std::path::PathBuf]) -> io::Result<()> {
    for f in files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

fn shapes(a: &ShapesArgs) -> Result<(), Failure> {
    if a.realizations == 0 || !(a.bin_width > 0.0 && a.bin_width.is_finite()) {
        return Err(Error::InvalidParameter("realizations and bin width must be positive".into()).into());
    }
    let kind = match a.kind {
        ShapeArg::Ef => ShapeKind::Ef,
        ShapeArg::Ldos => ShapeKind::Ldos,
    };
    let mut profile = ShapeProfile::with_bin_width(kind, a.bin_width);
    let filter = StateFilter::MiddleHalf;
    for r in 0..a.realizations {
        let seed = wbrm_npt::rng::derive_seed(a.seed, 0, r as u64);
        let spec = diagonalize(&hamiltonian(&generate_wbrm(a.n, a.b, a.lambda, seed)?))?;
        let picked = filter.select(spec.n());
        match kind {
            ShapeKind::Ef => accumulate_ef(&mut profile, &spec, &picked),
            ShapeKind::Ldos => accumulate_ldos(&mut profile, &spec, &picked),
        }
    }
    match &a.out {
        Some(p) => write_profile(&profile, p),
        None => Ok(profile.write_csv(io::stdout().lock())?),
    }
}

fn write_profile(profile: &ShapeProfile, path: &Path) -> Result<(), Failure> {
    Ok(profile.write_csv(File::create(path)?)?)
}

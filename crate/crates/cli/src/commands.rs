use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use janossy_core::architectures::Encoder;
use janossy_core::bounds::{bounds_table, write_csv};
use janossy_core::collision::{
    find_collision, linear_collision_oracle, verify_certificate, BorsukUlamMap, CertificateFile,
    SearchConfig,
};
use janossy_core::constructions::{sample_obstruction, ObstructionParams};
use janossy_core::experiments::{run_sweep, write_sweep_csv, SweepConfig};
use janossy_core::geometry::{regular_simplex, sample_sphere};
use janossy_core::numerics::{Activation, Mlp};
use janossy_core::rigidity::{check_rigidity, CubeIncrement, ProductMap, RigidityReport};
use janossy_core::seed::{component_seed, rng_from_seed, Stream};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::{BoundsArgs, CollisionArgs, CoverArgs, Failure, RigidityArgs, SweepArgs};

type CmdResult = Result<ExitCode, Failure>;

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    quiet_pipe(writeln!(std::io::stdout().lock(), "{text}"))
}

/// A closed downstream pipe (`| head`) is not an error.
fn quiet_pipe(r: std::io::Result<()>) -> Result<(), Failure> {
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(anyhow::Error::from(e).context("writing output").into())
        }
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `<path>.config.json` beside a single-file output.
fn write_sidecar<T: Serialize>(path: &Path, subcommand: &str, config: &T) -> Result<(), Failure> {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.json");
    write_json(
        Path::new(&name),
        &json!({ "subcommand": subcommand, "version": env!("CARGO_PKG_VERSION"), "config": config }),
    )
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn bounds(args: &BoundsArgs, out_dir: Option<PathBuf>) -> CmdResult {
    let rows = bounds_table(args.d_range, args.n_range, args.k_range)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let path = args
        .out
        .clone()
        .or_else(|| out_dir.map(|d| d.join("bounds.csv")));
    match path {
        Some(path) => {
            ensure_parent(&path)?;
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            write_csv(&rows, &mut w).context("writing CSV")?;
            w.flush().context("writing CSV")?;
            write_sidecar(&path, "bounds", args)?;
            eprintln!("{} rows written to {}", rows.len(), path.display());
        }
        None => {
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).context("formatting CSV")?;
            quiet_pipe(std::io::stdout().lock().write_all(&buf))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cover_check(args: &CoverArgs) -> CmdResult {
    let b = args.b as usize;
    let cover = regular_simplex(b).map_err(|e| Failure::usage(e.to_string()))?;
    let inv = cover.invariant_errors();
    let samples =
        sample_sphere(b, args.samples, args.seed).map_err(|e| Failure::usage(e.to_string()))?;
    let mut violations = 0usize;
    let mut covering_failures = 0usize;
    for u in &samples {
        violations += cover.antipodal_free_violation(u) as usize;
        let r = cover.assign_region(u).context("assigning region")?;
        if !cover.in_region(u, r).context("checking region")? {
            covering_failures += 1;
        }
    }
    let passed = inv.vertex_count == b + 1
        && inv.max_norm_error <= 1e-12
        && inv.max_gram_error <= 1e-10
        && inv.centroid_norm <= 1e-10
        && violations == 0
        && covering_failures == 0;
    print_json(&json!({
        "b": b,
        "samples": args.samples,
        "seed": args.seed,
        "vertex_count": inv.vertex_count,
        "max_norm_error": inv.max_norm_error,
        "max_gram_error": inv.max_gram_error,
        "centroid_norm": inv.centroid_norm,
        "violations": violations,
        "covering_failures": covering_failures,
        "passed": passed,
    }))?;
    Ok(status(passed))
}

fn random_increment(
    d: usize,
    k: usize,
    rng: &mut impl Rng,
    lo: f64,
) -> anyhow::Result<CubeIncrement> {
    let bases = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..0.5)).collect())
        .collect();
    let incs = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(lo..0.5)).collect())
        .collect();
    Ok(CubeIncrement::new(bases, incs)?)
}

fn random_tails(len: usize, count: usize, rng: &mut impl Rng, lo: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..len).map(|_| rng.random_range(lo..=1.0)).collect())
        .collect()
}

/// Indexed tanh encoder with members `[dk, width, M]`, member `t` seeded by
/// `component_seed(seed, EncoderInit, t)`.
fn random_encoder(
    d: usize,
    n: usize,
    k: usize,
    m: usize,
    width: usize,
    seed: u64,
) -> anyhow::Result<Encoder<Mlp>> {
    let count = n
        .checked_pow(k as u32)
        .ok_or_else(|| anyhow::anyhow!("n^k overflows"))?;
    let members = (0..count as u64)
        .map(|t| {
            Mlp::random(
                &[d * k, width, m],
                Activation::Tanh,
                component_seed(seed, Stream::EncoderInit, t),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Encoder::indexed(d, n, k, members)?)
}

pub fn rigidity_check(args: &RigidityArgs) -> CmdResult {
    let (d, n, k, m) = (args.d, args.n, args.k, args.m);
    if d == 0 || m == 0 || k == 0 || k >= n || args.encoders == 0 || args.tails < 2 {
        return Err(Failure::usage(
            "need d, M, k >= 1, k < n, encoders >= 1 and tails >= 2",
        ));
    }
    let mut reports: Vec<RigidityReport> = Vec::with_capacity(args.encoders);
    for i in 0..args.encoders as u64 {
        let enc = random_encoder(
            d,
            n,
            k,
            m,
            8,
            component_seed(args.seed, Stream::EncoderInit, i),
        )?;
        let mut rng = rng_from_seed(component_seed(args.seed, Stream::Tails, i));
        let inc = random_increment(d, k, &mut rng, 0.0)?;
        let tails = random_tails(d * (n - k), args.tails, &mut rng, 0.0);
        reports.push(check_rigidity(&enc, &inc, &tails, args.tolerance).context("rigidity check")?);
    }
    let max_deviation = reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let mut passed = reports.iter().all(|r| r.passed);

    let control = if args.negative_control {
        let map = ProductMap { d, n };
        let mut min_dev = f64::INFINITY;
        for i in 0..args.encoders as u64 {
            let mut rng = rng_from_seed(component_seed(args.seed, Stream::Tails, 1_000_000 + i));
            let inc = random_increment(d, k, &mut rng, 0.2)?;
            let tails = random_tails(d * (n - k), args.tails, &mut rng, 0.2);
            let rep =
                check_rigidity(&map, &inc, &tails, args.tolerance).context("control check")?;
            min_dev = min_dev.min(rep.max_deviation);
        }
        let failed_as_expected = min_dev > 1e-3;
        passed &= failed_as_expected;
        Some(
            json!({ "map": "product", "min_deviation": min_dev, "threshold": 1e-3, "failed_as_expected": failed_as_expected }),
        )
    } else {
        None
    };

    print_json(&json!({
        "config": args,
        "max_deviation": max_deviation,
        "tolerance": args.tolerance,
        "encoders": reports,
        "negative_control": control,
        "passed": passed,
    }))?;
    Ok(status(passed))
}

fn verify(path: &Path) -> CmdResult {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: CertificateFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = verify_certificate(&file).context("verifying certificate")?;
    print_json(&report)?;
    Ok(status(report.passed))
}

pub fn collision_find(args: &CollisionArgs, out_dir: Option<PathBuf>) -> CmdResult {
    if let Some(path) = &args.verify {
        return verify(path);
    }
    let encoder = match (&args.encoder_file, args.random_seed) {
        (Some(path), None) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let enc: Encoder<Mlp> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            for (flag, given, actual) in [
                ("--d", args.d, enc.d()),
                ("--n", args.n, enc.n()),
                ("--k", args.k, enc.k()),
                ("--M", args.m, enc.latent_dim()),
            ] {
                if given.is_some_and(|g| g != actual) {
                    return Err(Failure::usage(format!(
                        "{flag} disagrees with the encoder file ({actual})"
                    )));
                }
            }
            enc
        }
        (None, Some(seed)) => {
            let (Some(d), Some(n), Some(k), Some(m)) = (args.d, args.n, args.k, args.m) else {
                return Err(Failure::usage("--random-seed needs --d, --n, --k and --M"));
            };
            if d == 0 || k == 0 || k >= n || m == 0 || args.width == 0 {
                return Err(Failure::usage("need d, M, k >= 1 and k < n"));
            }
            random_encoder(d, n, k, m, args.width, seed)?
        }
        _ => {
            return Err(Failure::usage(
                "give exactly one of --encoder-file, --random-seed or --verify",
            ))
        }
    };
    let params = ObstructionParams::new(
        encoder.d(),
        encoder.n(),
        encoder.k(),
        args.epsilon,
        args.samples_per_region,
        component_seed(args.seed, Stream::Instance, 0),
    );
    let inst = sample_obstruction(params).map_err(|e| Failure::usage(e.to_string()))?;
    let search = SearchConfig {
        restarts: args.restarts,
        max_iterations: args.max_iterations,
        step_size: 1.0,
        tolerance: args.tol,
        seed: component_seed(args.seed, Stream::Search, 0),
    };
    let indexed = encoder.as_indexed();
    let map = BorsukUlamMap::new(&indexed, &inst).context("building the Borsuk-Ulam map")?;

    let (certificate, best_residual, method) = if encoder.is_affine() {
        let cert = linear_collision_oracle(&map).context("linear oracle")?;
        let best = cert
            .as_ref()
            .map_or(f64::INFINITY, |c| c.antipodal_residual);
        (cert, best, "linear_oracle")
    } else {
        let rep = find_collision(&map, &search).map_err(|e| Failure::usage(e.to_string()))?;
        (rep.certificate, rep.best_residual, "projected_gradient")
    };

    let resolved = json!({
        "args": args,
        "instance": params,
        "search": search,
        "method": method,
        "seed_rule": "component_seed(global, stream, index) with streams instance=1, encoder_init=2, search=6",
    });
    let Some(cert) = certificate else {
        print_json(&json!({
            "certified": false,
            "best_residual": best_residual,
            "collision_guaranteed": map.collision_guaranteed(),
            "config": resolved,
        }))?;
        return Ok(ExitCode::FAILURE);
    };
    let out = args
        .out
        .clone()
        .or_else(|| out_dir.map(|d| d.join("certificate.json")));
    if let Some(path) = &out {
        ensure_parent(path)?;
        write_json(
            path,
            &CertificateFile {
                certificate: cert.clone(),
                encoder,
            },
        )?;
        write_sidecar(path, "collision-find", &resolved)?;
    }
    print_json(&json!({
        "certified": true,
        "antipodal_residual": cert.antipodal_residual,
        "axis_residual": cert.axis_residual,
        "grid_residual": cert.grid_residual,
        "region": cert.region,
        "direction": cert.direction,
        "restarts_used": cert.restarts_used,
        "method": method,
        "out": out,
    }))?;
    Ok(ExitCode::SUCCESS)
}

pub fn train_sweep(args: &SweepArgs, out_dir: Option<PathBuf>) -> CmdResult {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.config.display())))?;
    let mut cfg: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(dims) = &args.latent_dims {
        cfg.latent_dims = dims.clone();
    }
    cfg.train
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    if cfg.latent_dims.windows(2).any(|w| w[0] > w[1]) {
        return Err(Failure::usage("latent_dims must be sorted"));
    }
    let dir = args
        .out
        .clone()
        .or_else(|| out_dir.map(|d| d.join("sweep")))
        .ok_or_else(|| Failure::usage("--out is required when JANOSSY_OUT_DIR is unset"))?;
    let occupied = dir
        .read_dir()
        .map(|mut it| it.next().is_some())
        .unwrap_or(false);
    if occupied && !args.force {
        return Err(Failure::usage(format!(
            "{} is not empty; pass --force to reuse it",
            dir.display()
        )));
    }
    fs::create_dir_all(dir.join("certificates"))
        .with_context(|| format!("creating {}", dir.display()))?;

    let params = cfg.instance_params();
    write_json(&dir.join("config.json"), &cfg)?;
    write_json(
        &dir.join("seeds.json"),
        &json!({
            "global": cfg.train.seed,
            "instance": params.seed,
            "search": cfg.resolved_search().seed,
            "encoder_member": "component_seed(global, 2, member index)",
            "decoder": component_seed(cfg.train.seed, Stream::DecoderInit, 0),
            "dataset": component_seed(cfg.train.seed, Stream::Dataset, 0),
            "held_out": component_seed(cfg.train.seed, Stream::Dataset, 1),
            "training": component_seed(cfg.train.seed, Stream::Training, 0),
        }),
    )?;

    let result = run_sweep(&cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let csv_path = dir.join("sweep.csv");
    let mut csv = Vec::new();
    write_sweep_csv(&result, &mut csv).context("formatting CSV")?;
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    write_json(&dir.join("results.json"), &result)?;
    for rec in &result.records {
        if let (Some(cert), Some(model)) = (&rec.certificate, &rec.model) {
            write_json(
                &dir.join("certificates")
                    .join(format!("M{}.json", rec.latent_dim)),
                &CertificateFile {
                    certificate: cert.clone(),
                    encoder: model.encoder().clone(),
                },
            )?;
        }
        eprintln!(
            "M={:<3} below_threshold={:<5} certified={:<5} implied_bound={} error={}",
            rec.latent_dim,
            rec.below_threshold,
            rec.certified,
            rec.implied_bound()
                .map_or("-".into(), |b| format!("{b:.5}")),
            rec.error.as_deref().unwrap_or("-"),
        );
    }
    let complete = result.records.iter().all(|r| r.error.is_none());
    Ok(status(complete))
}

use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use corrgan_core::canonical::canonicalize_with_order;
use corrgan_core::facts::report::{stylized_report, ReportConfig, Thresholds};
use corrgan_core::ingest::{
    build_dataset, load_returns_csv, matrix_file_name, synth_factor_market, DataSource, DatasetManifest,
    DatasetSpec, FactorMarketParams, MANIFEST_FILE,
};
use corrgan_core::io::{list_matrix_files, read_correlation, read_correlation_dir, read_raw, write_matrix};
use corrgan_core::repair::{nearest_correlation, RepairConfig};
use corrgan_core::sampling::{rejection_oracle, sample_onion, SamplerConfig};
use corrgan_core::{ReturnKind, Tolerances};
use corrgan_gan::{generate, load_checkpoint, save_checkpoint, train, ArchitectureDescriptor, TrainConfig};
use corrgan_service::{ServiceConfig, ServiceError};

use crate::error::CliError;
use crate::{
    BuildArgs, CanonicalizeArgs, Command, EvaluateArgs, GenerateArgs, RepairArgs, ReturnKindArg, SampleArgs,
    SampleMethod, ServeArgs, Source, TrainArgs, VariantArg,
};

type Results = Vec<(String, String)>;

pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAINING_LOG_FILE: &str = "training-log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const REPORT_FILE: &str = "report.txt";

pub fn execute(cmd: &Command, results: &mut Results) -> Result<(), CliError> {
    match cmd {
        Command::SampleElliptope(a) => sample(a, results),
        Command::BuildDataset(a) => build(a, results),
        Command::Canonicalize(a) => canonicalize(a, results),
        Command::Train(a) => train_cmd(a, results),
        Command::Generate(a) => generate_cmd(a, results),
        Command::Repair(a) => repair(a, results),
        Command::Evaluate(a) => evaluate(a, results),
        Command::Serve(a) => serve(a, results),
    }
}

fn push(results: &mut Results, key: &str, value: impl ToString) {
    results.push((key.to_string(), value.to_string()));
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn sample(a: &SampleArgs, results: &mut Results) -> Result<(), CliError> {
    let cfg = SamplerConfig { n: a.n, count: a.count, seed: a.seed };
    let (matrices, proposals) = match a.method {
        SampleMethod::Onion => (sample_onion(&cfg)?, None),
        SampleMethod::Rejection => {
            let s = rejection_oracle(&cfg)?;
            let p = s.proposals;
            (s.matrices, Some(p))
        }
    };
    let method = match a.method {
        SampleMethod::Onion => "onion",
        SampleMethod::Rejection => "rejection",
    };
    let mut manifest = format!("method={method}\nn={}\ncount={}\nseed={}\n", a.n, a.count, a.seed);
    if let Some(p) = proposals {
        manifest += &format!("proposals={p}\nacceptance_rate={}\n", a.count as f64 / p as f64);
        push(results, "proposals", p);
    }
    for (i, m) in matrices.iter().enumerate() {
        let name = matrix_file_name(i);
        write_matrix(&a.out.join(&name), m.values())?;
        manifest += &format!("file={name}\n");
    }
    write_text(&a.out.join(MANIFEST_FILE), &manifest)?;
    push(results, "matrices", matrices.len());
    println!("wrote {} matrices to {}", matrices.len(), a.out.display());
    Ok(())
}

fn build(a: &BuildArgs, results: &mut Results) -> Result<(), CliError> {
    let spec = DatasetSpec {
        window: a.window,
        stride: a.stride,
        universe_size: a.universe_size,
        target_count: a.count,
        seed: a.seed,
    };
    let (panel, source) = match (a.source, &a.returns) {
        (Source::Real, Some(path)) => {
            let kind = match a.return_kind {
                ReturnKindArg::Simple => ReturnKind::Simple,
                ReturnKindArg::Log => ReturnKind::Log,
            };
            let (panel, report) = load_returns_csv(path, kind)?;
            push(results, "rows_read", report.rows_read);
            push(results, "rows_dropped", report.drop_count);
            (panel, DataSource::Real)
        }
        (Source::Real, None) => return Err(CliError::Config("--source real requires --returns".into())),
        (Source::Synthetic, Some(_)) => {
            return Err(CliError::Config("--returns only applies to --source real".into()))
        }
        (Source::Synthetic, None) => {
            let params = FactorMarketParams {
                n_assets: a.assets,
                n_days: a.days,
                n_sectors: a.sectors,
                market_vol: a.market_vol,
                market_beta_range: (a.beta_low, a.beta_high),
                sector_loading: a.sector_loading,
                idio_vol: a.idio_vol,
                seed: a.seed,
            };
            (synth_factor_market(&params)?, DataSource::Synthetic)
        }
    };
    let manifest = build_dataset(&panel, &spec, source, &a.out)?;
    push(results, "matrices", manifest.matrix_count);
    println!("wrote {} matrices to {}", manifest.matrix_count, a.out.display());
    Ok(())
}

fn canonicalize(a: &CanonicalizeArgs, results: &mut Results) -> Result<(), CliError> {
    let files = list_matrix_files(&a.input)?;
    let mut ambiguous = 0usize;
    for path in &files {
        let m = read_correlation(path, Tolerances::default())?;
        let (r, order) = canonicalize_with_order(&m);
        let name = path.file_name().expect("listed files have names");
        let target = a.out.join(name);
        write_matrix(&target, r.values())?;
        let perm: Vec<String> = order.permutation.as_slice().iter().map(|i| i.to_string()).collect();
        write_text(&target.with_extension("perm"), &(perm.join(",") + "\n"))?;
        if order.ambiguous {
            ambiguous += 1;
            log::warn!("{}: ordering has exact ties", path.display());
        }
    }
    if a.input.join(MANIFEST_FILE).is_file() {
        match DatasetManifest::read(&a.input) {
            Ok(mut manifest) => {
                manifest.canonicalized = true;
                write_text(&a.out.join(MANIFEST_FILE), &manifest.to_text())?;
            }
            Err(e) => log::info!("input manifest is not a dataset manifest, not copied: {e}"),
        }
    }
    push(results, "matrices", files.len());
    push(results, "ambiguous", ambiguous);
    println!("canonicalized {} matrices into {}", files.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: &TrainArgs, results: &mut Results) -> Result<(), CliError> {
    let data = read_correlation_dir(&a.data, Tolerances::default())?;
    let Some(first) = data.first() else {
        return Err(CliError::Config(format!("no matrices in {}", a.data.display())));
    };
    let n = first.n();
    let mut arch = match a.variant {
        VariantArg::Dense => ArchitectureDescriptor::dense(n, a.latent_dim, vec![128, 256], vec![256, 128]),
        VariantArg::Conv => ArchitectureDescriptor::conv(n, a.latent_dim),
    };
    if let Some(w) = &a.generator_widths {
        arch.generator_widths = w.clone();
    }
    if let Some(w) = &a.discriminator_widths {
        arch.discriminator_widths = w.clone();
    }
    if let Some(s) = &a.generator_activation {
        arch.generator_activation = s.parse()?;
    }
    if let Some(s) = &a.discriminator_activation {
        arch.discriminator_activation = s.parse()?;
    }
    if let Some(b) = a.batch_norm {
        arch.batch_norm = b;
    }
    arch.validate()?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        generator_lr: a.generator_lr,
        discriminator_lr: a.discriminator_lr,
        beta1: a.beta1,
        beta2: a.beta2,
        epochs: a.epochs,
        seed: a.seed,
        label_smoothing: a.label_smoothing,
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir: a.checkpoint_every.map(|_| a.out.join(CHECKPOINT_DIR)),
    };
    let (model, log) = train(&data, &arch, &cfg)?;
    save_checkpoint(&model, &a.out.join(MODEL_FILE))?;
    write_text(&a.out.join(TRAINING_LOG_FILE), &log.to_csv())?;
    push(results, "n", n);
    push(results, "dataset_size", data.len());
    push(results, "steps", model.step());
    push(results, "param_count", model.param_count());
    if let (Some(d), Some(g)) = (log.d_loss.last(), log.g_loss.last()) {
        push(results, "final_d_loss", d);
        push(results, "final_g_loss", g);
    }
    println!("trained {} steps, model written to {}", model.step(), a.out.join(MODEL_FILE).display());
    Ok(())
}

fn generate_cmd(a: &GenerateArgs, results: &mut Results) -> Result<(), CliError> {
    let model = load_checkpoint(&a.model)?;
    let samples = generate(&model, a.count, a.seed)?;
    for (i, m) in samples.iter().enumerate() {
        write_matrix(&a.out.join(matrix_file_name(i)), m.values())?;
    }
    push(results, "matrices", samples.len());
    push(results, "model_step", model.step());
    println!("wrote {} generated matrices to {}", samples.len(), a.out.display());
    Ok(())
}

fn repair(a: &RepairArgs, results: &mut Results) -> Result<(), CliError> {
    let cfg = RepairConfig { tol: a.tol, max_iter: a.max_iter, psd_floor: a.psd_floor };
    cfg.validate()?;
    let files = list_matrix_files(&a.input)?;
    let (mut max_iter, mut max_residual, mut max_distance) = (0usize, 0.0f64, 0.0f64);
    for path in &files {
        let r = nearest_correlation(&read_raw(path)?, &cfg)?;
        let name = path.file_name().expect("listed files have names");
        write_matrix(&a.out.join(name), r.matrix.values())?;
        max_iter = max_iter.max(r.iterations);
        max_residual = max_residual.max(r.residual);
        max_distance = max_distance.max(r.distance_trace.last().copied().unwrap_or(0.0));
    }
    push(results, "matrices", files.len());
    push(results, "max_iterations", max_iter);
    push(results, "max_residual", max_residual);
    push(results, "max_distance", max_distance);
    println!("repaired {} matrices into {}", files.len(), a.out.display());
    Ok(())
}

fn evaluate(a: &EvaluateArgs, results: &mut Results) -> Result<(), CliError> {
    let reference = read_correlation_dir(&a.reference, Tolerances::default())?;
    let candidate = read_correlation_dir(&a.candidate, Tolerances::default())?;
    let cfg = ReportConfig {
        thresholds: Thresholds {
            mean_diff_max: a.mean_diff_max,
            std_diff_max: a.std_diff_max,
            lambda1_ks_max: a.lambda1_ks_max,
            pf_rate_diff_max: a.pf_rate_diff_max,
            hierarchy_ks_max: a.hierarchy_ks_max,
            degree_chi2_per_obs_max: a.degree_chi2_per_obs_max,
        },
        n_obs: a.n_obs,
    };
    if cfg.n_obs < 2 {
        return Err(CliError::Config(format!("--n-obs must be >= 2, got {}", a.n_obs)));
    }
    let report = stylized_report(&reference, &candidate, &cfg)?;
    write_text(&a.out.join(REPORT_FILE), &report.to_text())?;
    report.write_histograms(&a.out)?;
    let v = &report.verdicts;
    for (name, ok) in [
        ("pairwise", v.pairwise),
        ("spectrum", v.spectrum),
        ("perron_frobenius", v.perron_frobenius),
        ("hierarchy", v.hierarchy),
        ("mst", v.mst),
    ] {
        let verdict = if ok { "pass" } else { "fail" };
        println!("{name}: {verdict}");
        push(results, name, verdict);
    }
    push(results, "all_pass", v.all());
    Ok(())
}

fn serve(a: &ServeArgs, results: &mut Results) -> Result<(), CliError> {
    let ip = a
        .host
        .parse()
        .map_err(|_| CliError::Config(format!("--host {:?} is not an IP address", a.host)))?;
    let addr = SocketAddr::new(ip, a.port);
    let mut cfg = ServiceConfig::new(a.real_dir.clone(), a.fake_dir.clone(), a.log_file.clone());
    cfg.seed = a.seed;
    cfg.ttl = Duration::from_secs(a.ttl_secs);
    cfg.static_dir = a.static_dir.clone();
    push(results, "address", addr);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Service(ServiceError::Server(e)))?;
    runtime.block_on(corrgan_service::serve(&cfg, addr))?;
    Ok(())
}

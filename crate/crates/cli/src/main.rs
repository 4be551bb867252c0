use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use relight_core::fitting::{
    cache_file_name, fit_input_fingerprint, save_cached_transform, CachedTransform, Direction,
};
use relight_core::io::{create_dir, image_dimensions};
use relight_core::pipeline::build::{extract_patches, source_crop, TRANSFORM_DIR};
use relight_core::pipeline::report::{evaluate_output, format_table};
use relight_core::pipeline::{
    apply_duplicate_flags, build_dataset, near_duplicate_scan, prepare_checker, validate_output,
    BuildOptions, ExclusionFlag, Manifest,
};
use relight_core::{linear_to_srgb, Error};

#[derive(Parser, Debug)]
#[command(name = "relight", version, about = "Checker-based illumination transfer dataset builder")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Dataset manifest (TOML).
    #[arg(long, global = true, default_value = "manifest.toml")]
    manifest: PathBuf,
    /// Override the manifest's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of references per foreground.
    #[arg(long = "refs-per-fg", global = true)]
    refs_per_fg: Option<usize>,
    /// Override the ridge weight.
    #[arg(long, global = true)]
    ridge: Option<f64>,
    /// Override the polynomial degree (1 or 2).
    #[arg(long, global = true)]
    degree: Option<u32>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long = "out-dir", global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the 24 extracted patch colors of each image.
    ExtractPatches {
        #[arg(long)]
        image: Option<String>,
    },
    /// Fit forward and inverse transforms and write them to the transform cache.
    Fit {
        #[arg(long)]
        image: Option<String>,
    },
    /// Report near-duplicate image pairs.
    ScanDuplicates {
        /// Maximum Hamming distance (of 64 bits); defaults to the manifest setting.
        #[arg(long)]
        threshold: Option<u32>,
        /// Flag the later id of each pair as a duplicate in the manifest.
        #[arg(long)]
        write: bool,
    },
    /// Report the checker-free crop of each image.
    Crop {
        /// Flag images whose checker dominates the frame in the manifest.
        #[arg(long)]
        write: bool,
    },
    /// Generate composite / ground-truth pairs.
    Build {
        /// Only plan pairs and report counts.
        #[arg(long)]
        dry_run: bool,
    },
    /// Re-check a build directory against the manifest.
    Validate,
    /// Per-pair MSE, foreground MSE and PSNR of a build directory.
    Metrics,
}

fn load_manifest(g: &Global) -> Result<Manifest> {
    let mut m = Manifest::load(&g.manifest)
        .with_context(|| format!("loading manifest {}", g.manifest.display()))?;
    if let Some(s) = g.seed {
        m.seed = s;
    }
    if let Some(k) = g.refs_per_fg {
        m.references_per_foreground = k;
    }
    if let Some(r) = g.ridge {
        m.config.ridge = r;
    }
    if let Some(d) = g.degree {
        m.config.degree = d;
    }
    m.check()?;
    Ok(m)
}

fn selected<'a>(m: &'a Manifest, image: &Option<String>) -> Result<Vec<&'a relight_core::pipeline::ImageRecord>> {
    Ok(match image {
        Some(id) => vec![m.record(id)?],
        None => m.active().collect(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::ExtractPatches { image } => {
            let m = load_manifest(g)?;
            let anns = m.load_annotations()?;
            let mut failed = false;
            println!("image\tpatch\tr\tg\tb\tsrgb");
            for rec in selected(&m, image)? {
                let Some(ann) = anns.get(&rec.id) else {
                    eprintln!("{}: no checker annotation", rec.id);
                    failed = true;
                    continue;
                };
                match extract_patches(&m, rec, ann) {
                    Ok((patches, _)) => {
                        for (i, c) in patches.iter().enumerate() {
                            let [r, gg, b] = linear_to_srgb(*c);
                            println!(
                                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{r} {gg} {b}",
                                rec.id,
                                i + 1,
                                c.r,
                                c.g,
                                c.b
                            );
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", rec.id);
                        failed = true;
                    }
                }
            }
            Ok(exit(failed))
        }
        Command::Fit { image } => {
            let m = load_manifest(g)?;
            let anns = m.load_annotations()?;
            let standard = m.standard_colors()?;
            let cache = g.out_dir.join(TRANSFORM_DIR);
            create_dir(&cache)?;
            let spec = m.config.feature_spec()?;
            let mut failed = false;
            println!("image\tforward_rmse\tinverse_rmse\treview");
            for rec in selected(&m, image)? {
                let Some(ann) = anns.get(&rec.id) else {
                    eprintln!("{}: no checker annotation", rec.id);
                    failed = true;
                    continue;
                };
                // Always refit: `fit` is how the cache gets refreshed.
                match prepare_checker(&m, rec, ann, &standard, None) {
                    Ok(p) => {
                        let inputs = fit_input_fingerprint(&standard, &p.patches, spec, m.config.ridge);
                        for (d, t) in [
                            (Direction::Forward, &p.transforms.forward),
                            (Direction::Inverse, &p.transforms.inverse),
                        ] {
                            save_cached_transform(
                                &cache.join(cache_file_name(&rec.id, d)),
                                &CachedTransform {
                                    image_id: rec.id.clone(),
                                    direction: d,
                                    inputs: inputs.clone(),
                                    transform: t.clone(),
                                },
                            )?;
                        }
                        let warn = p.forward_residual > m.config.residual_warning
                            || p.inverse_residual > m.config.residual_warning;
                        println!(
                            "{}\t{:.6}\t{:.6}\t{}",
                            rec.id,
                            p.forward_residual,
                            p.inverse_residual,
                            if warn { "yes" } else { "no" }
                        );
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", rec.id);
                        failed = true;
                    }
                }
            }
            Ok(exit(failed))
        }
        Command::ScanDuplicates { threshold, write } => {
            let mut m = load_manifest(g)?;
            let threshold = threshold.unwrap_or(m.config.duplicate_threshold);
            let pairs = near_duplicate_scan(&m, threshold)?;
            println!("keep\tduplicate\tdistance");
            for p in &pairs {
                println!("{}\t{}\t{}", p.keep, p.duplicate, p.distance);
            }
            if *write {
                let n = apply_duplicate_flags(&mut m, &pairs)?;
                save_manifest(&m, &g.manifest)?;
                eprintln!("flagged {n} image(s) as duplicate in {}", g.manifest.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Crop { write } => {
            let mut m = load_manifest(g)?;
            let anns = m.load_annotations()?;
            let mut central = Vec::new();
            let mut failed = false;
            println!("image\tx0\ty0\tx1\ty1\tfraction");
            for rec in m.active() {
                let Some(ann) = anns.get(&rec.id) else {
                    eprintln!("{}: no checker annotation", rec.id);
                    failed = true;
                    continue;
                };
                let dims = match image_dimensions(&m.resolve(&rec.path)) {
                    Ok(d) => d,
                    Err(e) => {
                        eprintln!("{}: {e}", rec.id);
                        failed = true;
                        continue;
                    }
                };
                match source_crop(&m, ann, dims.0, dims.1) {
                    Ok(r) => println!(
                        "{}\t{}\t{}\t{}\t{}\t{:.4}",
                        rec.id,
                        r.x0,
                        r.y0,
                        r.x1,
                        r.y1,
                        r.area() as f64 / (dims.0 as f64 * dims.1 as f64)
                    ),
                    Err(e @ Error::CheckerDominates { .. }) => {
                        println!("{}\t-\t-\t-\t-\t{e}", rec.id);
                        central.push((rec.id.clone(), e.to_string()));
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", rec.id);
                        failed = true;
                    }
                }
            }
            if *write && !central.is_empty() {
                for (id, why) in &central {
                    m.record_mut(id)?.flag(ExclusionFlag::CheckerCentral, why.clone());
                }
                save_manifest(&m, &g.manifest)?;
                eprintln!("flagged {} image(s) as checker_central", central.len());
            }
            Ok(exit(failed))
        }
        Command::Build { dry_run } => {
            let m = load_manifest(g)?;
            let report = build_dataset(
                &m,
                &BuildOptions {
                    out_dir: g.out_dir.clone(),
                    dry_run: *dry_run,
                    jobs: g.jobs,
                },
            )?;
            let s = &report.summary;
            println!("pairs: {}", s.pairs);
            println!("train pairs: {}", s.train.pairs);
            println!("test pairs: {}", s.test.pairs);
            println!(
                "foregrounds: {} train, {} test",
                s.train.foregrounds, s.test.foregrounds
            );
            println!("images: {} train, {} test", s.train.images, s.test.images);
            if let Some(r) = &s.residuals {
                println!(
                    "checker rmse: forward mean {:.5} max {:.5}, inverse mean {:.5} max {:.5}",
                    r.mean_forward, r.max_forward, r.mean_inverse, r.max_inverse
                );
                for c in &r.review {
                    println!(
                        "review checker {}: forward {:.5}, inverse {:.5}",
                        c.image_id, c.forward_residual, c.inverse_residual
                    );
                }
            }
            for f in &s.failures {
                eprintln!("failed {}: {}", f.item, f.message);
            }
            println!("failures: {}", s.failures.len());
            Ok(exit(!report.succeeded()))
        }
        Command::Validate => {
            let m = load_manifest(g)?;
            let report = validate_output(&m, &g.out_dir)?;
            for v in &report.violations {
                println!("violation: {v}");
            }
            println!(
                "checked {} pairs ({} expected): {} violation(s)",
                report.pairs_checked,
                report.expected_pairs,
                report.violations.len()
            );
            Ok(exit(!report.is_clean()))
        }
        Command::Metrics => {
            let rows = evaluate_output(&g.out_dir)?;
            print!("{}", format_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn save_manifest(m: &Manifest, path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("manifest {} disappeared", path.display());
    }
    m.save(path)?;
    Ok(())
}

fn exit(failed: bool) -> ExitCode {
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

//! Command-line front end; `procinv <subcommand> --help` lists the flags.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::generators::{generate, schema, ParamKind};
use crate::mcmc::{mh_run, Features, McmcOptions};
use crate::pipeline::{build_dataset, invert, train, Checkpoint, Dataset, TrainConfig};
use crate::render::Image;
use crate::service::{serve, ServiceConfig};

#[derive(Parser, Debug)]
#[command(name = "procinv", version, about = "Recover procedural generator parameters from images")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Show a generator's parameter schema.
    Schema { generator: String },
    /// Build a mesh and write it as OBJ.
    Gen {
        generator: String,
        /// Parameters as a JSON object or a path to one; defaults when omitted.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a training dataset.
    Dataset {
        generator: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        image_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a denoiser; writes checkpoints and loss.csv into --out.
    Train {
        /// JSON training config; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover parameters from a PGM image.
    Invert {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Metropolis-Hastings search with mask features.
    Mcmc {
        #[arg(long)]
        image: PathBuf,
        generator: String,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 0.01)]
        temperature: f64,
        /// Write the chain trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a checkpoint on a test dataset against a random baseline.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        testset: PathBuf,
        /// Also write the full report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let json_out = cli.json;
    match execute(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let text = if json_out {
                serde_json::to_string_pretty(&out.json).expect("JSON values serialize")
            } else {
                out.text
            };
            let _ = writeln!(stdout, "{text}");
            0
        }
        Err(e) => {
            if json_out {
                println!("{}", json!({ "error": e.to_string() }));
            }
            eprintln!("error: {e}");
            1
        }
    }
}

struct Output {
    text: String,
    json: Value,
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn load_pgm(path: &Path) -> Result<Image> {
    Image::read_pgm(std::fs::File::open(path)?)
}

fn execute(cmd: Command) -> Result<Output> {
    match cmd {
        Command::Schema { generator } => {
            let s = schema(&generator)?;
            let mut text = format!("{} ({} parameters)", s.generator_id, s.len());
            for p in &s.params {
                match &p.kind {
                    ParamKind::Continuous { min, max } => text += &format!("\n  {:<16} continuous [{min}, {max}]", p.name),
                    ParamKind::Discrete { choices } => text += &format!("\n  {:<16} one of {}", p.name, choices.join(", ")),
                }
            }
            Ok(Output { text, json: serde_json::to_value(&s)? })
        }
        Command::Gen { generator, params, out } => {
            let s = schema(&generator)?;
            let p = match params {
                None => s.default_params(),
                Some(arg) => {
                    let value = match serde_json::from_str(&arg) {
                        Ok(v) => v,
                        Err(_) => read_json(Path::new(&arg))?,
                    };
                    s.params_from_json(&value)?
                }
            };
            let mesh = generate(&s, &p)?;
            mesh.write_obj(std::io::BufWriter::new(std::fs::File::create(&out)?))?;
            let n = mesh.triangle_count();
            Ok(Output {
                text: format!("wrote {} ({} vertices, {n} triangles)", out.display(), mesh.vertices.len()),
                json: json!({ "out": out, "vertices": mesh.vertices.len(), "triangles": n }),
            })
        }
        Command::Dataset { generator, n, seed, image_size, out } => {
            let d = build_dataset(&generator, n, seed, image_size)?;
            d.save(&out)?;
            let hash = format!("{:016x}", d.content_hash());
            Ok(Output {
                text: format!("wrote {} ({n} items, hash {hash})", out.display()),
                json: json!({ "out": out, "items": n, "hash": hash }),
            })
        }
        Command::Train { config, dataset, out } => {
            let cfg: TrainConfig = match config {
                Some(p) => serde_json::from_value(read_json(&p)?)?,
                None => TrainConfig::default(),
            };
            let d = Dataset::load(&dataset)?;
            let r = train(&cfg, &d, Some(&out))?;
            let hash = format!("{:016x}", r.checkpoint.content_hash()?);
            let last = r.log.last().map_or(f64::NAN, |l| l.loss);
            Ok(Output {
                text: format!("trained {} steps, final loss {last:.5}, checkpoint hash {hash}", r.checkpoint.step),
                json: json!({ "steps": r.checkpoint.step, "final_loss": last, "hash": hash, "out": out }),
            })
        }
        Command::Invert { image, ckpt, k, seed } => {
            let img = load_pgm(&image)?;
            let ck = Checkpoint::load(&ckpt)?;
            let s = schema(&ck.generator_id)?;
            let results = invert(&img, &ck, k, seed)?;
            let rows: Vec<Value> =
                results.iter().map(|c| json!({ "params": s.params_to_json(&c.params), "score": c.score })).collect();
            let text = rows
                .iter()
                .enumerate()
                .map(|(i, r)| format!("#{} score {:.6}  {}", i + 1, r["score"].as_f64().unwrap_or(f64::NAN), r["params"]))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output { text, json: json!(rows) })
        }
        Command::Mcmc { image, generator, iters, seed, sigma, temperature, trace } => {
            let img = load_pgm(&image)?;
            let opts = McmcOptions { iters, seed, step_sigma: sigma, temperature, ..McmcOptions::default() };
            let r = mh_run(&img, &generator, &opts, &Features::default())?;
            if let Some(path) = &trace {
                r.write_trace(std::fs::File::create(path)?)?;
            }
            let params = schema(&generator)?.params_to_json(&r.best);
            Ok(Output {
                text: format!(
                    "best score {:.6} at iteration {} (acceptance {:.2})\n{params}",
                    r.best_state.score,
                    r.best_state.iteration,
                    r.acceptance_rate()
                ),
                json: json!({
                    "params": params,
                    "score": r.best_state.score,
                    "iteration": r.best_state.iteration,
                    "acceptance_rate": r.acceptance_rate(),
                    "forward_count": r.forward_count,
                }),
            })
        }
        Command::Eval { ckpt, testset, out } => {
            let ck = Checkpoint::load(&ckpt)?;
            let d = Dataset::load(&testset)?;
            if d.generator_id != ck.generator_id {
                return Err(invalid(format!("test set is `{}`, checkpoint is `{}`", d.generator_id, ck.generator_id)));
            }
            let s = schema(&d.generator_id)?;
            let items = d
                .items
                .iter()
                .map(|it| Ok((it.image.clone(), crate::canon::decanonicalize(&s, &it.x)?)))
                .collect::<Result<Vec<_>>>()?;
            let report = evaluate(&ck, &items, &EvalOptions::default())?;
            let value = serde_json::to_value(&report)?;
            if let Some(path) = &out {
                std::fs::write(path, serde_json::to_vec_pretty(&value)?)?;
            }
            let (a, b) = (report.aggregate, report.baseline);
            Ok(Output {
                text: format!(
                    "{} items ({} skipped)\n          CD      EMD     F-Score\nmodel     {:.4}  {:.4}  {:.4}\nrandom    {:.4}  {:.4}  {:.4}",
                    report.count,
                    report.skipped.len(),
                    a.cd,
                    a.emd,
                    a.fscore,
                    b.cd,
                    b.emd,
                    b.fscore
                ),
                json: value,
            })
        }
        Command::Serve { config } => {
            let cfg: ServiceConfig = match config {
                Some(p) => serde_json::from_value(read_json(&p)?)?,
                None => ServiceConfig::default(),
            };
            eprintln!("listening on {}", cfg.bind_address());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(cfg))?;
            Ok(Output { text: "server stopped".into(), json: json!({ "stopped": true }) })
        }
    }
}

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use polinfer::document::{load_model, parse_json, pretty_json, LoadedModel, ScenarioDocument, SCHEMA_VERSION};
use polinfer::pollinator::{self, CalibrationOptions};
use polinfer::runs::{evaluate, Evaluation, RunRecord};
use polinfer::temporal::{slice_sensitivity, DEFAULT_HORIZON};
use serde::Serialize;

use crate::output::{contributions_csv, sensitivity_csv, timeline_csv, write_all};

#[derive(Debug, Parser)]
#[command(
    name = "polinfer",
    version,
    about = "Pollinator policy scenarios on a dynamic Bayesian network"
)]
pub struct Cli {
    /// Model document; defaults to the bundled calibrated pollinator model.
    #[arg(long, global = true, env = "POLINFER_MODEL_PATH")]
    pub model: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model (and optionally a scenario against it).
    Validate {
        /// Model file to check; overrides --model.
        file: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Evaluate a scenario and write timeline.csv, contributions.csv and run.json.
    Run {
        /// Scenario document; omit for the no-intervention baseline.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides the scenario's horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Rank nodes by mutual information with a target at one slice.
    Sensitivity {
        #[arg(long, default_value = pollinator::HONEYBEE)]
        target: String,
        #[arg(long, default_value_t = 2)]
        slice: usize,
        #[arg(long)]
        top: Option<usize>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the pollinator model to the published anchors and export it.
    Calibrate {
        #[arg(long, default_value_t = CalibrationOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = CalibrationOptions::default().restarts)]
        restarts: usize,
        #[arg(long, default_value_t = CalibrationOptions::default().max_sweeps)]
        sweeps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP/JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory for persisted runs.
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
    },
}

/// `--model` / `POLINFER_MODEL_PATH`, else the bundled model.
pub fn resolve_model(path: Option<&Path>) -> Result<LoadedModel> {
    match path {
        Some(p) => load_model(p).context("loading model"),
        None => pollinator::bundled_model().context("loading the bundled model"),
    }
}

pub fn read_scenario(path: &Path) -> Result<ScenarioDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

pub fn baseline_scenario() -> ScenarioDocument {
    ScenarioDocument {
        schema_version: SCHEMA_VERSION,
        name: "baseline".into(),
        description: "No change".into(),
        interventions: Vec::new(),
        horizon: DEFAULT_HORIZON,
        utility: None,
    }
}

/// What `run` writes to run.json: the evaluation under its run id.
#[derive(Serialize)]
pub struct RunOutput<'a> {
    pub run_id: String,
    #[serde(flatten)]
    pub evaluation: &'a Evaluation,
}

pub fn execute(cli: Cli) -> Result<()> {
    let model_path = cli.model.as_deref();
    match cli.command {
        Command::Validate { file, scenario } => {
            let model = resolve_model(file.as_deref().or(model_path))?;
            println!(
                "model ok: {} ({} variables) hash {}",
                model.document.name,
                model.dbn.len(),
                model.hash
            );
            if let Some(path) = scenario {
                let doc = read_scenario(&path)?;
                doc.resolve(&model.dbn)
                    .with_context(|| format!("scenario {}", path.display()))?;
                println!("scenario ok: {}", doc.name);
            }
            Ok(())
        }
        Command::Run { scenario, horizon, out } => {
            let model = resolve_model(model_path)?;
            let mut doc = match scenario {
                Some(p) => read_scenario(&p)?,
                None => baseline_scenario(),
            };
            if let Some(h) = horizon {
                doc.horizon = h;
            }
            let evaluation = evaluate(&model, &doc)?;
            let run = RunOutput {
                run_id: RunRecord::id_for(&evaluation.model_hash, &evaluation.scenario)?,
                evaluation: &evaluation,
            };
            write_all(&[
                (out.join("timeline.csv"), timeline_csv(&evaluation.timeline)?),
                (out.join("contributions.csv"), contributions_csv(&evaluation.timeline)?),
                (out.join("run.json"), pretty_json(&run)?.into_bytes()),
            ])?;
            print_timeline(&evaluation);
            Ok(())
        }
        Command::Sensitivity {
            target,
            slice,
            top,
            out,
        } => {
            let model = resolve_model(model_path)?;
            let report = slice_sensitivity(&model.dbn, &target, slice, top.unwrap_or(usize::MAX))?;
            let csv = sensitivity_csv(&report)?;
            match out {
                Some(path) => write_all(&[(path, csv)])?,
                None => print!("{}", String::from_utf8(csv)?),
            }
            Ok(())
        }
        Command::Calibrate {
            seed,
            restarts,
            sweeps,
            out,
        } => {
            if sweeps == 0 {
                bail!("--sweeps must be at least 1");
            }
            let options = CalibrationOptions {
                seed,
                restarts,
                max_sweeps: sweeps,
                ..Default::default()
            };
            let fitted = pollinator::calibrate(
                &pollinator::fixed_parameters(),
                &pollinator::published_anchors(),
                &pollinator::published_scenarios(),
                &options,
            )?;
            let doc = pollinator::export_model(&fitted)?;
            write_all(&[(out.clone(), pretty_json(&doc)?.into_bytes())])?;
            let r = &fitted.report;
            let misses = r.residuals.iter().filter(|x| !x.within_tolerance).count();
            eprintln!(
                "loss {:.3e} after {} sweeps; {misses} anchors outside tolerance; {} weakly identified parameters",
                r.loss,
                r.sweeps,
                r.parameters.iter().filter(|p| p.weakly_identified).count()
            );
            println!("wrote {} hash {}", out.display(), doc.hash()?);
            Ok(())
        }
        Command::Serve { port, host, runs } => {
            let model = resolve_model(model_path)?;
            let state = crate::server::AppState::new(model, &runs)?;
            let addr = SocketAddr::new(host, port);
            tokio::runtime::Runtime::new()?.block_on(crate::server::serve(state, addr))
        }
    }
}

fn print_timeline(e: &Evaluation) {
    let t = &e.timeline;
    print!("{:>5}", "slice");
    for label in &t.targets {
        print!(" {label:>17}");
    }
    println!(" {:>8}", "utility");
    for r in &t.records {
        print!("{:>5}", r.slice);
        for p in &r.good {
            print!(" {:>16.1}%", p * 100.0);
        }
        println!(" {:>8.2}", r.utility);
    }
    println!("model {}", e.model_hash);
}

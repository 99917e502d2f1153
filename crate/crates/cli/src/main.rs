use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rnnem::cells::CellKind;
use rnnem::config::{MemoryPolicy, OptimizerKind, TrainConfig};
use rnnem::data::write_conll;
use rnnem::experiment::{self, Dataset, PREDICTIONS_FILE, SWEEP_FILE};
use rnnem::gradcheck::{gradcheck, GradcheckOptions};
use rnnem::synth::generate_synthetic;
use rnnem::Error;

const OUT_DIR_ENV: &str = "RNNEM_OUT_DIR";

#[derive(Parser)]
#[command(name = "rnnem", version, about = "Recurrent slot-filling taggers with an external memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger and write entropy.csv, model.ckpt, manifest.json and predictions.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        /// Replay a previous run from its manifest.json (other flags except --out-dir are ignored).
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
    },
    /// Score a checkpoint on a CoNLL file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write token/gold/predicted lines. Defaults to <out-dir>/predictions.conll.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences for every cell kind.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<CellKind>>,
        /// Perturb this tensor's analytic gradient (checks that failures are reported).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// Train once per slot count with everything else fixed; writes sweep.csv.
    SweepSlots {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        slots: Vec<usize>,
    },
    /// Write the synthetic corpus as train.conll and test.conll.
    GenSynth {
        #[command(flatten)]
        train: TrainArgs,
    },
}

/// Overrides applied on top of the config file (or the defaults).
#[derive(Args)]
struct TrainArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cell: Option<CellKind>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    slot_dim: Option<usize>,
    #[arg(long)]
    slot_count: Option<usize>,
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    memory_policy: Option<MemoryPolicy>,
    #[arg(long)]
    memory_init: Option<f64>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Enable global-norm clipping at this norm.
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    unk_prob: Option<f64>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    synth_seed: Option<u64>,
    #[arg(long)]
    synth_train_size: Option<usize>,
    #[arg(long)]
    synth_test_size: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig, Error> {
        let mut c = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        set! {
            cell => c.cell,
            embed_dim => c.embed_dim,
            hidden => c.hidden,
            slot_dim => c.slot_dim,
            slot_count => c.slot_count,
            window_size => c.window_size,
            epochs => c.epochs,
            seed => c.seed,
            memory_policy => c.memory_policy,
            memory_init => c.memory_init,
            optimizer => c.optimizer,
            rho => c.rho,
            eps => c.eps,
            learning_rate => c.learning_rate,
            clip_norm => c.clip_norm,
            unk_prob => c.unk_prob,
            out_dir => c.out_dir,
            synth_seed => c.synth.seed,
            synth_train_size => c.synth.train_size,
            synth_test_size => c.synth.test_size,
        }
        if self.clip_norm.is_some() {
            c.clip = true;
        }
        if let Some(p) = &self.train {
            c.train_path = Some(p.clone());
        }
        if let Some(p) = &self.test {
            c.test_path = Some(p.clone());
        }
        if let Some(p) = &self.dev {
            c.dev_path = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        context: format!("creating {}", dir.display()),
        source: e,
    })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Train { train, manifest } => {
            let run = match manifest {
                Some(m) => experiment::replay(&m, train.out_dir.clone())?,
                None => experiment::run_train(&train.resolve()?)?,
            };
            for p in &run.entropy.points {
                println!("epoch {:>3}  entropy {:.6}  log10 {:.4}", p.epoch, p.nll, p.log10_nll);
            }
            if let Some(report) = &run.test_report {
                print!("{report}");
            }
            println!("artifacts in {}", run.out_dir.display());
        }
        Command::Eval {
            checkpoint,
            data,
            predictions,
            out_dir,
        } => {
            let predictions = match (predictions, out_dir) {
                (Some(p), _) => p,
                (None, Some(dir)) => {
                    create_dir(&dir)?;
                    dir.join(PREDICTIONS_FILE)
                }
                (None, None) => PathBuf::from(PREDICTIONS_FILE),
            };
            let report = experiment::run_eval(&checkpoint, &data, Some(&predictions))?;
            print!("{report}");
            println!("predictions in {}", predictions.display());
        }
        Command::Gradcheck {
            seed,
            samples,
            cells,
            corrupt,
        } => {
            let report = gradcheck(&GradcheckOptions {
                seed,
                samples,
                kinds: cells.unwrap_or_else(|| CellKind::ALL.to_vec()),
                corrupt,
                ..GradcheckOptions::default()
            })?;
            println!("{report}");
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::SweepSlots { train, slots } => {
            let cfg = train.resolve()?;
            let data = Dataset::resolve(&cfg)?;
            let rows = experiment::sweep_slots(&cfg, &slots, &data)?;
            create_dir(&cfg.out_dir)?;
            let path = cfg.out_dir.join(SWEEP_FILE);
            experiment::write_sweep_csv(&rows, &path)?;
            println!("{:>6} {:>8} {:>10}", "n", "F1", "entropy");
            for r in &rows {
                match (&r.f1, &r.entropy, &r.error) {
                    (Some(f1), Some(e), _) => println!("{:>6} {:>8.2} {:>10.6}", r.slot_count, f1, e),
                    (_, _, err) => println!("{:>6} failed: {}", r.slot_count, err.as_deref().unwrap_or("unknown")),
                }
            }
            println!("table in {}", path.display());
            if rows.iter().all(|r| r.error.is_some()) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::GenSynth { train } => {
            let cfg = train.resolve()?;
            let (tr, te) = generate_synthetic(&cfg.synth)?;
            create_dir(&cfg.out_dir)?;
            write_conll(cfg.out_dir.join("train.conll"), &tr)?;
            write_conll(cfg.out_dir.join("test.conll"), &te)?;
            println!("train: {:?}", tr.stats());
            println!("test:  {:?}", te.stats());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

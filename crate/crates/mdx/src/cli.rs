//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rhotic_core::features::FeatureSet;

use crate::config::RunConfig;
use crate::error::{MdxError, Result};

#[derive(Debug, Parser)]
#[command(name = "rhotic-mdx", about = "Rhotic speech classification pipeline", disable_version_flag = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// FORMANTS5, TV6, TV9 or FUSED14 (repeatable or comma separated).
    #[arg(long = "feature-set", global = true, value_name = "NAME", value_delimiter = ',')]
    pub feature_sets: Vec<String>,
    /// Select hyperparameters by grid search before training.
    #[arg(long, global = true)]
    pub grid: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract feature caches from audio, annotations and TV tracks.
    Extract,
    /// Leave-one-participant-out training.
    Train,
    /// Aggregate fold reports.
    Evaluate,
    /// Effect sizes and binned trajectories.
    Analyze,
    /// Write a synthetic four-speaker corpus.
    Synth,
    /// Print the version.
    Version,
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if !self.feature_sets.is_empty() {
            cfg.feature_sets = self
                .feature_sets
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<FeatureSet>()
                        .map_err(|e| MdxError::usage(format!("--feature-set: {e}")))
                })
                .collect::<Result<_>>()?;
        }
        if self.grid {
            cfg.grid = true;
        }
        cfg.sync();
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<()> {
    if let Command::Version = cli.command {
        println!("rhotic-mdx {}", crate::VERSION);
        return Ok(());
    }
    let cfg = cli.global.resolve()?;
    match cli.command {
        Command::Extract => {
            let s = crate::extract::cmd_extract(&cfg)?;
            println!("extracted {} utterances, {} failed", s.extracted, s.failures.len());
        }
        Command::Train => {
            let s = crate::train::cmd_train(&cfg)?;
            for (set, folds) in &s.sets {
                let trained = folds.iter().filter(|f| f.retrained).count();
                println!("{set}: {} folds ({trained} trained, {} up to date)", folds.len(), folds.len() - trained);
            }
        }
        Command::Evaluate => {
            let r = crate::evaluate::cmd_evaluate(&cfg)?;
            for s in &r.sets {
                let auroc = s.auroc.map_or_else(|| "n/a".to_string(), |a| format!("{:.3}", a.mean));
                println!(
                    "{}: weighted F1 {:.3} (sd {:.3}), AUROC {auroc}, {} folds",
                    s.feature_set, s.f1_weighted.mean, s.f1_weighted.sd, s.n_folds
                );
            }
        }
        Command::Analyze => {
            for r in crate::analyze::cmd_analyze(&cfg)? {
                let top = r.strongest();
                println!(
                    "{}: largest |d| on {} (d = {:.3}, {})",
                    r.feature_set,
                    top.channel,
                    top.effect.d,
                    top.effect.label.as_str()
                );
            }
        }
        Command::Synth => {
            let s = crate::synth::cmd_synth(&cfg)?;
            println!(
                "wrote {} utterances ({} rhotic) to {}; config at {}",
                s.utterances,
                s.rhotic,
                s.dir.display(),
                s.config_path.display()
            );
        }
        Command::Version => unreachable!(),
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "rhotic-mdx",
            "train",
            "--seed",
            "3",
            "--out",
            "x",
            "--feature-set",
            "TV6,FORMANTS5",
            "--feature-set",
            "TV9",
            "--set",
            "train.max_epochs=2",
            "--grid",
        ])
        .unwrap();
        let cfg = cli.global.resolve().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train.seed, 3);
        assert_eq!(cfg.out, PathBuf::from("x"));
        assert_eq!(cfg.feature_sets, vec![FeatureSet::Tv6, FeatureSet::Formants5, FeatureSet::Tv9]);
        assert_eq!(cfg.train.max_epochs, 2);
        assert!(cfg.grid);
    }

    #[test]
    fn exit_codes_for_parse_outcomes() {
        assert_eq!(run(["rhotic-mdx", "version"]), 0);
        assert_eq!(run(["rhotic-mdx", "--help"]), 0);
        assert_eq!(run(["rhotic-mdx", "frobnicate"]), 1);
        assert_eq!(run(["rhotic-mdx", "extract", "--feature-set", "MFCC"]), 1);
        assert_eq!(run(["rhotic-mdx", "extract"]), 1);
    }
}

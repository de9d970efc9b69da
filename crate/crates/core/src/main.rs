use adversarial_traffic::commands::{self, CommandError, RULE_BASED};
use adversarial_traffic::config::RunConfig;
use adversarial_traffic::hardening::Method;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "advtraffic", version, about = "Adversarial traffic agents and safety hardening")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "CRASH_SEED")]
    seed: Option<u64>,
    /// Overrides train.transitions and cycles.transitions_per_training.
    #[arg(long, global = true)]
    transitions: Option<u64>,
    #[arg(long, global = true)]
    cycles: Option<u32>,
    /// local, uniform or prioritized.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Overrides eval.episodes.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = "CRASH_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Train an adversarial NPC against an Ego.
    Falsify {
        /// `idm_mobil` or an Ego weight blob.
        #[arg(long, default_value = RULE_BASED)]
        ego: String,
    },
    /// Run falsification/hardening cycles.
    Harden,
    /// Greedy crash rate of one Ego against one NPC.
    Evaluate {
        #[arg(long, default_value = RULE_BASED)]
        ego: String,
        #[arg(long)]
        npc: String,
    },
    /// Rate a new agent against a saved pool and update its manifest.
    Tournament {
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        pool: PathBuf,
    },
    /// Ego speed and crash curves against rule-based and adversarial traffic.
    Speedtrace {
        #[arg(long)]
        ego: String,
        #[arg(long)]
        npc: String,
    },
    /// Train an Ego against a uniform mix of opponents.
    TrainEgo {
        /// `idm_mobil` or NPC weight blobs; repeatable.
        #[arg(long = "opponent", required = true)]
        opponents: Vec<String>,
        /// Give the Ego the adversary flag as an extra input.
        #[arg(long)]
        augmented: bool,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let c = cli.common;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.transitions {
        cfg.train.transitions = t;
        cfg.cycles.transitions_per_training = t;
    }
    if let Some(n) = c.cycles {
        cfg.cycles.n_cycles = n;
    }
    if let Some(m) = c.method {
        cfg.cycles.method = m;
    }
    if let Some(e) = c.episodes {
        cfg.eval.episodes = e;
    }
    cfg.validate()?;
    let jobs = c.jobs.max(1);
    match cli.command {
        Command::Falsify { ego } => {
            let r = commands::falsify(&cfg, &ego, &c.out)?;
            println!(
                "falsify vs {}: {} episodes, rolling CR {:?}, greedy CR {}",
                r.opponent, r.episodes, r.final_rolling_crash_rate, r.greedy_eval_crash_rate
            );
        }
        Command::Harden => {
            let r = commands::harden(&cfg, jobs, &c.out)?;
            println!("harden ({}): egos {:?}, npcs {:?}", r.method, r.ego_agents, r.npc_agents);
        }
        Command::Evaluate { ego, npc } => {
            let r = commands::evaluate(&cfg, &ego, &npc, &c.out)?;
            println!("CR {} over {} episodes", r.crash_rate, r.episodes);
        }
        Command::Tournament { agent, id, pool } => {
            let r = commands::tournament(&cfg, &agent, id.as_deref(), &pool, jobs, &c.out)?;
            println!("{}: rating {} after {} episodes", r.agent, r.final_rating, r.matches.len());
        }
        Command::Speedtrace { ego, npc } => {
            let t = commands::speedtrace(&cfg, &ego, &npc, &c.out)?;
            println!(
                "in band vs rule-based {}, above band {}; CR vs adversary {}",
                t.rule_based.fraction_in_band, t.rule_based.fraction_above_band, t.adversarial.crash_rate
            );
        }
        Command::TrainEgo { opponents, augmented } => {
            let t = commands::train_ego(&cfg, &opponents, augmented, &c.out)?;
            println!("train-ego: {} episodes, rolling CR {:?}", t.len(), t.tail_crash_rate(100));
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

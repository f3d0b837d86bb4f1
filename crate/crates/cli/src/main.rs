use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lcmv::beamformer::BeamformerKind;
use lcmv::experiment::{
    export_response, run_experiment, sweep_delay_curve, ExperimentConfig, Pipeline, ResultTable,
};
use lcmv::io;
use lcmv::scenario::{ScenarioFilters, ScenarioKind};
use lcmv::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lcmv",
    version,
    about = "LCMV beamformer design and Monte-Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated variants, e.g. A,C,E.
    #[arg(long, global = true)]
    variants: Option<String>,

    /// Monte-Carlo instance count.
    #[arg(long = "n-mc", global = true)]
    n_mc: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "lcmv-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Comm,
    Radar,
}

impl From<Scenario> for ScenarioKind {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Comm => ScenarioKind::Comm,
            Scenario::Radar => ScenarioKind::Radar,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Design the variants on one instance and export their weights.
    Design {
        #[arg(long, value_enum, default_value = "comm")]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Export angle-frequency magnitude responses of the designs on one instance.
    Respond {
        #[arg(long, value_enum, default_value = "comm")]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Export the noise power against group delay for one instance.
    SweepDelay {
        #[arg(long, value_enum, default_value = "comm")]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Monte-Carlo campaign over the communication scenario.
    RunComm,
    /// Monte-Carlo campaign over the radar scenario.
    RunRadar,
    /// Export the scenario's shaping and receiver filter taps.
    Filters {
        #[arg(long, value_enum, default_value = "comm")]
        scenario: Scenario,
    },
}

fn load_config(cli: &Cli, kind: ScenarioKind, strict: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let cfg = ExperimentConfig::from_toml_str(&text, kind)?;
            if strict && cfg.scenario.scenario != kind {
                return Err(Error::Config(format!(
                    "configuration is for the {:?} scenario",
                    cfg.scenario.scenario
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(lcmv::scenario::ScenarioConfig::preset(kind)),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.scenario.seed = seed;
    }
    if let Some(v) = &cli.variants {
        cfg.variants = BeamformerKind::parse_list(v)?;
    }
    if let Some(n) = cli.n_mc {
        cfg.n_mc = n;
    }
    cfg.out_dir = Some(cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn print_table(t: &ResultTable) {
    println!("variant  mean_snr_db  se_snr_db  mean_q_t  se_q_t  instances");
    for r in &t.rows {
        println!(
            "{:<7}  {:>11.4}  {:>9.4}  {:>8.4}  {:>6.4}  {:>9}",
            r.kind, r.mean_snr_db, r.se_snr_db, r.mean_group_delay, r.se_group_delay, r.count
        );
    }
    println!(
        "failures {} of {}; wall clock {:.1} s",
        t.failures.len(),
        t.n_mc,
        t.wall_clock_s
    );
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Design { scenario, instance } => {
            let cfg = load_config(cli, (*scenario).into(), false)?;
            let p = Pipeline::new(&cfg)?;
            let inst = p.instance(*instance)?;
            println!("look_direction_deg {}", inst.look_direction.to_degrees());
            for rep in p.design(&inst)? {
                io::write_design_csv(create(out, &format!("design_{}.csv", rep.kind))?, &rep)?;
                println!("{} q_t {} power {}", rep.kind, rep.group_delay, rep.power);
            }
        }
        Command::Respond { scenario, instance } => {
            let cfg = load_config(cli, (*scenario).into(), false)?;
            let p = Pipeline::new(&cfg)?;
            let inst = p.instance(*instance)?;
            let ws = cfg.scenario.array()?.spatial_frequency();
            for rep in p.design(&inst)? {
                let grid = export_response(&rep, ws)?;
                io::write_response_csv(create(out, &format!("response_{}.csv", rep.kind))?, &grid)?;
                println!("{} response_{}.csv", rep.kind, rep.kind);
            }
        }
        Command::SweepDelay { scenario, instance } => {
            let cfg = load_config(cli, (*scenario).into(), false)?;
            let p = Pipeline::new(&cfg)?;
            let inst = p.instance(*instance)?;
            let curve = sweep_delay_curve(&inst, &cfg.scenario, &cfg.bank)?;
            io::write_delay_curve_csv(create(out, "delay_curve.csv")?, &curve)?;
            println!(
                "E q_t {} power {}",
                curve.min_power.group_delay, curve.min_power.power
            );
            println!(
                "F q_t {} power {}",
                curve.min_latency.group_delay, curve.min_latency.power
            );
        }
        Command::RunComm | Command::RunRadar => {
            let kind = if matches!(cli.command, Command::RunComm) {
                ScenarioKind::Comm
            } else {
                ScenarioKind::Radar
            };
            let cfg = load_config(cli, kind, true)?;
            let table = run_experiment(&cfg)?;
            io::write_result_table_csv(create(out, "results.csv")?, &table)?;
            io::write_instances_csv(create(out, "instances.csv")?, &table)?;
            print_table(&table);
        }
        Command::Filters { scenario } => {
            let cfg = load_config(cli, (*scenario).into(), false)?;
            let f = ScenarioFilters::design(&cfg.scenario)?;
            for (name, filter) in [
                ("pulse", &f.pulse),
                ("interferer", &f.interferer),
                ("jammer", &f.jammer),
                ("receiver", &f.receiver),
            ] {
                io::write_filter_csv(create(out, &format!("filter_{name}.csv"))?, name, filter)?;
                println!("{name} taps {}", filter.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('"', "'");
            eprintln!("error kind={} message=\"{msg}\"", e.kind());
            ExitCode::from(2)
        }
    }
}

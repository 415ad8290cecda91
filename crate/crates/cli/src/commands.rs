use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rpf_core::eval::{
    compare, plot_comparison, plot_trace, ComparisonTable, EpisodeTrace, Planner, PlannerKind, ReplayTable,
};
use rpf_core::ppo::trainer::episode_seed;
use rpf_core::ppo::{save_checkpoint, EpisodeLog, TrainSetup, Trainer};

use crate::config::RunConfig;
use crate::{Common, EvalArgs, PlotArgs, ReplayArgs, TrainArgs};

/// Writes through a sibling temporary file so readers never see partial output.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = &common.scenario {
        cfg.scenario = s.clone();
    }
    if common.robots.is_some() {
        cfg.robots = common.robots;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.max_steps {
        cfg.world.max_steps = m;
    }
    Ok(cfg)
}

fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&args.common)?;
    if let Some(p) = args.planner {
        cfg.planner = p;
    }
    if let Some(e) = args.episodes {
        cfg.ppo.episodes = e;
    }
    if let Some(lr) = args.lr {
        cfg.ppo.lr_initial = lr;
    }
    if let Some(z) = args.batch_interval {
        cfg.ppo.batch_interval = z;
    }
    if let Some(d) = args.embed_dim {
        cfg.network.embed_dim = d;
    }
    if let Some(h) = args.hidden {
        cfg.network.hidden = h;
    }
    if let Some(k) = args.checkpoint_every {
        cfg.checkpoint_every = k;
    }
    cfg.validate()?;
    let arch = cfg.arch()?;
    let scenarios = cfg.scenarios()?;
    scenarios.sample(episode_seed(cfg.seed, 0)).context("sampling the first training scenario")?;
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("runs/train"));

    let setup = TrainSetup {
        world: cfg.world.clone(),
        scenarios,
        arch,
        ppo: cfg.ppo.clone(),
        apf: cfg.apf.clone(),
        seed: cfg.seed,
    };
    let mut trainer = Trainer::new(setup)?;

    create_out_dir(&out)?;
    write_atomic(&out.join("run_config.toml"), cfg.to_toml().as_bytes())?;
    let log_path = out.join("train_log.csv");
    let mut log = io::BufWriter::new(
        fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    writeln!(log, "{}", EpisodeLog::CSV_HEADER)?;

    for _ in 0..cfg.ppo.episodes {
        let row = trainer
            .run_episode()
            .with_context(|| format!("training aborted in episode {}", trainer.episode()))?;
        writeln!(log, "{}", row.csv_row())?;
        log.flush()?;
        if !args.quiet {
            println!(
                "episode {:>5}  return {:>9.2}  success {:.2}  collision {:.2}  steps {:>4}  updates {}",
                row.episode, row.return_mean, row.success_rate, row.collision_rate, row.steps, row.updates
            );
        }
        let done = trainer.episode();
        if done % cfg.checkpoint_every == 0 && done < cfg.ppo.episodes {
            let path = out.join(format!("checkpoint_ep{done:06}.rpfc"));
            save_checkpoint(&path, trainer.params(), Some(trainer.optimizer()), done)?;
        }
    }
    let path = out.join("checkpoint.rpfc");
    save_checkpoint(&path, trainer.params(), Some(trainer.optimizer()), trainer.episode())?;
    println!("wrote {} and {}", log_path.display(), path.display());
    Ok(())
}

/// Parses `planner=path` pairs; a bare path binds to the only learned planner.
fn checkpoint_flags(flags: &[String], planners: &[PlannerKind]) -> Result<Vec<(PlannerKind, PathBuf)>> {
    let learned: Vec<PlannerKind> = planners.iter().copied().filter(|p| p.is_learned()).collect();
    flags
        .iter()
        .map(|f| match f.split_once('=') {
            Some((name, path)) => Ok((name.parse::<PlannerKind>()?, PathBuf::from(path))),
            None => match learned.as_slice() {
                [only] => Ok((*only, PathBuf::from(f))),
                _ => bail!("bare --checkpoint {f:?} is ambiguous; use planner=path"),
            },
        })
        .collect()
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut cfg = resolve(&args.common)?;
    if let Some(p) = &args.planners {
        cfg.eval.planners = p.clone();
    }
    if let Some(n) = args.seeds {
        cfg.eval.seeds = n;
    }
    if let Some(s) = args.seed_start {
        cfg.eval.seed_start = s;
    }
    for (kind, path) in checkpoint_flags(&args.checkpoints, &cfg.eval.planners)? {
        cfg.eval.checkpoints.insert(kind, path);
    }
    cfg.validate()?;
    if cfg.eval.planners.is_empty() {
        bail!("no planners given");
    }
    if cfg.eval.seeds == 0 {
        bail!("seeds must be at least 1");
    }
    let scenarios = cfg.scenarios()?;
    let planners = cfg
        .eval
        .planners
        .iter()
        .map(|&kind| {
            if !kind.is_learned() {
                return Ok(Planner::vanilla());
            }
            let path = cfg
                .eval
                .checkpoints
                .get(&kind)
                .with_context(|| format!("no checkpoint given for planner {}", kind.as_str()))?;
            Ok(Planner::load(kind, path)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..cfg.eval.seeds as u64).map(|i| cfg.eval.seed_start + i).collect();
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("runs/eval"));

    let mut traces = Vec::new();
    let table = compare(&planners, &scenarios, &seeds, &cfg.world, &cfg.apf, |t| {
        if !args.no_traces {
            traces.push(t.clone());
        }
    });

    create_out_dir(&out)?;
    if !traces.is_empty() {
        let dir = out.join("traces");
        create_out_dir(&dir)?;
        for t in &traces {
            write_atomic(&dir.join(format!("{}_seed{}.json", t.planner, t.seed)), t.to_json().as_bytes())?;
        }
    }
    let csv = out.join("comparison.csv");
    write_atomic(&csv, table.to_csv().as_bytes())?;
    print!("{}", table.summary_text());
    println!("wrote {}", csv.display());
    Ok(())
}

pub fn replay(args: ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let csv = ReplayTable::parse(&text).with_context(|| format!("parsing {}", args.input.display()))?.to_csv();
    match &args.out {
        Some(path) => {
            if path == &args.input {
                bail!("refusing to overwrite the input file");
            }
            write_atomic(path, csv.as_bytes())
        }
        None => {
            io::stdout().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let svg = if text.trim_start().starts_with('{') {
        plot_trace(&EpisodeTrace::from_json(&text).with_context(|| format!("parsing trace {}", args.input.display()))?)
    } else {
        let table = ComparisonTable::from_csv(&text).with_context(|| format!("parsing {}", args.input.display()))?;
        if table.rows.is_empty() {
            bail!("{} has no comparison rows", args.input.display());
        }
        plot_comparison(&table)
    };
    let out = args.out.clone().unwrap_or_else(|| args.input.with_extension("svg"));
    if out == args.input {
        bail!("refusing to overwrite the input file");
    }
    write_atomic(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

//! Command-line front end.
//!
//! Seeds resolve as `--seed`, then `seed` in the config file, then the
//! `QCTRL_SEED` environment variable, then 0.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::control::{care_residual, dare_residual, solve_care, solve_dare, PolicyKind, RiccatiProblem};
use crate::gauss::steady_covariances;

use super::config::{parse_pairs, ExperimentConfig, Problem};
use super::eval::{self, Controller};
use super::surface;
use super::training;
use super::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "qctrl", version, about = "Measurement-based feedback control of a quantum particle")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    pub episodes: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["cooling-paper", "inverted-paper", "quartic-paper"])]
    pub preset: Option<String>,
    /// Controller kind, e.g. optimal, bang-bang, gaussian, dqn.
    #[arg(long, global = true)]
    pub controller: Option<String>,
    /// Network file for the dqn controller.
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Network input: moments, wavefunction or measurement.
    #[arg(long, global = true)]
    pub input: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Run episodes and write them to episodes.csv.
    Simulate,
    /// Train a DQN agent.
    Train,
    /// Score a controller with the protocol of its problem.
    Evaluate,
    /// Force map over (⟨x⟩, ⟨p⟩).
    Surface,
    /// Linear-quadratic gains of the oscillator.
    Riccati,
    /// Quick internal consistency checks.
    Selftest,
}

fn cfg_err(s: impl Into<String>) -> HarnessError {
    HarnessError::Config(s.into())
}

/// Builds the configuration from preset, file, environment and flags.
pub fn resolve(common: &Common, env_seed: Option<&str>) -> Result<ExperimentConfig, HarnessError> {
    let pairs = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
            parse_pairs(&text)?
        }
        None => Default::default(),
    };
    let mut c = match (&common.preset, pairs.get("problem")) {
        (Some(name), _) => ExperimentConfig::preset_by_name(name).ok_or_else(|| cfg_err(format!("unknown preset '{name}'")))?,
        (None, Some(p)) => ExperimentConfig::preset(Problem::parse(p).ok_or_else(|| cfg_err(format!("unknown problem '{p}'")))?),
        (None, None) => ExperimentConfig::preset(Problem::Cooling),
    };
    for (k, v) in &pairs {
        c.set(k, v)?;
    }
    if !pairs.contains_key("seed") {
        if let Some(s) = env_seed {
            c.seed = s.trim().parse().map_err(|_| cfg_err(format!("QCTRL_SEED: cannot parse '{s}'")))?;
        }
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(n) = common.episodes {
        c.episodes = n;
    }
    if let Some(o) = &common.out {
        c.out = o.clone();
    }
    if let Some(k) = &common.controller {
        c.set("controller", k)?;
    }
    if let Some(p) = &common.checkpoint {
        c.checkpoint = Some(p.clone());
    }
    if let Some(i) = &common.input {
        c.set("input", i)?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| cfg_err(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        c.set(k.trim(), v.trim())?;
    }
    c.validate()?;
    Ok(c)
}

/// The controller named by the configuration, loading the network for `dqn`.
pub fn controller(cfg: &ExperimentConfig) -> Result<Controller, HarnessError> {
    if cfg.policy.kind != PolicyKind::Dqn {
        return Ok(Controller::Policy(cfg.policy.clone()));
    }
    let path = cfg.checkpoint.as_ref().ok_or_else(|| cfg_err("the dqn controller needs --checkpoint"))?;
    let net = qctrl_dqn::checkpoint::load::<f32>(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    Ok(Controller::Network {
        net: Arc::new(net),
        input: cfg.input,
    })
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), HarnessError> {
    if let Command::Selftest = cli.command {
        return selftest();
    }
    let env_seed = std::env::var("QCTRL_SEED").ok();
    let cfg = resolve(&cli.common, env_seed.as_deref())?;
    match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Evaluate => evaluate(&cfg),
        Command::Train => train(&cfg),
        Command::Surface => surface_cmd(&cfg),
        Command::Riccati => riccati(&cfg),
        Command::Selftest => unreachable!(),
    }
}

fn create_out(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn simulate(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let c = controller(cfg)?;
    let (est, runs) = eval::evaluate(cfg.problem, &cfg.quadratic, &cfg.quartic, &c, cfg.episodes, cfg.seed)?;
    create_out(&cfg.out)?;
    let path = cfg.out.join("episodes.csv");
    runs.write_csv(&path)?;
    std::fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    println!("{} {}: {est}", cfg.problem.name(), c.name());
    println!("wrote {}", path.display());
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let c = controller(cfg)?;
    let (est, _) = eval::evaluate(cfg.problem, &cfg.quadratic, &cfg.quartic, &c, cfg.episodes, cfg.seed)?;
    let what = match cfg.problem {
        Problem::Cooling => "mean phonon number",
        Problem::Inverted => "success rate",
        Problem::Quartic => "mean energy",
    };
    println!("{} {} {what}: {est}", cfg.problem.name(), c.name());
    Ok(())
}

fn train(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    create_out(&cfg.out)?;
    std::fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    let ckpt = cfg.out.join("checkpoints");
    let run = training::run_training(cfg, Some(ckpt), Some(cfg.out.join("metrics.csv")), |s| {
        if s.episode % 100 == 0 {
            eprintln!("episode {} reward {:.4} steps {} eps {:.4}", s.episode, s.total_reward, s.steps, s.epsilon);
        }
    })?;
    let last = cfg.out.join("final.qdqn");
    qctrl_dqn::checkpoint::save(&run.network, &last)?;
    println!(
        "trained {} episodes; {} networks saved; best score {}",
        run.outcome.episodes.len(),
        run.outcome.saved.len(),
        run.outcome.best_score
    );
    println!("wrote {}", last.display());
    Ok(())
}

fn surface_cmd(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let c = controller(cfg)?;
    let s = surface::response_surface(cfg.problem, &cfg.quadratic, &cfg.quartic, &c, &cfg.surface_x, &cfg.surface_p)?;
    s.save(&cfg.out, &format!("{} {}", cfg.problem.name(), c.name()))?;
    if let Some((a, b, cp, r2)) = surface::plane_fit(&s) {
        println!("plane fit on unclipped points: force ≈ {a:.4} + {b:.4}·x + {cp:.4}·p (R² = {r2:.10})");
    }
    println!("wrote {}", cfg.out.join("surface.csv").display());
    Ok(())
}

/// Continuous and sampled LQ problems of the oscillator with state (⟨x⟩, ⟨p⟩).
pub fn oscillator_lq(k: f64, m: f64, r: f64, tau: f64) -> Result<(RiccatiProblem, RiccatiProblem), HarnessError> {
    let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / m, -k, 0.0]);
    let g = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![k.abs() / 2.0, 1.0 / (2.0 * m)]));
    let rm = DMatrix::from_element(1, 1, r);
    let cont = RiccatiProblem::new(f.clone(), g.clone(), rm.clone(), q.clone()).map_err(|e| cfg_err(e.to_string()))?;
    // zero-order hold: exp([[F, G], [0, 0]]τ) = [[Fd, Gd], [0, 1]]
    let mut aug = DMatrix::zeros(3, 3);
    aug.view_mut((0, 0), (2, 2)).copy_from(&(f * tau));
    aug.view_mut((0, 2), (2, 1)).copy_from(&(g * tau));
    let e = aug.exp();
    let fd = e.view((0, 0), (2, 2)).into_owned();
    let gd = e.view((0, 2), (2, 1)).into_owned();
    let disc = RiccatiProblem::new(fd, gd, rm * tau, q * tau).map_err(|e| cfg_err(e.to_string()))?;
    Ok((cont, disc))
}

fn riccati(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let p = match cfg.problem {
        Problem::Quartic => return Err(cfg_err("riccati needs a quadratic problem")),
        _ => &cfg.quadratic,
    };
    let tau = p.control_dt();
    let (cont, disc) = oscillator_lq(p.k, p.m, cfg.riccati_r, tau)?;
    let sim_err = |e: crate::control::RiccatiError| HarnessError::Sim(crate::error::SimError::Config(e.to_string()));
    let pc = solve_care(&cont).map_err(sim_err)?;
    let pd = solve_dare(&disc).map_err(sim_err)?;
    let kc = cont.gain(&pc).k;
    let inner = disc.g.transpose() * &pd * &disc.g + &disc.r;
    let kd = inner.try_inverse().ok_or_else(|| cfg_err("singular discrete gain"))? * disc.g.transpose() * &pd * &disc.f;
    let out = std::io::stdout();
    let mut o = out.lock();
    writeln!(o, "k = {}, m = {}, r = {}, tau = {tau}", p.k, p.m, cfg.riccati_r)?;
    writeln!(o, "continuous P = {:?}", pc.as_slice())?;
    writeln!(o, "continuous gain F = -K·(x, p), K = [{:.6}, {:.6}]", kc[(0, 0)], kc[(0, 1)])?;
    writeln!(o, "continuous residual = {:.3e}", care_residual(&cont, &pc).amax())?;
    writeln!(o, "sampled P = {:?}", pd.as_slice())?;
    writeln!(o, "sampled gain K = [{:.6}, {:.6}]", kd[(0, 0)], kd[(0, 1)])?;
    writeln!(o, "sampled residual = {:.3e}", dare_residual(&disc, &pd).amax())?;
    Ok(())
}

/// Cheap checks that need no output directory.
pub fn selftest() -> Result<(), HarnessError> {
    let fail = |what: &str| Err(HarnessError::Sim(crate::error::SimError::Config(format!("selftest failed: {what}"))));
    let (vx, vp, c) = steady_covariances(std::f64::consts::PI, 1.0 / std::f64::consts::PI, std::f64::consts::PI, 1.0);
    if (vx - 0.45509).abs() > 1e-4 || (vp - 0.64360).abs() > 1e-4 || (c - 0.20711).abs() > 1e-4 {
        return fail("steady covariances");
    }
    let (cont, _) = oscillator_lq(std::f64::consts::PI, 1.0 / std::f64::consts::PI, 1e-2, 1.0 / 18.0)?;
    let p = solve_care(&cont).map_err(|e| cfg_err(e.to_string()))?;
    if care_residual(&cont, &p).amax() > 1e-9 {
        return fail("continuous Riccati residual");
    }
    let mut cfg = ExperimentConfig::preset(Problem::Cooling);
    cfg.quadratic.n_max = 40;
    cfg.quadratic.fail_index = 35;
    cfg.quadratic.t_max = 1.0;
    cfg.episodes = 2;
    let c = Controller::Policy(cfg.policy.clone());
    let (est, _) = eval::evaluate(cfg.problem, &cfg.quadratic, &cfg.quartic, &c, 2, 0)?;
    if !est.mean.is_finite() {
        return fail("short cooling run");
    }
    let round = ExperimentConfig::parse(&cfg.to_text())?;
    if round.to_text() != cfg.to_text() {
        return fail("config round trip");
    }
    println!("selftest ok");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common() -> Common {
        Common::default()
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let with_seed = dir.path().join("a.cfg");
        std::fs::write(&with_seed, "seed = 11\n").unwrap();
        let without = dir.path().join("b.cfg");
        std::fs::write(&without, "episodes = 3\n").unwrap();

        assert_eq!(resolve(&common(), None).unwrap().seed, 0);
        assert_eq!(resolve(&common(), Some("7")).unwrap().seed, 7);
        let mut c = common();
        c.config = Some(without.clone());
        assert_eq!(resolve(&c, Some("7")).unwrap().seed, 7);
        c.config = Some(with_seed);
        assert_eq!(resolve(&c, Some("7")).unwrap().seed, 11);
        c.seed = Some(5);
        assert_eq!(resolve(&c, Some("7")).unwrap().seed, 5);
        assert!(resolve(&common(), Some("x")).is_err());
    }

    #[test]
    fn presets_and_overrides() {
        let mut c = common();
        c.preset = Some("quartic-paper".into());
        c.set = vec!["t_max = 50".into(), "zeta=0.3".into()];
        let cfg = resolve(&c, None).unwrap();
        assert_eq!(cfg.problem, Problem::Quartic);
        assert_eq!(cfg.quartic.t_max, 50.0);
        assert_eq!(cfg.policy.zeta, 0.3);
        c.set = vec!["nonsense".into()];
        assert_eq!(resolve(&c, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["qctrl", "selftest"]), 0);
        assert_eq!(main_with_args(["qctrl", "selftest", "--no-such-flag"]), 2);
        assert_eq!(main_with_args(["qctrl", "evaluate", "--controller", "nope"]), 2);
        assert_eq!(main_with_args(["qctrl", "evaluate", "--controller", "dqn"]), 2);
    }

    #[test]
    fn lq_problems_solve() {
        let (cont, disc) = oscillator_lq(-std::f64::consts::PI, 1.0 / std::f64::consts::PI, 1e-2, 1.0 / 18.0).unwrap();
        let p = solve_care(&cont).unwrap();
        assert!(care_residual(&cont, &p).amax() < 1e-10);
        let s = solve_dare(&disc).unwrap();
        assert!(dare_residual(&disc, &s).amax() < 1e-10);
    }

    #[test]
    fn simulate_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let args = |o: &Path| {
            vec![
                "qctrl".to_string(),
                "simulate".into(),
                "--episodes".into(),
                "2".into(),
                "--set".into(),
                "n_max=40".into(),
                "--set".into(),
                "fail_index=35".into(),
                "--set".into(),
                "t_max=1".into(),
                "--out".into(),
                o.display().to_string(),
            ]
        };
        assert_eq!(main_with_args(args(&out)), 0);
        let a = std::fs::read(out.join("episodes.csv")).unwrap();
        let out2 = dir.path().join("run2");
        assert_eq!(main_with_args(args(&out2)), 0);
        assert_eq!(a, std::fs::read(out2.join("episodes.csv")).unwrap());
    }
}

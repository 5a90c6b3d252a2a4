//! A short DQN training run on a reduced cooling problem, reporting the
//! reward trend and a checkpoint round trip.
//!
//! Usage: cargo run --release --example dqn_cooling_smoke [episodes]

use qctrl::harness::config::{ExperimentConfig, Problem};
use qctrl::harness::training::run_training;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let mut cfg = ExperimentConfig::preset(Problem::Cooling);
    for (k, v) in [
        ("n_max", "40"),
        ("fail_index", "35"),
        ("t_max", "5"),
        ("train.hidden", "64,32"),
        ("train.batch_size", "64"),
        ("train.capacity_episodes", "100"),
        ("train.replays", "4"),
    ] {
        cfg.set(k, v)?;
    }
    cfg.set("train.episodes", &episodes.to_string())?;
    let dir = tempfile_dir()?;
    let run = run_training(&cfg, None, None, |s| {
        if s.episode % 20 == 0 {
            println!("episode {:4} mean reward {:.4} eps {:.3}", s.episode, s.mean_reward, s.epsilon);
        }
    })?;
    let rewards: Vec<f64> = run.outcome.episodes.iter().map(|s| s.mean_reward).collect();
    let k = (rewards.len() / 10).max(1);
    println!("median reward first {k}: {:.4}, last {k}: {:.4}", median(&rewards[..k]), median(&rewards[rewards.len() - k..]));
    let path = dir.join("smoke.qdqn");
    qctrl_dqn::checkpoint::save(&run.network, &path)?;
    let back = qctrl_dqn::checkpoint::load::<f32>(&path)?;
    println!("checkpoint round trip identical: {}", back.params() == run.network.params());
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let d = std::env::temp_dir().join("qctrl-smoke");
    std::fs::create_dir_all(&d)?;
    Ok(d)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s[s.len() / 2]
}

//! Greedy evaluation: single episodes, crash rates, cross tables between
//! pools, speed traces and reward series.

use crate::dqn::TrainingTrace;
use crate::policy::{ActContext, Policy};
use crate::seed;
use crate::sim::{Highway, InitialConfig, SimError, Termination, EGO, NPC};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// One evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub config: InitialConfig,
    pub crashed: bool,
    pub termination: Termination,
    pub steps: u32,
    /// Ego speed after each decision step.
    pub ego_speeds: Vec<f64>,
    pub mean_ego_speed: f64,
    pub mean_npc_speed: f64,
}

/// Plays one greedy episode. The Ego sees the adversary flag set iff the NPC
/// policy is a learned network.
pub fn play_episode<R: Rng + ?Sized>(
    hw: &Highway,
    ego: &dyn Policy,
    npc: &dyn Policy,
    config: InitialConfig,
    rng: &mut R,
) -> Result<EpisodeLog, SimError> {
    let mut world = hw.spawn(config, rng);
    let ego_ctx = ActContext {
        npc_is_adversary: npc.is_learned(),
    };
    let npc_ctx = ActContext { npc_is_adversary: true };
    let mut ego_speeds = Vec::new();
    let mut npc_speed_sum = 0.0;
    let termination = loop {
        if let Some(t) = hw.status(&world) {
            break t;
        }
        let a_ego = ego.act(hw, &world, EGO, ego_ctx);
        let a_npc = npc.act(hw, &world, NPC, npc_ctx);
        hw.step(&mut world, a_ego, a_npc)?;
        ego_speeds.push(world.ego().v);
        npc_speed_sum += world.npc().v;
    };
    let steps = world.step_count;
    let n = ego_speeds.len().max(1) as f64;
    Ok(EpisodeLog {
        config,
        crashed: termination == Termination::Collision,
        termination,
        steps,
        mean_ego_speed: ego_speeds.iter().sum::<f64>() / n,
        mean_npc_speed: npc_speed_sum / n,
        ego_speeds,
    })
}

/// Runs `f` over `items` on at most `jobs` threads; results keep input order.
pub fn parallel_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchupResult {
    pub crash_rate: f64,
    pub episodes: Vec<EpisodeLog>,
}

/// Greedy crash rate of `ego` against `npc`. Episode `i` draws its
/// configuration and spawn from the stream `(seed, "matchup", [i])`.
pub fn evaluate_matchup(
    hw: &Highway,
    ego: &dyn Policy,
    npc: &dyn Policy,
    episodes: usize,
    configs: &[InitialConfig],
    seed: u64,
) -> Result<MatchupResult, SimError> {
    assert!(episodes >= 1, "at least one episode");
    assert!(!configs.is_empty(), "at least one initial configuration");
    let mut logs = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut rng = seed::stream(seed, "matchup", &[i as u64]);
        let config = configs[rng.gen_range(0..configs.len())];
        logs.push(play_episode(hw, ego, npc, config, &mut rng)?);
    }
    let crashes = logs.iter().filter(|l| l.crashed).count();
    Ok(MatchupResult {
        crash_rate: crashes as f64 / episodes as f64,
        episodes: logs,
    })
}

/// Crash rates of every Ego (rows) against every NPC (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchupMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub episodes: usize,
}

impl MatchupMatrix {
    pub fn get(&self, ego: &str, npc: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == ego)?;
        let c = self.cols.iter().position(|x| x == npc)?;
        Some(self.cells[r][c])
    }

    pub fn row_means(&self) -> Vec<f64> {
        self.cells.iter().map(|r| mean(r)).collect()
    }

    pub fn col_means(&self) -> Vec<f64> {
        (0..self.cols.len())
            .map(|c| mean(&self.cells.iter().map(|r| r[c]).collect::<Vec<_>>()))
            .collect()
    }

    pub fn overall_mean(&self) -> f64 {
        mean(&self.cells.iter().flatten().copied().collect::<Vec<_>>())
    }

    /// Table layout: one row per Ego, one column per NPC, plus a `mean`
    /// column and a final `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ego");
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",mean\n");
        for (name, (row, m)) in self.rows.iter().zip(self.cells.iter().zip(self.row_means())) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{m}");
        }
        out.push_str("mean");
        for m in self.col_means() {
            let _ = write!(out, ",{m}");
        }
        let _ = writeln!(out, ",{}", self.overall_mean());
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// A named policy taking part in a cross table.
pub struct Entrant<'a> {
    pub name: String,
    pub policy: &'a dyn Policy,
}

/// All-pairs [`evaluate_matchup`]. Cell `(r, c)` uses the seed derived from
/// `(seed, "cross", [r, c])`, so the result does not depend on `jobs`.
pub fn cross_table(
    hw: &Highway,
    egos: &[Entrant<'_>],
    npcs: &[Entrant<'_>],
    episodes: usize,
    configs: &[InitialConfig],
    seed: u64,
    jobs: usize,
) -> Result<MatchupMatrix, SimError> {
    assert!(!egos.is_empty() && !npcs.is_empty(), "pools must be non-empty");
    let pairs: Vec<(usize, usize)> = (0..egos.len())
        .flat_map(|r| (0..npcs.len()).map(move |c| (r, c)))
        .collect();
    let results = parallel_map(&pairs, jobs, |&(r, c)| {
        let cell_seed = seed::derive_seed(seed, "cross", &[r as u64, c as u64]);
        evaluate_matchup(hw, egos[r].policy, npcs[c].policy, episodes, configs, cell_seed).map(|m| m.crash_rate)
    });
    let mut cells = vec![vec![0.0; npcs.len()]; egos.len()];
    for (&(r, c), res) in pairs.iter().zip(results) {
        cells[r][c] = res?;
    }
    Ok(MatchupMatrix {
        rows: egos.iter().map(|e| e.name.clone()).collect(),
        cols: npcs.iter().map(|e| e.name.clone()).collect(),
        cells,
        episodes,
    })
}

/// Rolling crash rate over per-episode outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrashRateSeries {
    pub outcomes: Vec<bool>,
    pub window: usize,
}

impl CrashRateSeries {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must be positive");
        CrashRateSeries {
            outcomes: Vec::new(),
            window,
        }
    }

    pub fn from_trace(trace: &TrainingTrace, window: usize) -> Self {
        let mut s = Self::new(window);
        s.outcomes = trace.episodes.iter().map(|e| e.crashed).collect();
        s
    }

    pub fn push(&mut self, crashed: bool) {
        self.outcomes.push(crashed);
    }

    /// Crash rate over the window ending at episode `i` (inclusive).
    pub fn rate_at(&self, i: usize) -> f64 {
        let start = (i + 1).saturating_sub(self.window);
        let w = &self.outcomes[start..=i];
        w.iter().filter(|&&c| c).count() as f64 / w.len() as f64
    }

    pub fn rolling(&self) -> Vec<f64> {
        // Running count instead of re-summing each window.
        let mut out = Vec::with_capacity(self.outcomes.len());
        let mut crashes = 0usize;
        for (i, &c) in self.outcomes.iter().enumerate() {
            crashes += usize::from(c);
            if i >= self.window {
                crashes -= usize::from(self.outcomes[i - self.window]);
            }
            out.push(crashes as f64 / (i + 1).min(self.window) as f64);
        }
        out
    }

    pub fn last(&self) -> Option<f64> {
        (!self.outcomes.is_empty()).then(|| self.rate_at(self.outcomes.len() - 1))
    }
}

/// Per-episode accumulated rewards and their trailing moving average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSeries {
    pub rewards: Vec<f64>,
    pub smoothed: Vec<f64>,
}

pub fn accumulated_reward(trace: &TrainingTrace, window: usize) -> RewardSeries {
    let rewards: Vec<f64> = trace.episodes.iter().map(|e| e.accumulated_reward).collect();
    RewardSeries {
        smoothed: moving_average(&rewards, window),
        rewards,
    }
}

/// Trailing mean over up to `window` values; `window <= 1` is the identity.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return xs.to_vec();
    }
    (0..xs.len())
        .map(|i| mean(&xs[(i + 1).saturating_sub(window)..=i]))
        .collect()
}

/// Decision steps skipped at the start of each episode before speed statistics.
pub const STEADY_STATE_SKIP: usize = 5;

/// Ego speed statistics against one kind of traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPanel {
    pub opponent: String,
    /// Mean Ego speed per decision step index, over episodes still running.
    pub mean_speed_by_step: Vec<f64>,
    /// Rolling (window 100) crash rate by episode.
    pub rolling_crash_rate: Vec<f64>,
    pub crash_rate: f64,
    /// Steady-state steps with the Ego speed inside `[lo, hi]`.
    pub fraction_in_band: f64,
    /// Steady-state steps with the Ego speed above `hi`.
    pub fraction_above_band: f64,
    pub steady_steps: usize,
}

impl SpeedPanel {
    fn from_logs(opponent: &str, logs: &[EpisodeLog], band: [f64; 2]) -> Self {
        let horizon = logs.iter().map(|l| l.ego_speeds.len()).max().unwrap_or(0);
        let mean_speed_by_step = (0..horizon)
            .map(|k| mean(&logs.iter().filter_map(|l| l.ego_speeds.get(k).copied()).collect::<Vec<_>>()))
            .collect();
        let mut series = CrashRateSeries::new(100);
        logs.iter().for_each(|l| series.push(l.crashed));
        let steady: Vec<f64> = logs
            .iter()
            .flat_map(|l| l.ego_speeds.iter().skip(STEADY_STATE_SKIP).copied())
            .collect();
        let n = steady.len().max(1) as f64;
        SpeedPanel {
            opponent: opponent.to_string(),
            mean_speed_by_step,
            rolling_crash_rate: series.rolling(),
            crash_rate: logs.iter().filter(|l| l.crashed).count() as f64 / logs.len().max(1) as f64,
            fraction_in_band: steady.iter().filter(|&&v| v >= band[0] && v <= band[1]).count() as f64 / n,
            fraction_above_band: steady.iter().filter(|&&v| v > band[1]).count() as f64 / n,
            steady_steps: steady.len(),
        }
    }
}

/// Speed/crash curves of one Ego against rule-based and adversarial traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedTrace {
    pub band: [f64; 2],
    pub rule_based: SpeedPanel,
    pub adversarial: SpeedPanel,
}

impl SpeedTrace {
    /// Per-step mean speed for both opponent kinds.
    pub fn speed_csv(&self) -> String {
        let mut out = String::from("step,rule_based_mean_speed,adversarial_mean_speed\n");
        let n = self
            .rule_based
            .mean_speed_by_step
            .len()
            .max(self.adversarial.mean_speed_by_step.len());
        let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for k in 0..n {
            let _ = writeln!(
                out,
                "{},{},{}",
                k + 1,
                cell(self.rule_based.mean_speed_by_step.get(k)),
                cell(self.adversarial.mean_speed_by_step.get(k))
            );
        }
        out
    }

    /// Rolling crash rate by episode for both opponent kinds.
    pub fn crash_csv(&self) -> String {
        let mut out = String::from("episode,rule_based_rolling_cr,adversarial_rolling_cr\n");
        let n = self.rule_based.rolling_crash_rate.len().max(self.adversarial.rolling_crash_rate.len());
        let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for k in 0..n {
            let _ = writeln!(
                out,
                "{},{},{}",
                k,
                cell(self.rule_based.rolling_crash_rate.get(k)),
                cell(self.adversarial.rolling_crash_rate.get(k))
            );
        }
        out
    }
}

/// Plays `episodes` greedy episodes of `ego` against each kind of traffic.
#[allow(clippy::too_many_arguments)]
pub fn speed_trace_experiment(
    hw: &Highway,
    ego: &dyn Policy,
    rule_based_npc: &dyn Policy,
    adversarial_npc: &dyn Policy,
    episodes: usize,
    configs: &[InitialConfig],
    band: [f64; 2],
    seed: u64,
) -> Result<SpeedTrace, SimError> {
    let rule = evaluate_matchup(hw, ego, rule_based_npc, episodes, configs, seed::derive_seed(seed, "speed", &[0]))?;
    let adv = evaluate_matchup(hw, ego, adversarial_npc, episodes, configs, seed::derive_seed(seed, "speed", &[1]))?;
    Ok(SpeedTrace {
        band,
        rule_based: SpeedPanel::from_logs("rule_based", &rule.episodes, band),
        adversarial: SpeedPanel::from_logs("adversarial", &adv.episodes, band),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::EpisodeRecord;
    use crate::policy::RuleBasedPolicy;
    use proptest::prelude::*;

    #[test]
    fn cooperative_rule_based_drivers_do_not_crash() {
        let hw = Highway::default();
        let p = RuleBasedPolicy::default();
        let r = evaluate_matchup(&hw, &p, &p, 100, &InitialConfig::ALL, 5).unwrap();
        assert!(r.crash_rate <= 0.05, "{}", r.crash_rate);
        assert_eq!(r.episodes.len(), 100);
    }

    #[test]
    fn no_crashes_gives_exact_zero() {
        let hw = Highway::default();
        let p = RuleBasedPolicy::default();
        let r = evaluate_matchup(&hw, &p, &p, 10, &[InitialConfig::FC], 1).unwrap();
        assert!(r.episodes.iter().all(|e| !e.crashed));
        assert_eq!(r.crash_rate, 0.0);
    }

    #[test]
    fn matrix_means_match_cells() {
        let m = MatchupMatrix {
            rows: vec!["E0".into(), "E1".into()],
            cols: vec!["V1".into(), "V2".into(), "V3".into()],
            cells: vec![vec![0.86, 0.4, 0.1], vec![0.87, 0.29, 0.33]],
            episodes: 100,
        };
        let rows = m.row_means();
        assert!((rows[0] - (0.86 + 0.4 + 0.1) / 3.0).abs() < 1e-12);
        let cols = m.col_means();
        assert!((cols[1] - (0.4 + 0.29) / 2.0).abs() < 1e-12);
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("ego,V1,V2,V3,mean\n"));
        assert_eq!(m.get("E1", "V2"), Some(0.29));
    }

    #[test]
    fn one_by_one_table_equals_matchup() {
        let hw = Highway::default();
        let p = RuleBasedPolicy::default();
        let e = [Entrant { name: "E0".into(), policy: &p }];
        let n = [Entrant { name: "R".into(), policy: &p }];
        let m = cross_table(&hw, &e, &n, 20, &InitialConfig::ALL, 9, 2).unwrap();
        let direct = evaluate_matchup(&hw, &p, &p, 20, &InitialConfig::ALL, seed::derive_seed(9, "cross", &[0, 0]))
            .unwrap();
        assert_eq!(m.cells[0][0], direct.crash_rate);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        for jobs in [1, 2, 5, 64] {
            assert_eq!(parallel_map(&xs, jobs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        }
    }

    fn trace_of(rewards: &[f64]) -> TrainingTrace {
        TrainingTrace {
            episodes: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| EpisodeRecord {
                    episode: i as u64,
                    transitions: i as u64,
                    accumulated_reward: r,
                    crashed: r > 0.0,
                    rolling_crash_rate_100: 0.0,
                    epsilon: 0.0,
                    elo: None,
                    config: InitialConfig::BL,
                    opponent: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn smoothing_window_one_is_identity() {
        let t = trace_of(&[1.0, -2.0, 400.0]);
        let s = accumulated_reward(&t, 1);
        assert_eq!(s.rewards, s.smoothed);
        assert!(accumulated_reward(&trace_of(&[]), 10).rewards.is_empty());
        assert_eq!(moving_average(&[2.0, 4.0, 6.0], 2), vec![2.0, 3.0, 5.0]);
    }

    proptest! {
        #[test]
        fn rolling_rate_matches_naive_window(outcomes in proptest::collection::vec(any::<bool>(), 1..400), window in 1usize..150) {
            let mut s = CrashRateSeries::new(window);
            outcomes.iter().for_each(|&c| s.push(c));
            let fast = s.rolling();
            for (i, r) in fast.iter().enumerate() {
                let lo = (i + 1).saturating_sub(window);
                let naive = outcomes[lo..=i].iter().filter(|&&c| c).count() as f64 / (i + 1 - lo) as f64;
                prop_assert_eq!(*r, naive);
                prop_assert_eq!(s.rate_at(i), naive);
                prop_assert!((0.0..=1.0).contains(r));
            }
        }
    }
}

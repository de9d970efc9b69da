//! Independent oracles shared by the per-topic test files and the acceptance
//! report. Each check returns an [`Outcome`] instead of panicking so the
//! acceptance runner can print every result.

#![allow(dead_code)]

use adversarial_traffic::dqn::{ReplayBuffer, Role, Transition};
use adversarial_traffic::hardening::{
    elo_expected, elo_update, paired_update, select_opponent, AgentRecord, EloParams, Method, ModelPool,
};
use adversarial_traffic::nn::Mlp;
use adversarial_traffic::planners::{
    idm_acceleration, mobil_decide, IdmParams, LaneChange, LaneNeighbors, MobilParams, NeighborSet,
};
use adversarial_traffic::sim::{detect_collision, InitialConfig, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }

    pub fn all(parts: Vec<(&str, Outcome)>) -> Outcome {
        let pass = parts.iter().all(|(_, o)| o.pass);
        let mut detail = String::new();
        for (name, o) in &parts {
            let _ = write!(detail, "{name}: {} ({}); ", if o.pass { "ok" } else { "FAIL" }, o.detail);
        }
        Outcome::new(pass, detail.trim_end_matches("; ").to_string())
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pearson chi-square p-value of observed counts against probabilities.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

// ---------------------------------------------------------------- Elo (5)

/// Textbook base-10 logistic, written independently of the library's form.
fn expected_base10(r_a: f64, r_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_b - r_a) / 400.0))
}

pub fn elo_complement() -> Outcome {
    let zeta = EloParams::default().zeta;
    let mut r = rng(11);
    let mut worst_sum = 0.0f64;
    let mut worst_ref = 0.0f64;
    for _ in 0..100_000 {
        let a = r.gen_range(-3000.0..5000.0);
        let b = r.gen_range(-3000.0..5000.0);
        let e_ab = elo_expected(a, b, zeta);
        let e_ba = elo_expected(b, a, zeta);
        worst_sum = worst_sum.max((e_ab + e_ba - 1.0).abs());
        worst_ref = worst_ref.max((e_ab - expected_base10(a, b)).abs());
    }
    Outcome::new(
        worst_sum <= 2.0 * f64::EPSILON && worst_ref < 1e-12,
        format!("max |E_ab+E_ba-1| = {worst_sum:.1e}, max |E - base10| = {worst_ref:.1e}"),
    )
}

pub fn elo_conservation() -> Outcome {
    let p = EloParams::default();
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = 8;
        let mut ratings: Vec<f64> = (0..n).map(|_| r.gen_range(600.0..1400.0)).collect();
        let before: f64 = ratings.iter().sum();
        let k = if r.gen_bool(0.5) { p.k_default } else { p.k_adjacent };
        for _ in 0..r.gen_range(1..50) {
            let i = r.gen_range(0..n);
            let j = (i + r.gen_range(1..n)) % n;
            let phi = if r.gen_bool(0.5) { 1.0 } else { 0.0 };
            let (a, b) = paired_update(ratings[i], ratings[j], phi, k, p.zeta);
            ratings[i] = a;
            ratings[j] = b;
        }
        let after: f64 = ratings.iter().sum();
        worst = worst.max((after - before).abs() / before.abs());
    }
    Outcome::new(worst < 1e-12, format!("max relative drift {worst:.1e} over 1e4 sequences"))
}

pub fn elo_k_split() -> Outcome {
    let p = EloParams::default();
    let mut r = rng(13);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = r.gen_range(500.0..1500.0);
        let b = r.gen_range(500.0..1500.0);
        let phi = if r.gen_bool(0.5) { 1.0 } else { 0.0 };
        let e = elo_expected(a, b, p.zeta);
        // Measured from rating 0 so no cancellation hides the ratio.
        let adj = elo_update(0.0, phi, e, p.k_for(InitialConfig::AL));
        let std = elo_update(0.0, phi, e, p.k_for(InitialConfig::BC));
        worst = worst.max((adj - p.k_adjacent / p.k_default * std).abs());
    }
    let mapping = InitialConfig::ALL
        .iter()
        .all(|&c| p.k_for(c) == if matches!(c, InitialConfig::AL | InitialConfig::AR) { 8.0 } else { 32.0 });
    Outcome::new(
        worst == 0.0 && mapping,
        format!("max |dR_adj - (k_adj/k_def) dR_std| = {worst:.1e}; AL/AR->8, others->32: {mapping}"),
    )
}

// --------------------------------------------------- pool sampling (6)

fn rated_pool(ratings: &[f64]) -> ModelPool {
    let net = Mlp::zeros(&[2, 2]);
    let mut pool = ModelPool::new(Role::Npc);
    for (i, &elo) in ratings.iter().enumerate() {
        pool.push(AgentRecord::learned(&format!("V{}", i + 1), Role::Npc, i as u32 + 1, &net, elo))
            .unwrap();
    }
    pool
}

fn selection_counts(pool: &ModelPool, method: Method, trainee: f64, params: &EloParams, seed: u64) -> Vec<u64> {
    let mut r = rng(seed);
    let mut counts = vec![0u64; pool.len()];
    for _ in 0..100_000 {
        counts[select_opponent(pool, method, trainee, params, &mut r).unwrap()] += 1;
    }
    counts
}

pub const POOL_RATINGS: [f64; 6] = [1000.0, 1180.0, 870.0, 1320.0, 950.0, 1060.0];
pub const TRAINEE_RATING: f64 = 1040.0;

pub fn uniform_selection() -> Outcome {
    let pool = rated_pool(&POOL_RATINGS);
    let counts = selection_counts(&pool, Method::UniformPool, TRAINEE_RATING, &EloParams::default(), 21);
    let p = chi_square_p(&counts, &vec![1.0 / 6.0; 6]);
    Outcome::new(p > 0.01, format!("p = {p:.3}"))
}

pub fn prioritized_selection() -> Outcome {
    let params = EloParams::default();
    let pool = rated_pool(&POOL_RATINGS);
    // beta = 1: the weight of opponent i is its expected score against the trainee.
    let w: Vec<f64> = POOL_RATINGS.iter().map(|&r| expected_base10(r, TRAINEE_RATING)).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let counts = selection_counts(&pool, Method::PrioritizedPool, TRAINEE_RATING, &params, 22);
    let p = chi_square_p(&counts, &probs);
    Outcome::new(p > 0.01, format!("p = {p:.3}"))
}

pub fn prioritized_beta_zero_is_uniform() -> Outcome {
    let params = EloParams {
        beta: 0.0,
        ..EloParams::default()
    };
    let pool = rated_pool(&POOL_RATINGS);
    let counts = selection_counts(&pool, Method::PrioritizedPool, TRAINEE_RATING, &params, 23);
    let p = chi_square_p(&counts, &vec![1.0 / 6.0; 6]);
    Outcome::new(p > 0.01, format!("p = {p:.3}"))
}

// ------------------------------------------------- gradient oracle (7)

/// Plain-loop forward pass, independent of the library's GEMM path.
fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (i, l) in net.layers.iter().enumerate() {
        let mut z: Vec<f64> = (0..l.outputs)
            .map(|o| l.bias[o] + (0..l.inputs).map(|j| l.weights[o * l.inputs + j] * a[j]).sum::<f64>())
            .collect();
        if i + 1 < net.layers.len() {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = z;
    }
    a
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn gradient_oracle() -> Outcome {
    let mut r = rng(31);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..100 {
        let depth = r.gen_range(2..5);
        let sizes: Vec<usize> = (0..depth).map(|_| r.gen_range(1..7)).collect();
        let mut net = Mlp::new(&sizes, &mut r);
        for b in net.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
            *b = r.gen_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..sizes[0]).map(|_| r.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let analytic = net.backward(&x, &u).unwrap();
        let analytic: Vec<f64> = analytic.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).copied().collect();
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(k).unwrap() -= h;
            let numeric = (dot(&reference_forward(&plus, &x), &u) - dot(&reference_forward(&minus, &x), &u)) / (2.0 * h);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(err);
            checked += 1;
        }
    }
    Outcome::new(worst < 1e-4, format!("max relative error {worst:.2e} over {checked} parameters"))
}

// --------------------------------------------------- replay law (8)

pub fn replay_law() -> Outcome {
    let alpha = 0.6;
    let priorities = [0.5, 1.0, 2.0, 3.0, 4.0, 0.1, 7.0, 1.5, 2.5, 10.0];
    let mut buf = ReplayBuffer::new(10, alpha);
    for &p in &priorities {
        buf.push_with_priority(Transition {
            obs: vec![0.0],
            action: 0,
            reward: 0.0,
            next_obs: vec![0.0],
            done: false,
            priority: p,
        });
    }
    let total: f64 = priorities.iter().map(|p: &f64| p.powf(alpha)).sum();
    let mut r = rng(41);
    let mut counts = [0u64; 10];
    let draws = 100_000;
    for _ in 0..draws {
        counts[buf.sample_index(&mut r)] += 1;
    }
    let worst = priorities
        .iter()
        .zip(&counts)
        .map(|(p, &c)| (c as f64 / draws as f64 - p.powf(alpha) / total).abs())
        .fold(0.0, f64::max);
    Outcome::new(worst < 0.02, format!("max |freq - p^a/sum| = {worst:.4}"))
}

// ------------------------------------------------ simulator oracles (9)

fn car(x: f64, y: f64, psi: f64, length: f64, width: f64) -> VehicleState {
    VehicleState {
        x,
        y,
        psi,
        v: 20.0,
        lane: 0,
        target_speed: 20.0,
        target_lane: 0,
        length,
        width,
    }
}

fn contains(v: &VehicleState, px: f64, py: f64) -> bool {
    let (s, c) = v.psi.sin_cos();
    let (dx, dy) = (px - v.x, py - v.y);
    (dx * c + dy * s).abs() <= 0.5 * v.length && (-dx * s + dy * c).abs() <= 0.5 * v.width
}

/// 10^4 points spread over the boundary of `a` by arc length.
fn boundary_points(a: &VehicleState, n: usize) -> Vec<(f64, f64)> {
    let (s, c) = a.psi.sin_cos();
    let (l, w) = (a.length, a.width);
    let perimeter = 2.0 * (l + w);
    (0..n)
        .map(|i| {
            let t = perimeter * i as f64 / n as f64;
            let (lx, ly) = if t < l {
                (-0.5 * l + t, -0.5 * w)
            } else if t < l + w {
                (0.5 * l, -0.5 * w + (t - l))
            } else if t < 2.0 * l + w {
                (0.5 * l - (t - l - w), 0.5 * w)
            } else {
                (-0.5 * l, 0.5 * w - (t - 2.0 * l - w))
            };
            (a.x + lx * c - ly * s, a.y + lx * s + ly * c)
        })
        .collect()
}

fn corners(v: &VehicleState) -> Vec<(f64, f64)> {
    boundary_points(v, 4)
}

/// Convex rectangles overlap iff a boundary point of one lies in the other.
fn sampled_overlap(a: &VehicleState, b: &VehicleState) -> bool {
    let full = |x: &VehicleState| {
        let mut pts = boundary_points(x, 10_000);
        pts.extend(corners(x));
        pts
    };
    full(a).iter().any(|&(x, y)| contains(b, x, y)) || full(b).iter().any(|&(x, y)| contains(a, x, y))
}

fn shrunk(v: &VehicleState, margin: f64) -> VehicleState {
    VehicleState {
        length: v.length - 2.0 * margin,
        width: v.width - 2.0 * margin,
        ..*v
    }
}

pub fn collision_oracle() -> Outcome {
    let mut r = rng(51);
    let mut agree = 0;
    let mut near_contact = 0;
    let mut bad = 0;
    let mut collisions = 0;
    for _ in 0..1000 {
        let a = car(0.0, 0.0, r.gen_range(-3.2..3.2), r.gen_range(3.0..6.0), r.gen_range(1.5..2.5));
        let b = car(
            r.gen_range(-7.0..7.0),
            r.gen_range(-4.5..4.5),
            r.gen_range(-3.2..3.2),
            r.gen_range(3.0..6.0),
            r.gen_range(1.5..2.5),
        );
        let sat = detect_collision(&a, &b);
        collisions += usize::from(sat);
        if sat == sampled_overlap(&a, &b) {
            agree += 1;
        } else if detect_collision(&shrunk(&a, 1e-3), &shrunk(&b, 1e-3))
            != detect_collision(&shrunk(&a, -1e-3), &shrunk(&b, -1e-3))
        {
            // The answer flips within 1e-3 m of the footprints: a contact case.
            near_contact += 1;
        } else {
            bad += 1;
        }
    }
    Outcome::new(
        bad == 0,
        format!("{agree} agree, {near_contact} near-contact, {bad} disagree ({collisions} overlapping pairs)"),
    )
}

pub fn idm_free_road_equilibrium() -> Outcome {
    let mut r = rng(61);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = IdmParams {
            v0: r.gen_range(5.0..40.0),
            delta: r.gen_range(1.0..6.0),
            ..IdmParams::default()
        };
        let me = car(0.0, 0.0, 0.0, 5.0, 2.0);
        let me = VehicleState { v: p.v0, ..me };
        worst = worst.max(idm_acceleration(&me, None, &p).accel.abs());
    }
    Outcome::new(worst == 0.0, format!("max |a(v0)| = {worst:e}"))
}

fn random_neighbors<R: Rng>(r: &mut R, me: &VehicleState, lane: usize) -> LaneNeighbors {
    let mut other = |sign: f64| {
        r.gen_bool(0.7).then(|| VehicleState {
            x: me.x + sign * r.gen_range(0.5..60.0),
            v: r.gen_range(0.0..40.0),
            lane,
            target_lane: lane,
            ..*me
        })
    };
    LaneNeighbors {
        leader: other(1.0),
        follower: other(-1.0),
    }
}

/// Independent restatement of the MOBIL safety criterion.
fn safe(me: &VehicleState, target: &LaneNeighbors, idm: &IdmParams, mobil: &MobilParams) -> bool {
    match &target.follower {
        Some(f) => idm_acceleration(f, Some(me), idm).accel >= -mobil.b_safe,
        None => true,
    }
}

pub fn mobil_safety_veto() -> Outcome {
    let mut r = rng(71);
    let idm = IdmParams::default();
    let mut vetoed = 0;
    let mut violations = 0;
    for _ in 0..20_000 {
        let mobil = MobilParams {
            politeness: r.gen_range(0.0..1.0),
            delta_a_threshold: r.gen_range(-2.0..0.5),
            b_safe: r.gen_range(0.5..6.0),
        };
        let lane = r.gen_range(0..2usize);
        let me = VehicleState {
            v: r.gen_range(0.0..40.0),
            lane,
            target_lane: lane,
            ..car(0.0, 0.0, 0.0, 5.0, 2.0)
        };
        let current = random_neighbors(&mut r, &me, lane);
        let left = (lane == 1).then(|| random_neighbors(&mut r, &me, 0));
        let right = (lane == 0).then(|| random_neighbors(&mut r, &me, 1));
        let set = NeighborSet { current, left, right };
        let decision = mobil_decide(&me, &set, &idm, &mobil);
        let unsafe_side = |side: &Option<LaneNeighbors>| side.as_ref().is_some_and(|t| !safe(&me, t, &idm, &mobil));
        if unsafe_side(&set.left) || unsafe_side(&set.right) {
            vetoed += 1;
        }
        if (decision == LaneChange::ChangeLeft && unsafe_side(&set.left))
            || (decision == LaneChange::ChangeRight && unsafe_side(&set.right))
        {
            violations += 1;
        }
    }
    Outcome::new(
        violations == 0 && vetoed > 0,
        format!("{violations} unsafe changes among {vetoed} neighbor sets with an unsafe side"),
    )
}

// ------------------------------------------------- CLI determinism (10)

pub const TINY_CONFIG: &str = r#"seed = 5

[dqn]
hidden = 16
warmup = 200
batch_size = 16

[train]
transitions = 1500
configs = ["BL", "AL", "FC"]

[cycles]
n_cycles = 2
transitions_per_training = 800
tournament_episodes_per_pair = 1
configs = ["BL", "FR"]

[eval]
episodes = 6
configs = ["BL", "BC"]
"#;

pub fn run_cli(bin: &str, args: &[&str]) -> std::process::Output {
    std::process::Command::new(bin)
        .args(args)
        .env_remove("CRASH_SEED")
        .env_remove("CRASH_JOBS")
        .output()
        .expect("binary runs")
}

fn run_ok(bin: &str, args: &[&str]) -> Result<(), String> {
    let out = run_cli(bin, args);
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn files_under(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for rel in files_under(from) {
        std::fs::copy(from.join(&rel), to.join(&rel)).unwrap();
    }
}

/// Runs every subcommand twice from identical inputs and compares all
/// output files byte for byte.
pub fn cli_determinism(bin: &str) -> Outcome {
    match cli_determinism_inner(bin) {
        Ok(o) => o,
        Err(e) => Outcome::new(false, e),
    }
}

fn cli_determinism_inner(bin: &str) -> Result<Outcome, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let cfg = root.join("tiny.toml");
    std::fs::write(&cfg, TINY_CONFIG).map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().unwrap();
    let p = |rel: &str| root.join(rel).display().to_string();

    // Shared inputs for the commands that consume earlier artifacts.
    run_ok(bin, &["--config", cfg, "--out", &p("setup/falsify"), "falsify"])?;
    run_ok(bin, &["--config", cfg, "--out", &p("setup/harden"), "harden"])?;
    let npc = p("setup/falsify/npc.bin");

    for run in ["a", "b"] {
        let o = |rel: &str| p(&format!("{run}/{rel}"));
        copy_dir(&root.join("setup/harden/pool_ego"), &root.join(format!("pool_{run}")));
        let pool = p(&format!("pool_{run}"));
        let (falsify, harden, ego, evaluate, speed, tour) =
            (o("falsify"), o("harden"), o("ego"), o("evaluate"), o("speedtrace"), o("tournament"));
        let commands: Vec<Vec<&str>> = vec![
            vec!["--out", &falsify, "falsify", "--ego", "idm_mobil"],
            vec!["--out", &harden, "--method", "prioritized", "harden"],
            vec!["--out", &ego, "train-ego", "--opponent", "idm_mobil", "--opponent", &npc, "--augmented"],
            vec!["--out", &evaluate, "evaluate", "--ego", "idm_mobil", "--npc", &npc],
            vec!["--out", &speed, "speedtrace", "--ego", "idm_mobil", "--npc", &npc],
            vec!["--out", &tour, "--jobs", "2", "tournament", "--agent", &npc, "--id", "Vx", "--pool", &pool],
        ];
        for args in commands {
            let mut full = vec!["--config", cfg];
            full.extend(args);
            run_ok(bin, &full)?;
        }
        copy_dir(&root.join(format!("pool_{run}")), &root.join(format!("{run}/pool_after")));
    }

    let (a, b) = (root.join("a"), root.join("b"));
    let files = files_under(&a);
    if files != files_under(&b) {
        return Ok(Outcome::new(false, "runs produced different file sets"));
    }
    let differing: Vec<String> = files
        .iter()
        .filter(|rel| std::fs::read(a.join(rel)).ok() != std::fs::read(b.join(rel)).ok())
        .map(|rel| rel.display().to_string())
        .collect();
    Ok(Outcome::new(
        differing.is_empty() && files.len() >= 20,
        if differing.is_empty() {
            format!("{} output files byte-identical across 6 commands", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

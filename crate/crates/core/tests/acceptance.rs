//! Acceptance suite. Runs each criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 2 3`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semshare::agent::{Agent, AgentKind};
use semshare::approximator::{standard_normal, Mlp, MlpGrads};
use semshare::baselines::{ddpg_actor_loss, ddpg_critic_loss, ddqn_loss};
use semshare::channel::{sample_fast_fading, update_shadowing, ChannelRealization};
use semshare::env::compute_sinrs_watts;
use semshare::harness::{self, EpisodeLog, RunConfig, SweepAgent, SweepParameter, SweepRow, TrainState};
use semshare::sac::{critic_loss, entropy_loss, policy_loss, SacConfig};
use semshare::semantic::{self, bit_equivalent_hsse, SemanticConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Max relative error between `analytic` and central differences of `loss`
/// over every parameter of `net`.
fn fd_check(net: &Mlp, analytic: &MlpGrads, mut loss: impl FnMut(&Mlp) -> f64) -> f64 {
    let h = 1e-5;
    let base = net.flat_params();
    let grads = analytic.flat();
    assert_eq!(grads.len(), base.len());
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_params(&p).unwrap();
        let up = loss(&probe);
        p[i] = base[i] - h;
        probe.set_flat_params(&p).unwrap();
        let down = loss(&probe);
        worst = worst.max(rel_err(grads[i], (up - down) / (2.0 * h)));
    }
    worst
}

fn net(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::new(sizes, 1.0, rng).unwrap()
}

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (n, obs_dim, act_dim) = (6, 5, 3);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for _ in 0..3 {
        let obs = uniform(n, obs_dim, &mut rng);
        let act = uniform(n, act_dim, &mut rng);
        let sa = ndarray::concatenate![ndarray::Axis(1), obs, act];
        let target = Array1::from_shape_simple_fn(n, || rng.random_range(-2.0..2.0));

        let q = net(&[obs_dim + act_dim, 8, 8, 1], &mut rng);
        let (_, g) = critic_loss(&q, &sa, &target);
        worst.push(("sac critic", fd_check(&q, &g, |m| critic_loss(m, &sa, &target).0)));

        let policy = net(&[obs_dim, 8, 8, 2 * act_dim], &mut rng);
        let q2 = net(&[obs_dim + act_dim, 8, 1], &mut rng);
        let noise = standard_normal(n, act_dim, &mut rng);
        let coef = 0.2;
        let (_, g, _) = policy_loss(&policy, &q, &q2, &obs, &noise, coef);
        worst.push((
            "sac policy",
            fd_check(&policy, &g, |m| policy_loss(m, &q, &q2, &obs, &noise, coef).0),
        ));

        let log_probs = Array1::from_shape_simple_fn(n, || rng.random_range(-4.0..2.0));
        let log_coef: f64 = rng.random_range(-3.0..0.0);
        let target_entropy = -(act_dim as f64);
        let (_, d) = entropy_loss(log_coef, &log_probs, target_entropy);
        let h = 1e-6;
        let num = (entropy_loss(log_coef + h, &log_probs, target_entropy).0
            - entropy_loss(log_coef - h, &log_probs, target_entropy).0)
            / (2.0 * h);
        worst.push(("sac entropy", rel_err(d, num)));

        let qd = net(&[obs_dim, 8, 8, 4], &mut rng);
        let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let (_, g) = ddqn_loss(&qd, &obs, &actions, &target);
        worst.push(("ddqn", fd_check(&qd, &g, |m| ddqn_loss(m, &obs, &actions, &target).0)));

        let critic = net(&[obs_dim + act_dim, 8, 8, 1], &mut rng);
        let (_, g) = ddpg_critic_loss(&critic, &sa, &target);
        worst.push((
            "ddpg critic",
            fd_check(&critic, &g, |m| ddpg_critic_loss(m, &sa, &target).0),
        ));
        let actor = net(&[obs_dim, 8, act_dim], &mut rng);
        let (_, g) = ddpg_actor_loss(&actor, &critic, &obs);
        worst.push(("ddpg actor", fd_check(&actor, &g, |m| ddpg_actor_loss(m, &critic, &obs).0)));
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let which = worst.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        max < 1e-4 && secs < 10.0,
        format!("max relative error {max:.2e} ({which}), {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- 2

#[derive(Clone, Copy, PartialEq)]
enum Tx {
    Cellular(usize),
    Pair(usize),
}

#[derive(Clone, Copy)]
enum Rx {
    Bs,
    Pair(usize),
}

fn oracle_gain(r: &ChannelRealization, tx: Tx, rx: Rx, band: usize) -> f64 {
    match (tx, rx) {
        (Tx::Cellular(w), Rx::Bs) => r.g_v2i[w],
        (Tx::Pair(j), Rx::Bs) => r.g_v2v_to_bs[[j, band]],
        (Tx::Cellular(w), Rx::Pair(k)) => r.g_v2i_to_v2v[[w, k]],
        (Tx::Pair(j), Rx::Pair(k)) if j == k => r.g_v2v[[k, band]],
        (Tx::Pair(j), Rx::Pair(k)) => r.g_cross[[j, k, band]],
    }
}

/// Signal over noise plus every other transmitter occupying the band.
fn oracle_sinr(
    r: &ChannelRealization,
    txs: &[(Tx, usize, f64)],
    intended: Tx,
    rx: Rx,
    noise: f64,
) -> f64 {
    let (_, band, p) = *txs.iter().find(|t| t.0 == intended).unwrap();
    let mut interference = 0.0;
    for &(tx, b, pw) in txs {
        if tx != intended && b == band {
            interference += pw * oracle_gain(r, tx, rx, band);
        }
    }
    p * oracle_gain(r, intended, rx, band) / (noise + interference)
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let q = rng.random_range(1..=4);
        let w = rng.random_range(1..=4);
        let mut g = || 10f64.powf(rng.random_range(-13.0..-5.0));
        let real = ChannelRealization {
            g_v2i: (0..w).map(|_| g()).collect(),
            g_v2v: Array2::from_shape_simple_fn((q, w), &mut g),
            g_v2v_to_bs: Array2::from_shape_simple_fn((q, w), &mut g),
            g_v2i_to_v2v: Array2::from_shape_simple_fn((w, q), &mut g),
            g_cross: Array3::from_shape_fn((q, q, w), |(a, b, _)| if a == b { 0.0 } else { g() }),
        };
        let bands: Vec<usize> = (0..q).map(|_| rng.random_range(0..w)).collect();
        let powers: Vec<f64> = (0..q)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(1e-3..0.2) })
            .collect();
        let pc = rng.random_range(1e-3..0.2);
        let noise = 10f64.powf(rng.random_range(-15.0..-12.0));

        let mut txs: Vec<(Tx, usize, f64)> = (0..w).map(|b| (Tx::Cellular(b), b, pc)).collect();
        txs.extend((0..q).map(|k| (Tx::Pair(k), bands[k], powers[k])));
        let (v2i, v2v) = compute_sinrs_watts(&real, &bands, &powers, pc, noise);
        let want_v2i = (0..w).map(|b| oracle_sinr(&real, &txs, Tx::Cellular(b), Rx::Bs, noise));
        let want_v2v = (0..q).map(|k| oracle_sinr(&real, &txs, Tx::Pair(k), Rx::Pair(k), noise));
        for (got, want) in v2i.iter().chain(&v2v).zip(want_v2i.chain(want_v2v)) {
            let e = if want == 0.0 {
                if *got == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                (got - want).abs() / want.abs()
            };
            worst = worst.max(e);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 5.0,
        format!("1000 instances, max relative error {worst:.2e}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let sigma = 3.0;
    let n = 100_000;
    let mut x = rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        x = update_shadowing(x, 1.0, 10.0, sigma, &mut rng);
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / n as f64;
    let std = (sum_sq / n as f64 - mean * mean).sqrt();
    let identity = (0..1000).all(|_| {
        let v: f64 = rng.random_range(-20.0..20.0);
        update_shadowing(v, 0.0, 10.0, sigma, &mut rng) == v
    });
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        (std - sigma).abs() <= 0.05 * sigma && identity && secs < 5.0,
        format!("std {std:.4} dB (target 3 +- 0.15), zero-displacement identity {identity}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = 1_000_000;
    let (mut sum, mut above) = (0.0, 0usize);
    for _ in 0..n {
        let s = sample_fast_fading(&mut rng);
        sum += s;
        above += usize::from(s > 1.0);
    }
    let mean = sum / n as f64;
    let tail = above as f64 / n as f64;
    let e = (-1.0f64).exp();
    outcome(
        (0.99..=1.01).contains(&mean) && (tail - e).abs() <= 0.005,
        format!("mean {mean:.4}, P(s>1) {tail:.4} vs {e:.4}"),
    )
}

// ---------------------------------------------------------------- 5

fn ulps_apart(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut hsr_exact = true;
    for _ in 0..10_000 {
        let cfg = SemanticConfig {
            bandwidth_hz: rng.random_range(1e5..1e7),
            info_per_sentence_ratio: rng.random_range(0.5..2.0),
            ..SemanticConfig::default()
        };
        let u = rng.random_range(1.0..64.0);
        let xi = rng.random_range(0.0..1.0);
        hsr_exact &= semantic::hsse(&cfg, u, xi) * cfg.bandwidth_hz == semantic::hsr(&cfg, u, xi);
    }

    // Exact when u_bits is a power of two; other values round once on the
    // division and once on the product.
    let mut pow2_exact = true;
    let mut max_ulps = 0u64;
    for _ in 0..2000 {
        let sinr = 10f64.powf(rng.random_range(-3.0..4.0));
        let ratio = rng.random_range(0.5..2.0);
        let reference = bit_equivalent_hsse(sinr, 1.0, ratio);
        for k in 0..11 {
            let u = (1u32 << k) as f64;
            pow2_exact &= bit_equivalent_hsse(sinr, u, ratio) * u == reference;
        }
        for _ in 0..10 {
            let u = rng.random_range(1.0..1024.0);
            max_ulps = max_ulps.max(ulps_apart(bit_equivalent_hsse(sinr, u, ratio) * u, reference));
        }
    }

    let model = semantic::default_similarity_model();
    let grid_ok = model.check().is_ok();
    let (lo, hi) = model.u_range();
    let mut scan_ok = true;
    let us: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    let sinrs: Vec<f64> = (0..=400).map(|i| -30.0 + 0.15 * i as f64).collect();
    for (i, &u) in us.iter().enumerate() {
        for (j, &s) in sinrs.iter().enumerate() {
            let v = model.similarity(u, s).unwrap();
            scan_ok &= (0.0..=1.0).contains(&v);
            if j > 0 {
                scan_ok &= v >= model.similarity(u, sinrs[j - 1]).unwrap();
            }
            if i > 0 {
                scan_ok &= v >= model.similarity(us[i - 1], s).unwrap();
            }
        }
    }
    outcome(
        hsr_exact && pow2_exact && max_ulps <= 1 && grid_ok && scan_ok,
        format!(
            "hsse*B == hsr {hsr_exact}; u_bits invariance exact on powers of two {pow2_exact}, \
             max {max_ulps} ulp otherwise; table grid {grid_ok}, interpolated scan {scan_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let tau = SacConfig::default().tau;
    let online = net(&[8, 16, 16, 3], &mut rng);
    let mut target = net(&[8, 16, 16, 3], &mut rng);
    let theta = online.flat_params();
    let start = target.flat_params();
    let mut worst = 0.0f64;
    for n in 1..=1000 {
        target.soft_update_from(&online, tau);
        let decay = (1.0 - tau).powi(n);
        for ((t, th), s0) in target.flat_params().iter().zip(&theta).zip(&start) {
            worst = worst.max((t - (th + decay * (s0 - th))).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("ratio {:.2}, max deviation from closed form {worst:.2e} over 1000 steps", 1.0 - tau),
    )
}

// ------------------------------------------------------- shared training

/// Default scenario with the narrower desk-scale network.
fn desk_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.agent.hidden = vec![64, 64];
    cfg.episode_max = 1000;
    cfg.episode_test = 100;
    cfg
}

struct Trained {
    cfg: RunConfig,
    agent: Agent,
    log: Vec<EpisodeLog>,
    secs: f64,
}

fn train_sss() -> Trained {
    let cfg = desk_config();
    let t0 = Instant::now();
    let sim = Arc::new(cfg.similarity_model().unwrap());
    let mut state = TrainState::new(&cfg, sim).unwrap();
    let log = harness::train(&cfg, &mut state).unwrap();
    Trained {
        cfg,
        agent: state.agent,
        log,
        secs: t0.elapsed().as_secs_f64(),
    }
}

fn mean_reward(log: &[EpisodeLog]) -> f64 {
    log.iter().map(|l| l.mean_reward).sum::<f64>() / log.len() as f64
}

// ---------------------------------------------------------------- 7

fn criterion_7(t: &Trained) -> Outcome {
    let t0 = Instant::now();
    let sim = Arc::new(t.cfg.similarity_model().unwrap());
    let mut sss = t.agent.clone();
    let learned = harness::evaluate::<std::fs::File>(&t.cfg, sim.clone(), &mut sss, None).unwrap();
    let mut rnd = Agent::new(AgentKind::RandomSemantic, &t.cfg.agent, &t.cfg.env, t.cfg.agent_seed()).unwrap();
    let random = harness::evaluate::<std::fs::File>(&t.cfg, sim, &mut rnd, None).unwrap();
    let first = mean_reward(&t.log[..100]);
    let last = mean_reward(&t.log[t.log.len() - 100..]);
    let total = t.secs + t0.elapsed().as_secs_f64();
    outcome(
        learned.srs >= random.srs + 0.10 && last > first && total <= 1800.0,
        format!(
            "SRS sss {:.3} vs random {:.3}; reward first 100 {first:.4e}, last 100 {last:.4e}; \
             {} episodes, {total:.0} s",
            learned.srs,
            random.srs,
            t.log.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn hsse_curve(rows: &[SweepRow], kind: AgentKind) -> Vec<f64> {
    rows.iter().filter(|r| r.agent_kind == kind).map(|r| r.mean_hsse).collect()
}

fn fmt_curve(xs: &[f64], ys: &[f64]) -> String {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| format!("{x}:{y:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_8(t: &Trained) -> Outcome {
    let t0 = Instant::now();
    let agents = [SweepAgent {
        kind: AgentKind::Sss,
        agent: Some(t.agent.clone()),
    }];
    let demand = [20.0, 35.0, 50.0, 65.0, 80.0];
    let rows = harness::sweep(&t.cfg, SweepParameter::DemandMultiplier, &demand, &agents).unwrap();
    let hd = hsse_curve(&rows, AgentKind::Sss);
    let rho_d = spearman(&demand, &hd);

    let power = [5.0, 9.5, 14.0, 18.5, 23.0];
    let rows = harness::sweep(&t.cfg, SweepParameter::V2iPowerDbm, &power, &agents).unwrap();
    let hp = hsse_curve(&rows, AgentKind::Sss);
    let rho_p = spearman(&power, &hp);
    let range = hp.iter().cloned().fold(f64::MIN, f64::max) - hp.iter().cloned().fold(f64::MAX, f64::min);
    let tail = (hp[4] - hp[3]).abs();
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        rho_d < 0.0 && rho_p > 0.0 && tail < 0.1 * range && secs <= 600.0,
        format!(
            "demand rho {rho_d:.2} [{}]; power rho {rho_p:.2}, last step {:.1}% of range [{}]; {secs:.0} s",
            fmt_curve(&demand, &hd),
            100.0 * tail / range,
            fmt_curve(&power, &hp)
        ),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9(t: &Trained) -> Outcome {
    let u_bits: Vec<f64> = (2..=10).map(|k| (1u32 << k) as f64).collect();
    let agents = [
        SweepAgent {
            kind: AgentKind::Sss,
            agent: Some(t.agent.clone()),
        },
        SweepAgent {
            kind: AgentKind::RandomSemantic,
            agent: None,
        },
        SweepAgent {
            kind: AgentKind::Random,
            agent: None,
        },
    ];
    let rows = harness::sweep(&t.cfg, SweepParameter::UBits, &u_bits, &agents).unwrap();
    let sss = hsse_curve(&rows, AgentKind::Sss);
    let rsem = hsse_curve(&rows, AgentKind::RandomSemantic);
    let bits = hsse_curve(&rows, AgentKind::Random);
    let constant = |c: &[f64]| c.iter().all(|v| *v == c[0]);
    let sem_constant = constant(&sss) && constant(&rsem);
    let decreasing = bits.windows(2).all(|w| w[1] < w[0]);
    let crossing = bits.windows(2).zip(sss.windows(2)).position(|(b, s)| {
        let d0 = b[0] - s[0];
        let d1 = b[1] - s[1];
        d0 * d1 <= 0.0 && d0 != d1
    });
    let cross_txt = match crossing {
        Some(i) => format!("curves cross between u_bits {} and {}", u_bits[i], u_bits[i + 1]),
        None => "no crossing in range".into(),
    };
    outcome(
        sem_constant && decreasing && crossing.is_some(),
        format!(
            "semantic constant {sem_constant} (sss {:.4}, random-semantic {:.4}); bits strictly decreasing \
             {decreasing} [{}]; {cross_txt}",
            sss[0],
            rsem[0],
            fmt_curve(&u_bits, &bits)
        ),
    )
}

// ---------------------------------------------------------------- 10

fn run_into(cfg: &RunConfig, dir: &Path) {
    let mut c = cfg.clone();
    c.output_dir = dir.to_path_buf();
    harness::run_training(&c, None).unwrap();
}

fn criterion_10() -> Outcome {
    let mut mismatches = Vec::new();
    let mut files = 0;
    for kind in [AgentKind::Sss, AgentKind::Ddqn] {
        let mut cfg = RunConfig::default();
        cfg.agent_kind = kind;
        cfg.seed = 42;
        cfg.episode_max = 20;
        cfg.checkpoint_every = 8;
        cfg.agent.hidden = vec![16, 16];
        cfg.agent.exploration.warmup_steps = 300;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_into(&cfg, a.path());
        run_into(&cfg, b.path());
        for name in ["train_log.csv", "checkpoint.json", "checkpoint_8.json", "checkpoint_16.json"] {
            files += 1;
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            if x != y {
                mismatches.push(format!("{kind}/{name}"));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{files} artifacts byte-identical across two runs")
        } else {
            format!("differing artifacts: {}", mismatches.join(", "))
        },
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut failed = Vec::new();
    let mut report = |n: u32, o: Outcome| {
        println!("criterion {n:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    };

    let quick: [(u32, fn() -> Outcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    for (n, f) in quick {
        if wants(n) {
            report(n, f());
        }
    }
    if wants(10) {
        report(10, criterion_10());
    }
    if wants(7) || wants(8) || wants(9) {
        let trained = train_sss();
        let learned: [(u32, fn(&Trained) -> Outcome); 3] = [(7, criterion_7), (8, criterion_8), (9, criterion_9)];
        for (n, f) in learned {
            if wants(n) {
                report(n, f(&trained));
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("acceptance criteria failed: {failed:?}");
        std::process::exit(1);
    }
}

//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command as Process;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use clap::Parser;
use jaitts_cli::{Cli, Command};
use jaitts_core::locdit::{cfg_combine, flow_matching_loss, noise, sample_patch_from, DiffusionSample, VelocityField};
use jaitts_core::model::{stack_patches, FsqLattice, LatentPatch, Model, ModelConfig, ModelState};
use jaitts_core::numerics::{
    grad_check_params, relative_error, standard_normal, Graph, ParamGrads, ParamStore, Streams, Tape, Tensor,
    TensorError,
};
use jaitts_core::pipeline::{
    batch_gradients, decode_tensors, encode_checkpoint, load_checkpoint, mean_total, measure_rtf, read_latents,
    real_time_factor, save_checkpoint, stop_accuracy, synthesize, train, training_batch, write_latents,
    CheckpointError, LatentTrajectory, LatentsError, LossDraws, LossRecord, SynthesisOptions, SyntheticSpec,
    TrainConfig, DEFAULT_CFG_SCALE, DEFAULT_SAMPLING_STEPS,
};
use jaitts_eval::{
    levenshtein, normalize, numerals_to_thai, parse_votes, tally_rows, votes_csv, Lexicon, NormalizationConfig,
    Outcome, PairwiseVote, Record, MAI_YAMOK,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        // a NaN comparison counts as a failure
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    }};
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn random_lattice(r: &mut ChaCha8Rng) -> FsqLattice {
    let delta = match r.random_range(0..4) {
        0 => 0.5,
        1 => 1.0,
        2 => 0.25,
        _ => r.random_range(0.05..3.0),
    };
    FsqLattice::new(delta, r.random_range(1..=6)).unwrap()
}

fn fsq_suite() -> Check {
    let mut r = rng(1);
    let mut coords = 0usize;
    for v in 0..10_000 {
        let lat = random_lattice(&mut r);
        let (delta, bound) = (lat.delta(), lat.bound());
        let n = r.random_range(1..=16);
        // some coordinates sit exactly on half-steps, where rounding ties break
        let h: Vec<f64> = (0..n)
            .map(|_| {
                if r.random_bool(0.2) {
                    r.random_range(-30i32..=30) as f64 * 0.5 * delta
                } else {
                    r.random_range(-20.0..20.0)
                }
            })
            .collect();
        let q = lat.quantize(&h).unwrap();
        coords += n;
        for &x in &q {
            let k = (x / delta).round();
            ensure!(
                k.abs() <= bound as f64 && k * delta == x,
                "vector {v}: {x} is not a lattice point of ({delta}, {bound})"
            );
        }
        ensure!(lat.quantize(&q).unwrap() == q, "vector {v}: not idempotent");

        let raised: Vec<f64> = h.iter().map(|x| x + r.random_range(0.0..5.0)).collect();
        let qr = lat.quantize(&raised).unwrap();
        ensure!(q.iter().zip(&qr).all(|(a, b)| a <= b), "vector {v}: not monotone");

        let margin = r.random_range(0.01..0.45);
        let stable: Vec<f64> = (0..n)
            .map(|_| {
                let k = r.random_range(-12i32..=12) as f64;
                let o = r.random_range(-(0.5 - margin)..=(0.5 - margin));
                (k + o) * delta
            })
            .collect();
        // keep only inputs whose computed scaled values really clear the margin
        if stable.iter().all(|x| {
            let s = x / delta;
            (s - s.floor() - 0.5).abs() >= margin
        }) {
            let reach = 0.999 * margin * delta;
            let moved: Vec<f64> = stable.iter().map(|x| x + r.random_range(-reach..reach)).collect();
            ensure!(
                lat.quantize(&moved).unwrap() == lat.quantize(&stable).unwrap(),
                "vector {v}: perturbation inside the margin moved the output"
            );
        }
    }

    let lat = FsqLattice::new(0.5, 4).unwrap();
    let w: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3 + 0.1).collect();
    let loss = |g: &mut Tape<f64>, y| -> Result<_, TensorError> {
        let act = g.gelu(y);
        let wv = g.constant(Tensor::new(vec![12], w.clone())?);
        let p = g.mul(act, wv)?;
        Ok(g.sum(p))
    };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let h: Vec<f64> = (0..12).map(|_| r.random_range(-3.0..3.0)).collect();
        let h = Tensor::new(vec![12], h).unwrap();
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let hv = g.leaf(h.clone());
        let q = lat.forward(&mut g, hv).unwrap();
        let l = loss(&mut g, q).unwrap();
        let analytic = Tape::backward(&mut g, l).unwrap().take(hv).unwrap();
        let at = lat.quantize(h.data()).unwrap();
        let eval = |p: &[f64]| {
            let mut t = Tape::new();
            let v = t.leaf(Tensor::new(vec![12], p.to_vec()).unwrap());
            let out = loss(&mut t, v).unwrap();
            t.value(out).item().unwrap()
        };
        let mut probe = at.clone();
        for j in 0..12 {
            probe[j] = at[j] + 1e-5;
            let up = eval(&probe);
            probe[j] = at[j] - 1e-5;
            let down = eval(&probe);
            probe[j] = at[j];
            worst = worst.max(relative_error(analytic.data()[j], (up - down) / 2e-5));
        }
    }
    ensure!(worst <= 1e-4, "straight-through gradient relative error {worst:.3e}");
    Ok(format!(
        "10000 vectors ({coords} coordinates) exact; STE worst relative error {worst:.2e}"
    ))
}

// ---------------------------------------------------------------- 2

struct OracleField(Vec<f64>);

impl VelocityField<f64> for OracleField {
    fn velocity(&self, _: &[f64], _: f64, _: &[f64], _: &[f64], _: bool) -> jaitts_core::Result<Vec<f64>> {
        Ok(self.0.clone())
    }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        n_heads: 2,
        d_patch: 4,
        vocab_size: 10,
        max_text_len: 8,
        max_patches: 24,
        ..ModelConfig::default()
    }
}

fn normal(n: usize, seed: u64, name: &str) -> Vec<f64> {
    standard_normal(&mut Streams::new(seed).stream(name), n)
}

fn flow_matching_suite() -> Check {
    for seed in 0..100 {
        let z0 = normal(16, seed, "z0");
        let eps = normal(16, seed, "eps");
        ensure!(noise(&z0, 0.0, &eps).unwrap() == z0, "seed {seed}: z_0 differs from data");
        ensure!(noise(&z0, 1.0, &eps).unwrap() == eps, "seed {seed}: z_1 differs from noise");
        let target: Vec<f64> = eps.iter().zip(&z0).map(|(e, z)| e - z).collect();
        for t in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let sample = DiffusionSample::new(z0.clone(), t, eps.clone()).unwrap();
            let l = flow_matching_loss(&OracleField(target.clone()), &sample, &[0.0; 16], &[0.0; 64], true).unwrap();
            ensure!(l == 0.0, "seed {seed}, t {t}: oracle loss {l}");
        }
    }

    let config = ModelConfig {
        init_std: 0.2,
        ..small_config()
    };
    let s = ModelState::<f64>::init(&config, 5).unwrap();
    let n = 3;
    let z0 = Tensor::new(vec![n, 4], normal(n * 4, 1, "z0")).unwrap();
    let eps = Tensor::new(vec![n, 4], normal(n * 4, 1, "eps")).unwrap();
    let zp = Tensor::new(vec![n, 4], normal(n * 4, 1, "zp")).unwrap();
    let h = Tensor::new(vec![n, 16], normal(n * 16, 1, "h")).unwrap();
    let t = [0.1, 0.5, 0.9];
    let ids = Model::submodule_params(&s.params, "locdit");
    let mut worst = 0.0f64;
    for cond in [true, false] {
        let err = grad_check_params(
            &s.params,
            &ids,
            |g: &mut Graph<'_, f64>| {
                let zpv = g.constant(zp.clone());
                let hv = cond.then(|| g.constant(h.clone()));
                s.model.locdit.fm_loss(g, &z0, zpv, hv, &t, &eps)
            },
            1e-5,
        )
        .unwrap();
        worst = worst.max(err);
    }
    let scalars: usize = ids.iter().map(|&id| s.params.get(id).numel()).sum();
    ensure!(worst <= 1e-4, "parameter gradient relative error {worst:.3e}");
    Ok(format!(
        "endpoints and oracle loss exact over 100 draws; {scalars} parameters, worst relative error {worst:.2e}"
    ))
}

// ---------------------------------------------------------------- 3

fn guidance_suite() -> Check {
    let mut r = rng(3);
    for i in 0..100 {
        let n = r.random_range(1..=32);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let s = r.random_range(-5.0..5.0);
        ensure!(cfg_combine(&v, &v, s).unwrap() == v, "draw {i}: cfg_combine(v, v, {s}) != v");
    }

    let state = ModelState::<f64>::init(&small_config(), 8).unwrap();
    for trial in 0..5u64 {
        let z1 = normal(4, trial, "z1");
        let h = normal(16, trial, "h");
        let zp = normal(4, trial, "zp");
        for steps in [1usize, 10] {
            let guided = sample_patch_from(&state, z1.clone(), &h, &zp, steps, 1.0).unwrap();
            let mut z = z1.clone();
            let dt = 1.0 / steps as f64;
            for k in 0..steps {
                let t = 1.0 - k as f64 / steps as f64;
                let v = state.velocity(&z, t, &h, &zp, true).unwrap();
                for (zi, vi) in z.iter_mut().zip(&v) {
                    *zi -= dt * vi;
                }
            }
            let same = guided.iter().zip(&z).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "trial {trial}, {steps} steps: scale 1 differs from conditional-only sampling");
        }
    }

    // the first ten thousand sequences of a default training run
    let config = ModelConfig::default();
    let streams = Streams::new(TrainConfig::default().seed);
    let batch = TrainConfig::default().batch_size as u64;
    let mut dropped = 0;
    for seq in 0..10_000u64 {
        let (step, b) = (seq / batch, seq % batch);
        let mut r = streams.indexed("train.noise", (step << 20) | b);
        if LossDraws::sample(&mut r, 1, config.d_patch, config.cfg_drop_prob).cond_dropped {
            dropped += 1;
        }
    }
    let freq = dropped as f64 / 10_000.0;
    ensure!((freq - 0.1).abs() <= 0.01, "drop frequency {freq}");
    Ok(format!("100 identities; scale-1 sampling bitwise equal; drop frequency {freq:.4}"))
}

// ---------------------------------------------------------------- 4, 5

struct Trained {
    state: ModelState<f32>,
    history: Vec<LossRecord>,
    wall: Duration,
    spec: SyntheticSpec,
    train: TrainConfig,
}

fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let config = ModelConfig::default();
        let train_config = TrainConfig::default();
        let spec = SyntheticSpec::for_config(&config);
        let start = Instant::now();
        let init = ModelState::<f32>::init(&config, train_config.seed).unwrap();
        let (state, history) = train(&train_config, &spec, init, |_| {}).unwrap();
        Trained {
            state,
            history,
            wall: start.elapsed(),
            spec,
            train: train_config,
        }
    })
}

fn training_gate() -> Check {
    let t = trained();
    ensure!(t.history.len() == 3000, "{} steps recorded", t.history.len());
    let first = mean_total(&t.history[..100]);
    let last = mean_total(&t.history[t.history.len() - 100..]);
    let ratio = last / first;

    let config = ModelConfig::default();
    let init = ModelState::<f32>::init(&config, t.train.seed).unwrap();
    let streams = Streams::new(t.train.seed);
    let mut reached = ParamGrads::empty(init.params.len());
    for step in 0..6 {
        let batch = training_batch(&t.spec, &streams, step, t.train.batch_size).unwrap();
        let (_, mut g) = batch_gradients(&init, &batch, &streams, step).unwrap();
        g.map_in_place(f32::abs);
        reached.accumulate(&g);
    }
    let dead = init.dead_parameters(&reached);

    // the stop head reads only the quantized skeleton: any gradient the stop
    // loss leaves on the text transformer went through the quantizer
    let ex = t.spec.example(&[3, 9, 27], 5).unwrap();
    let n = ex.patches.len();
    let mut g = Graph::new(&init.params);
    let hist = g.constant(stack_patches::<f32>(&ex.patches[..n - 1], config.d_patch).unwrap());
    let h = init.model.hierarchy(&mut g, &ex.text_tokens, Some(hist)).unwrap();
    let labels: Vec<f32> = ex.stop_labels.iter().map(|&l| f32::from(u8::from(l))).collect();
    let loss = g.bce_with_logits(h.stop_logits, &labels).unwrap();
    let grads = g.backward(loss).unwrap();
    let through_ste = Model::submodule_params(&init.params, "tslm")
        .iter()
        .filter(|&&id| grads.get(id).is_some_and(|x| x.data().iter().any(|&v| v != 0.0)))
        .count();

    ensure!(ratio <= 0.2, "loss ratio {ratio:.4} (first {first:.4}, last {last:.4})");
    ensure!(dead.is_empty(), "unreachable parameters: {dead:?}");
    ensure!(through_ste > 0, "stop loss does not reach the text transformer");
    ensure!(t.wall <= Duration::from_secs(600), "training took {:.1?}", t.wall);
    Ok(format!(
        "loss ratio {ratio:.4} ({first:.4} -> {last:.4}); 0 dead of {} parameters; \
         {through_ste} text-transformer tensors reached via the quantizer; {:.1} s",
        init.params.len(),
        t.wall.as_secs_f64()
    ))
}

fn held_out_prompts(t: &Trained, count: usize) -> Vec<(Vec<usize>, u64)> {
    let streams = Streams::new(t.train.seed);
    let mut seen = HashSet::new();
    for step in 0..t.train.train_steps {
        let mut r = streams.indexed("train.data", step as u64);
        for _ in 0..t.train.batch_size {
            seen.insert(t.spec.sample_prompt(&mut r));
        }
    }
    let mut r = streams.stream("heldout");
    let mut out = Vec::new();
    while out.len() < count {
        let p = t.spec.sample_prompt(&mut r);
        if !seen.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn termination_gate() -> Check {
    let t = trained();
    let f = t.spec.patches_per_token;
    let cap = t.state.config().max_patches;
    let prompts = held_out_prompts(t, 50);
    let (mut within, mut correct, mut labels) = (0, 0, 0);
    let mut over_cap = 0;
    for (i, (tokens, speaker)) in prompts.iter().enumerate() {
        let ex = t.spec.example(tokens, *speaker).unwrap();
        let (c, n) = stop_accuracy(&t.state, &ex).unwrap();
        correct += c;
        labels += n;
        let mut r = Streams::new(t.train.seed).indexed("heldout.synth", i as u64);
        let out = synthesize(&t.state, tokens, &[], &SynthesisOptions::default(), &mut r).unwrap();
        if out.len() > cap {
            over_cap += 1;
        }
        if out.len().abs_diff(t.spec.oracle_len(tokens.len())) <= f {
            within += 1;
        }
    }
    let acc = correct as f64 / labels as f64;
    ensure!(over_cap == 0, "{over_cap} syntheses exceeded {cap} patches");
    ensure!(within * 10 >= prompts.len() * 9, "only {within}/50 lengths within ±{f}");
    ensure!(acc >= 0.95, "stop accuracy {acc:.4}");
    Ok(format!(
        "{within}/50 lengths within ±{f}; stop accuracy {correct}/{labels}; all halted within {cap}"
    ))
}

// ---------------------------------------------------------------- 6

struct ConstantField(Vec<f64>);

impl VelocityField<f64> for ConstantField {
    fn velocity(&self, _: &[f64], _: f64, _: &[f64], _: &[f64], _: bool) -> jaitts_core::Result<Vec<f64>> {
        Ok(self.0.clone())
    }
}

fn sampler_exactness() -> Check {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = (0..16).map(|_| r.random_range(-3.0..3.0)).collect();
        let z1: Vec<f64> = (0..16).map(|_| r.random_range(-3.0..3.0)).collect();
        for steps in [1usize, 10] {
            for cfg in [1.0, DEFAULT_CFG_SCALE] {
                let z = sample_patch_from(&ConstantField(v.clone()), z1.clone(), &[], &[], steps, cfg).unwrap();
                for j in 0..16 {
                    worst = worst.max((z[j] - (z1[j] - v[j])).abs());
                }
            }
        }
    }
    ensure!(worst <= 1e-6, "transport error {worst:.3e}");
    let opts = SynthesisOptions::default();
    ensure!(opts.cfg_scale == 2.5 && opts.steps == 10, "library defaults {opts:?}");
    ensure!(DEFAULT_CFG_SCALE == 2.5 && DEFAULT_SAMPLING_STEPS == 10, "default constants");
    let cli = Cli::try_parse_from(["jaitts", "synth", "--checkpoint", "m", "--tokens", "1", "--out", "o"]).unwrap();
    match cli.command {
        Command::Synth(a) => ensure!(
            a.sampling.cfg == 2.5 && a.sampling.steps == 10,
            "command-line defaults cfg={} steps={}",
            a.sampling.cfg,
            a.sampling.steps
        ),
        other => return Err(format!("parsed {other:?}")),
    }
    Ok(format!("max transport error {worst:.2e} for steps 1 and 10; defaults cfg=2.5 steps=10"))
}

// ---------------------------------------------------------------- 7

const NUMERAL_ORACLE: &[(&str, &str)] = &[
    ("0", "ศูนย์"),
    ("1", "หนึ่ง"),
    ("2", "สอง"),
    ("3", "สาม"),
    ("4", "สี่"),
    ("5", "ห้า"),
    ("6", "หก"),
    ("7", "เจ็ด"),
    ("8", "แปด"),
    ("9", "เก้า"),
    ("10", "สิบ"),
    ("11", "สิบเอ็ด"),
    ("12", "สิบสอง"),
    ("20", "ยี่สิบ"),
    ("21", "ยี่สิบเอ็ด"),
    ("22", "ยี่สิบสอง"),
    ("31", "สามสิบเอ็ด"),
    ("99", "เก้าสิบเก้า"),
    ("100", "หนึ่งร้อย"),
    ("101", "หนึ่งร้อยเอ็ด"),
    ("110", "หนึ่งร้อยสิบ"),
    ("111", "หนึ่งร้อยสิบเอ็ด"),
    ("120", "หนึ่งร้อยยี่สิบ"),
    ("1000", "หนึ่งพัน"),
    ("1001", "หนึ่งพันเอ็ด"),
    ("2024", "สองพันยี่สิบสี่"),
    ("10000", "หนึ่งหมื่น"),
    ("100000", "หนึ่งแสน"),
    ("123456", "หนึ่งแสนสองหมื่นสามพันสี่ร้อยห้าสิบหก"),
    ("1000000", "หนึ่งล้าน"),
    ("1000001", "หนึ่งล้านเอ็ด"),
    ("2500001", "สองล้านห้าแสนเอ็ด"),
    ("11000000", "สิบเอ็ดล้าน"),
    ("21000000", "ยี่สิบเอ็ดล้าน"),
    ("1000000000000", "หนึ่งล้านล้าน"),
    ("007", "เจ็ด"),
];

const PIECES: &[&str] = &[
    "ก", "ข", "ค", "น", "ม", "ร", "ส", "อ", "ั", "า", "ิ", "ี", "เ", "แ", "่", "้", "็", "์", "ๆ", " ๆ", "ฯ", "๑", "0",
    "1", "2", "7", "21", "101", "99999999999999", "AI", "ai", "Email", "o", "k", "x", "GPU", "é", "e", "\u{301}", " ",
    "  ", "\t", "\n", "\u{a0}", "\u{3000}", ".", ",", "!", "?", "-", "(", ")", "\"", "«", "»", "…", "_", "/",
];

fn corpus_lexicon() -> Lexicon {
    [("ai", "เอไอ"), ("email", "อีเมล"), ("ok", "โอเค"), ("x", "เอ็กซ์ ๆ 2")]
        .into_iter()
        .collect()
}

/// Levenshtein distances from `a` to every string reachable from the current `b`.
///
/// Strings are sequences of symbol indices. `a` uses symbols in first-seen
/// order; `b` may reuse any symbol seen so far or introduce the next unseen
/// one. Every pair over a `k`-letter alphabet is a renaming of exactly one
/// such pair, and both distances depend only on which positions hold equal
/// letters, so these pairs cover all of them.
struct Exhaustive<'a> {
    alphabet: &'a [char],
    max_len: usize,
    checked: u64,
    mismatch: Option<String>,
}

impl Exhaustive<'_> {
    fn run(&mut self) {
        let mut a = Vec::new();
        self.visit_a(&mut a, 0);
    }

    fn visit_a(&mut self, a: &mut Vec<usize>, used: usize) {
        if self.mismatch.is_some() {
            return;
        }
        let chars: Vec<char> = a.iter().map(|&s| self.alphabet[s]).collect();
        // D(i, 0) = i
        let column: Vec<usize> = (0..=a.len()).collect();
        let mut b = Vec::new();
        self.visit_b(a, &chars, &mut b, used, &column);
        if a.len() < self.max_len {
            for s in 0..(used + 1).min(self.alphabet.len()) {
                a.push(s);
                self.visit_a(a, used.max(s + 1));
                a.pop();
            }
        }
    }

    /// `column[i]` is the recursive definition D(i, |b|), built from D(·, |b| − 1).
    fn visit_b(&mut self, a: &[usize], a_chars: &[char], b: &mut Vec<char>, used: usize, column: &[usize]) {
        let got = levenshtein(a_chars, b);
        self.checked += 1;
        if got != column[a.len()] {
            self.mismatch = Some(format!("{a_chars:?} vs {b:?}: {got} != {}", column[a.len()]));
            return;
        }
        if b.len() == self.max_len {
            return;
        }
        let mut next = vec![0; column.len()];
        for s in 0..(used + 1).min(self.alphabet.len()) {
            next[0] = b.len() + 1;
            for i in 1..column.len() {
                let sub = column[i - 1] + usize::from(a[i - 1] != s);
                next[i] = sub.min(column[i] + 1).min(next[i - 1] + 1);
            }
            b.push(self.alphabet[s]);
            self.visit_b(a, a_chars, b, used.max(s + 1), &next);
            b.pop();
            if self.mismatch.is_some() {
                return;
            }
        }
    }
}

/// Number of joint first-seen-order pairs, counted independently of the walk.
fn canonical_pair_count(max_len: usize, k: usize) -> u64 {
    // ways(n, used): strings of length n continuing a prefix that used `used` symbols
    let total = 2 * max_len;
    let mut ways = vec![vec![0u64; k + 1]; total + 1];
    ways[0].fill(1);
    for n in 1..=total {
        for u in 0..=k {
            ways[n][u] = u as u64 * ways[n - 1][u] + if u < k { ways[n - 1][u + 1] } else { 0 };
        }
    }
    let mut count = 0;
    for la in 0..=max_len {
        for lb in 0..=max_len {
            count += ways[la + lb][0];
        }
    }
    count
}

fn normalization_suite() -> Check {
    let config = NormalizationConfig::with_lexicon(corpus_lexicon());
    let golden = normalize("ต่างๆ", &config);
    ensure!(golden.as_str() == "ต่างต่าง", "golden example gave {golden}");

    ensure!(NUMERAL_ORACLE.len() >= 30, "numeral suite too small");
    for required in ["0", "1", "10", "11", "20", "21", "100", "101", "1000000", "2500001"] {
        ensure!(NUMERAL_ORACLE.iter().any(|(d, _)| *d == required), "suite lacks {required}");
    }
    for (digits, words) in NUMERAL_ORACLE {
        let got = numerals_to_thai(digits).unwrap();
        ensure!(got == *words, "{digits}: {got} != {words}");
    }

    let mut r = rng(7);
    for i in 0..1000 {
        let len = r.random_range(0..24);
        let raw: String = (0..len).map(|_| PIECES[r.random_range(0..PIECES.len())]).collect();
        let once = normalize(&raw, &config);
        let twice = normalize(once.as_str(), &config);
        ensure!(once == twice, "string {i} {raw:?}: {once} then {twice}");
        let s = once.as_str();
        ensure!(
            !s.chars().any(|c| c.is_ascii_digit() || c.is_whitespace())
                && !s.trim_start_matches(MAI_YAMOK).contains(MAI_YAMOK),
            "string {i} {raw:?}: residue in {s:?}"
        );
    }

    let alphabet = ['ก', 'ข', 'ค', 'ง', 'จ'];
    let mut walk = Exhaustive {
        alphabet: &alphabet,
        max_len: 8,
        checked: 0,
        mismatch: None,
    };
    let start = Instant::now();
    walk.run();
    if let Some(m) = walk.mismatch {
        return Err(format!("levenshtein disagrees with the recursive oracle: {m}"));
    }
    let expected = canonical_pair_count(8, 5);
    ensure!(walk.checked == expected, "walked {} pairs, expected {expected}", walk.checked);
    let all: u64 = (0..=8).map(|n| 5u64.pow(n)).sum::<u64>().pow(2);
    Ok(format!(
        "golden example exact; {} numeral cases; 1000-string corpus idempotent; \
         levenshtein equals the oracle on {} renaming classes covering all {all} pairs ({:.0} s)",
        NUMERAL_ORACLE.len(),
        walk.checked,
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 8

fn reported_votes() -> Vec<PairwiseVote> {
    let mut votes = Vec::new();
    for (name, counts) in [("eleven_v3", [161, 19, 20]), ("speech-2.8-hd", [122, 40, 38])] {
        for (i, (ours_outcome, n)) in [Outcome::A, Outcome::Tie, Outcome::B].into_iter().zip(counts).enumerate() {
            for k in 0..n {
                // alternate presentation order
                let v = if (i + k) % 2 == 0 {
                    PairwiseVote::new("ours", name, ours_outcome)
                } else {
                    let flipped = match ours_outcome {
                        Outcome::A => Outcome::B,
                        Outcome::B => Outcome::A,
                        Outcome::Tie => Outcome::Tie,
                    };
                    PairwiseVote::new(name, "ours", flipped)
                };
                votes.push(v.unwrap());
            }
        }
    }
    votes
}

fn tally_arithmetic() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("votes.csv");
    std::fs::write(&path, votes_csv(&reported_votes()).unwrap()).unwrap();
    let rows = parse_votes(&std::fs::read_to_string(&path).unwrap()).unwrap();
    ensure!(rows.len() == 400, "{} votes", rows.len());
    let report = tally_rows(rows.iter().map(|(r, v)| (*r, v)), "ours").unwrap();
    let rec = |w, t, l| Record {
        wins: w,
        ties: t,
        losses: l,
    };
    ensure!(report.per_competitor["eleven_v3"] == rec(161, 19, 20), "eleven_v3 {}", report.per_competitor["eleven_v3"]);
    ensure!(
        report.per_competitor["speech-2.8-hd"] == rec(122, 40, 38),
        "speech-2.8-hd {}",
        report.per_competitor["speech-2.8-hd"]
    );
    ensure!(report.overall == rec(283, 59, 58), "overall {}", report.overall);

    let out = Process::new(env!("CARGO_BIN_EXE_jaitts"))
        .args(["eval", "tally", "--votes", path.to_str().unwrap(), "--ours", "ours"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    ensure!(out.status.success() && text.contains("overall,283,59,58"), "command output {text:?}");
    Ok("eleven_v3 161/19/20, speech-2.8-hd 122/40/38, overall 283/59/58".into())
}

// ---------------------------------------------------------------- 9

fn rtf_arithmetic() -> Check {
    let rtf = real_time_factor(Duration::from_secs_f64(1.136), 250, 40).unwrap();
    let shown = format!("{rtf:.4}");
    ensure!(shown == "0.1136" && (rtf - 0.1136).abs() <= 1e-15, "rtf {rtf}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jlat");
    write_latents(&path, &LatentTrajectory::new(16, 40, vec![LatentPatch::zeros(16); 250]).unwrap()).unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_jaitts"))
        .args(["eval", "rtf", "--wall-seconds", "1.136", "--latents", path.to_str().unwrap()])
        .output()
        .unwrap();
    let printed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    ensure!(printed == "0.1136", "command printed {printed:?}");

    let t = trained();
    let (tokens, _) = held_out_prompts(t, 1).remove(0);
    let mut r = Streams::new(t.train.seed).stream("rtf");
    let opts = SynthesisOptions::default();
    let report = measure_rtf(
        || Ok(synthesize(&t.state, &tokens, &[], &opts, &mut r)?.len()),
        t.state.config().frame_ms,
    )
    .unwrap();
    Ok(format!(
        "1.136 s over 10.0 s -> {shown}; measured toy-model RTF {:.4} ({} patches in {:.3} s, not gated)",
        report.rtf,
        report.n_patches,
        report.wall.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 10

fn persistence() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let t = trained();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&t.state, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    ensure!(loaded.config() == t.state.config(), "config snapshot differs");
    for ((na, a), (nb, b)) in t.state.params.iter().zip(loaded.params.iter()) {
        let same = na == nb && a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure!(same, "tensor {na} changed");
    }
    let bytes = std::fs::read(&path).unwrap();
    ensure!(encode_checkpoint(&loaded).unwrap() == bytes, "re-encoded checkpoint differs");

    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0x20;
    let mut bad_version = bytes.clone();
    bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
    let truncated = &bytes[..bytes.len() - 5];
    let code = |b: &[u8]| decode_tensors(b).err().map(|e| e.code());
    let codes = [code(&bad_magic), code(&bad_version), code(truncated)];
    ensure!(
        matches!(decode_tensors(&bad_magic), Err(CheckpointError::BadMagic { .. }))
            && matches!(decode_tensors(&bad_version), Err(CheckpointError::UnsupportedVersion { found: 7 }))
            && matches!(decode_tensors(truncated), Err(CheckpointError::Truncated { .. })),
        "corruption classes {codes:?}"
    );
    let distinct: HashSet<_> = codes.iter().collect();
    ensure!(distinct.len() == 3, "codes {codes:?} are not distinct");

    let values = [0.0f32, -0.0, f32::MIN_POSITIVE / 4.0, 1.0e-30, -3.5, f32::MAX, 0.1, -1.0e7];
    let patches: Vec<LatentPatch> = (0..3)
        .map(|k| LatentPatch::new(values.iter().map(|v| if k == 1 { -v } else { *v }).collect()).unwrap())
        .collect();
    let traj = LatentTrajectory::new(8, 40, patches).unwrap();
    let lat = dir.path().join("t.jlat");
    write_latents(&lat, &traj).unwrap();
    let back = read_latents(&lat).unwrap();
    let same = back.d_patch == 8
        && back.frame_ms == 40
        && back.patches.len() == 3
        && back
            .patches
            .iter()
            .zip(&traj.patches)
            .all(|(a, b)| a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    ensure!(same, "trajectory changed in a round trip");
    let lb = std::fs::read(&lat).unwrap();
    let mut magic = lb.clone();
    magic[1] = b'X';
    ensure!(matches!(LatentTrajectory::decode(&magic), Err(LatentsError::BadMagic { .. })), "trajectory magic");
    ensure!(
        matches!(LatentTrajectory::decode(&lb[..lb.len() - 1]), Err(LatentsError::Truncated { .. })),
        "trajectory truncation"
    );
    Ok(format!(
        "checkpoint ({} tensors) and trajectory bitwise; corruption codes {}",
        t.state.params.len(),
        codes.iter().map(|c| c.unwrap_or("none")).collect::<Vec<_>>().join(", ")
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fsq", fsq_suite),
        ("flow matching", flow_matching_suite),
        ("guidance", guidance_suite),
        ("joint training", training_gate),
        ("termination", termination_gate),
        ("sampler", sampler_exactness),
        ("normalization", normalization_suite),
        ("tally", tally_arithmetic),
        ("rtf", rtf_arithmetic),
        ("persistence", persistence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

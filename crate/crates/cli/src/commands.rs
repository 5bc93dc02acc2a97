use std::io::Write;
use std::path::Path;
use std::time::Duration;

use jaitts_core::model::{LatentPatch, ModelState};
use jaitts_core::numerics::Streams;
use jaitts_core::pipeline::{
    load_checkpoint, mean_total, measure_rtf, read_latents, real_time_factor, save_checkpoint, synthesize,
    train as run_training, write_atomic, write_loss_csv, LatentTrajectory, SynthesisOptions, SyntheticSpec,
};
use jaitts_core::Error as ModelError;
use jaitts_eval::{read_cer_batch, read_sim_pairs, sim::sim_csv, tally_rows, Lexicon, NormalizationConfig};

use crate::config::{env_seed, parse_tokens, resolve_seed, RunConfig, SetError};
use crate::error::{CliError, Result};
use crate::{EvalCommand, RtfArgs, SamplingArgs, SynthArgs, TrainArgs};

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(jaitts_eval::EvalError::from)?;
    Ok(text.to_string())
}

/// A CSV table goes to `path` with a one-line summary on stdout, or to stdout when no path is given.
fn deliver(out: &mut dyn Write, path: Option<&Path>, csv: &str, summary: &str) -> Result<()> {
    match path {
        Some(p) => {
            write_file(p, csv.as_bytes())?;
            emit(out, &format!("{summary}\n"))
        }
        None => emit(out, csv),
    }
}

pub fn train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for (i, item) in args.overrides.iter().enumerate() {
        let bad = |reason: String| CliError::malformed("--set", i + 1, reason);
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found {item:?}")))?;
        config.set(k.trim(), v.trim()).map_err(|e| match e {
            SetError::Unknown => bad(format!("unknown key {:?}", k.trim())),
            SetError::Value(reason) => bad(reason),
        })?;
        if k.trim() == "seed" {
            config.seed_in_file = true;
        }
    }
    if let Some(steps) = args.steps {
        config.train.train_steps = steps;
    }
    let file_seed = config.seed_in_file.then_some(config.train.seed);
    config.train.seed = resolve_seed(args.seed, file_seed, env_seed().as_deref())?;
    config.validate()?;

    let steps = config.train.train_steps;
    emit(out, &format!("train seed={} steps={steps}\n", config.train.seed))?;
    let state = ModelState::<f32>::init(&config.model, config.train.seed)?;
    let spec = SyntheticSpec::for_config(&config.model);
    let (state, history) = run_training(&config.train, &spec, state, |r| {
        if (r.step + 1) % 100 == 0 || r.step + 1 == steps {
            log::info!("step {} total {:.5} fm {:.5} stop {:.5}", r.step + 1, r.total, r.fm, r.stop);
        }
    })?;
    save_checkpoint(&state, &args.out_checkpoint)?;
    write_loss_csv(&args.loss_csv, &history).map_err(|e| CliError::io(&args.loss_csv, e))?;

    let mut summary = String::new();
    if let Some(last) = history.last() {
        let window = (history.len() / 2).clamp(1, 100);
        let ratio = mean_total(&history[history.len() - window..]) / mean_total(&history[..window]);
        summary.push_str(&format!(
            "final total={} fm={} stop={}\nloss_ratio={ratio:.4} window={window}\n",
            last.total, last.fm, last.stop
        ));
    }
    emit(out, &summary)
}

struct Prepared {
    state: ModelState<f32>,
    tokens: Vec<usize>,
    reference: Vec<LatentPatch>,
    options: SynthesisOptions,
    seed: u64,
}

fn prepare(
    checkpoint: &Path,
    tokens: &str,
    ref_latents: Option<&Path>,
    options: SynthesisOptions,
    seed: Option<u64>,
) -> Result<Prepared> {
    let tokens = parse_tokens(tokens)?;
    let seed = resolve_seed(seed, None, env_seed().as_deref())?;
    if !options.cfg_scale.is_finite() {
        return Err(ModelError::InvalidInput("guidance scale must be finite".into()).into());
    }
    let state = load_checkpoint(checkpoint)?;
    let reference = match ref_latents {
        None => Vec::new(),
        Some(path) => {
            let t = read_latents(path)?;
            if t.d_patch != state.config().d_patch {
                return Err(ModelError::InvalidInput(format!(
                    "reference patches have {} values, the model expects {}",
                    t.d_patch,
                    state.config().d_patch
                ))
                .into());
            }
            if t.frame_ms != state.config().frame_ms {
                log::warn!("reference frame of {} ms differs from the model's {} ms", t.frame_ms, state.config().frame_ms);
            }
            t.patches
        }
    };
    Ok(Prepared {
        state,
        tokens,
        reference,
        options,
        seed,
    })
}

impl Prepared {
    fn run(&self) -> jaitts_core::Result<Vec<LatentPatch>> {
        let mut rng = Streams::new(self.seed).stream("synth");
        synthesize(&self.state, &self.tokens, &self.reference, &self.options, &mut rng)
    }

    fn cap(&self) -> usize {
        let model_cap = self.state.config().max_patches;
        self.options.max_patches.map_or(model_cap, |m| m.min(model_cap))
    }
}

fn options_of(s: &SamplingArgs) -> SynthesisOptions {
    SynthesisOptions {
        cfg_scale: s.cfg,
        steps: s.steps,
        max_patches: s.max_patches,
    }
}

pub fn synth(args: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let s = &args.sampling;
    let p = prepare(&s.checkpoint, &s.tokens, s.ref_latents.as_deref(), options_of(s), s.seed)?;
    emit(
        out,
        &format!(
            "synth cfg={} steps={} seed={} max_patches={}\n",
            p.options.cfg_scale,
            p.options.steps,
            p.seed,
            p.cap()
        ),
    )?;
    let patches = p.run()?;
    let c = p.state.config();
    let trajectory = LatentTrajectory::new(c.d_patch, c.frame_ms, patches)?;
    jaitts_core::pipeline::write_latents(&args.out, &trajectory)?;
    emit(
        out,
        &format!("patches={} seconds={}\n", trajectory.patches.len(), trajectory.seconds()),
    )
}

fn rtf(args: RtfArgs, out: &mut dyn Write) -> Result<()> {
    let value = if let Some(wall) = args.wall_seconds {
        if !(wall.is_finite() && wall >= 0.0) {
            return Err(ModelError::InvalidInput(format!("wall time {wall} is not a duration")).into());
        }
        let path = args.latents.as_deref().expect("clap requires --latents");
        let t = read_latents(path)?;
        real_time_factor(Duration::from_secs_f64(wall), t.patches.len(), t.frame_ms)?
    } else {
        let checkpoint = args.checkpoint.as_deref().expect("clap requires a source");
        let tokens = args.tokens.as_deref().expect("clap requires --tokens");
        let options = SynthesisOptions {
            cfg_scale: args.cfg,
            steps: args.steps,
            max_patches: args.max_patches,
        };
        let p = prepare(checkpoint, tokens, args.ref_latents.as_deref(), options, args.seed)?;
        let report = measure_rtf(|| p.run().map(|v| v.len()), p.state.config().frame_ms)?;
        log::info!(
            "{} patches, {:.3} s of audio in {:.3} s",
            report.n_patches,
            report.audio_seconds,
            report.wall.as_secs_f64()
        );
        report.rtf
    };
    emit(out, &format!("{value:.4}\n"))
}

pub fn eval(target: EvalCommand, out: &mut dyn Write) -> Result<()> {
    match target {
        EvalCommand::Cer { input, lexicon, out: dest } => {
            let lexicon = match lexicon {
                Some(p) => Lexicon::parse(&read_text(&p)?)?,
                None => Lexicon::new(),
            };
            let config = NormalizationConfig::with_lexicon(lexicon);
            let batch = read_cer_batch(&read_text(&input)?, &config)?;
            let summary = format!("rows={} mean_cer={}", batch.rows.len(), batch.mean());
            deliver(out, dest.as_deref(), &batch.to_csv()?, &summary)
        }
        EvalCommand::Sim { pairs, out: dest } => {
            let scored = read_sim_pairs(&read_text(&pairs)?, &pairs)?;
            let mean = if scored.is_empty() {
                0.0
            } else {
                scored.iter().map(|p| p.sim).sum::<f64>() / scored.len() as f64
            };
            let summary = format!("rows={} mean_sim={mean}", scored.len());
            deliver(out, dest.as_deref(), &sim_csv(&scored)?, &summary)
        }
        EvalCommand::Rtf(args) => rtf(args, out),
        EvalCommand::Tally { votes, ours, out: dest } => {
            let rows = jaitts_eval::parse_votes(&read_text(&votes)?)?;
            let report = tally_rows(rows.iter().map(|(r, v)| (*r, v)), &ours)?;
            let summary = format!("overall {}", report.overall);
            deliver(out, dest.as_deref(), &report.to_csv()?, &summary)
        }
    }
}

use freebies::schedule::{plan_shapes, shape_candidates, LrMode, LrSchedule};
use freebies::syncbn::{divergence_report, shards_from_rows};
use freebies::targets::{smooth_onehot, smooth_sigmoid_targets, NegativeMode, SmoothingConfig};
use freebies::{rng, Error, Result, RngState};
use serde::Serialize;

use super::{domain, print_json, print_text, read_text, report};
use crate::args::{NegativeModeArg, ScheduleArgs, ScheduleMode, ShapesArgs, SyncbnArgs, TableFormat, TargetsArgs};

#[derive(Serialize)]
struct Row {
    iter: u64,
    lr: f64,
}

fn epochs(v: u64, per_epoch: u64) -> Result<u64> {
    v.checked_mul(per_epoch)
        .ok_or_else(|| domain(format!("{v} epochs x {per_epoch} iterations overflows")))
}

pub fn schedule(args: &ScheduleArgs) -> Result<()> {
    let k = match args.iters_per_epoch {
        Some(0) => return Err(domain("--iters-per-epoch must be positive")),
        Some(k) => k,
        None => 1,
    };
    let milestones = args
        .milestones
        .iter()
        .map(|&m| epochs(m, k))
        .collect::<Result<Vec<_>>>()?;
    let mode = match args.mode {
        ScheduleMode::Step => LrMode::Step,
        ScheduleMode::Cosine => LrMode::Cosine,
        ScheduleMode::Constant => LrMode::Constant,
    };
    let s = LrSchedule::new(
        mode,
        args.base_lr,
        epochs(args.total, k)?,
        epochs(args.warmup, k)?,
        milestones,
        args.factor,
    )?;
    let rows = s.table(epochs(args.every, k)?)?;
    match args.format {
        TableFormat::Csv => {
            let mut out = String::from("iter,lr\n");
            for (t, lr) in rows {
                out.push_str(&format!("{t},{lr}\n"));
            }
            print_text(&out)
        }
        TableFormat::Json => {
            #[derive(Serialize)]
            struct Body {
                rows: Vec<Row>,
            }
            let rows = rows.into_iter().map(|(iter, lr)| Row { iter, lr }).collect();
            print_json(&report("schedule", args, Body { rows }))
        }
    }
}

pub fn shapes(args: &ShapesArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Body {
        seed: u64,
        rng: &'static str,
        candidates: Vec<u32>,
        sizes: Vec<u32>,
    }
    let candidates = shape_candidates(args.stride, args.min_size, args.max_size)?;
    let mut rng = RngState::new(args.seed);
    let plan = plan_shapes(args.stride, args.min_size, args.max_size, args.batches, &mut rng)?;
    print_json(&report(
        "shapes",
        args,
        Body {
            seed: args.seed,
            rng: rng::ALGORITHM,
            candidates,
            sizes: plan.sizes,
        },
    ))
}

pub fn targets(args: &TargetsArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Body {
        kind: &'static str,
        targets: Vec<f64>,
    }
    let body = match (&args.sigmoid, args.classes, args.label) {
        (Some(hard), _, _) => {
            let mode = match args.negative_mode {
                NegativeModeArg::Epsilon => NegativeMode::Epsilon,
                NegativeModeArg::EpsilonOverKMinus1 => NegativeMode::EpsilonOverKMinus1,
            };
            Body {
                kind: "sigmoid",
                targets: smooth_sigmoid_targets(hard, args.epsilon, mode)?,
            }
        }
        (None, Some(k), Some(y)) => Body {
            kind: "softmax",
            targets: smooth_onehot(y, &SmoothingConfig::new(args.epsilon, k)?)?.probs().to_vec(),
        },
        _ => return Err(domain("give --classes with --label, or --sigmoid")),
    };
    print_json(&report("targets", args, body))
}

fn parse_rows(doc: &str) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in doc.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            location: format!("line {}", i + 1),
            message,
        };
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| err("expected device_id,value".into()))?;
        match value.trim().parse::<f64>() {
            Ok(v) => rows.push((id.trim().to_string(), v)),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => return Err(err(format!("value {value:?}: {e}"))),
        }
    }
    Ok(rows)
}

pub fn syncbn_check(args: &SyncbnArgs) -> Result<()> {
    let rows = parse_rows(&read_text(&args.input)?)?;
    let shards = shards_from_rows(rows)?;
    let r = divergence_report(&shards)?;
    print_json(&report("syncbn-check", args, r))
}

pub fn version() -> Result<()> {
    #[derive(Serialize)]
    struct Version {
        toolkit_version: &'static str,
        rng: &'static str,
    }
    print_json(&Version {
        toolkit_version: freebies::VERSION,
        rng: rng::ALGORITHM,
    })
}

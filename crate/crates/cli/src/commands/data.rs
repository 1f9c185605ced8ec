use std::path::Path;

use freebies::augment::{apply_policy, AugmentPolicy};
use freebies::io::{
    read_dataset, save_image, write_json, Dataset, DatasetWriter, NamedSample, SampleEntry, SourceFormat,
    WriteOptions,
};
use freebies::mixup::{mix_samples, BetaParams, MixupConfig};
use freebies::{rng, ImageBuffer, Result, RngState, Sample};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{domain, fresh_dir, print_json, report};
use crate::args::{AugmentArgs, DatasetFormat, MixupArgs, PairStrategy, PolicyKind};

/// Samples held in memory at once.
const CHUNK: usize = 64;

const RUN_FILE: &str = "run.json";

fn out_format(requested: Option<DatasetFormat>, source: SourceFormat) -> SourceFormat {
    match requested {
        Some(DatasetFormat::Voc) => SourceFormat::Voc,
        Some(DatasetFormat::Coco) => SourceFormat::Coco,
        None => source,
    }
}

fn category_ids(ds: &Dataset, format: SourceFormat) -> Vec<u64> {
    match format {
        SourceFormat::Coco => ds.index.category_ids.clone(),
        SourceFormat::Voc => Vec::new(),
    }
}

/// Maps `0..n` through `f` in parallel, `CHUNK` items at a time, keeping order.
fn chunked<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let part: Vec<T> = (start..end).into_par_iter().map(&f).collect::<Result<_>>()?;
        out.extend(part);
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunInfo<'a, R: Serialize> {
    seed: u64,
    rng: &'static str,
    source_classes: &'a [String],
    samples: Vec<R>,
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    rng: &'static str,
    out: &'a Path,
    samples: usize,
    labels: usize,
    files: usize,
}

#[derive(Serialize)]
struct PairRecord {
    name: String,
    a: String,
    b: String,
    lambda: f64,
    labels: usize,
}

fn partners(strategy: PairStrategy, n: usize, nb: usize, seed: u64) -> Vec<usize> {
    match strategy {
        PairStrategy::Sequential => (0..n).map(|i| i % nb).collect(),
        PairStrategy::Shuffle => {
            let mut rng = RngState::new(seed);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let mut perm: Vec<usize> = (0..nb).collect();
                perm.shuffle(&mut rng);
                out.extend(perm.into_iter().take(n - out.len()));
            }
            out
        }
    }
}

pub fn mixup(args: &MixupArgs) -> Result<()> {
    let cfg = MixupConfig {
        dist: BetaParams::new(args.alpha, args.beta)?,
        fixed_ratio: args.fixed_ratio,
        min_weight: args.min_weight,
    };
    cfg.validate()?;
    let a = read_dataset(&args.a, args.strict)?;
    let b = read_dataset(&args.b, args.strict)?;
    if a.index.classes != b.index.classes {
        return Err(domain("the two datasets use different class vocabularies"));
    }
    let (na, nb) = (a.index.samples.len(), b.index.samples.len());
    if na == 0 || nb == 0 {
        return Err(domain("both datasets need at least one sample"));
    }
    let n = args.count.unwrap_or(na);
    let partner = partners(args.pair_strategy, n, nb, args.seed);
    let format = out_format(args.out_format, a.index.format);

    fresh_dir(&args.out)?;
    let writer = DatasetWriter::create(&args.out, format, WriteOptions { lossy: args.lossy })?;
    let results = chunked(n, |i| {
        let (ia, ib) = (i % na, partner[i]);
        let sa = a.load_sample(ia)?;
        let sb = b.load_sample(ib)?;
        let mut rng = RngState::for_index(args.seed, i as u64);
        let mixed = mix_samples(&sa, &sb, &cfg, &mut rng)?;
        let named = NamedSample {
            name: format!("mix_{i:05}"),
            sample: mixed.sample,
        };
        let entry = writer.write_sample(&named)?;
        let record = PairRecord {
            name: named.name,
            a: a.index.samples[ia].image_id.clone(),
            b: b.index.samples[ib].image_id.clone(),
            lambda: mixed.lambda,
            labels: entry.labels.len(),
        };
        Ok((entry, record))
    })?;
    let (entries, records): (Vec<SampleEntry>, Vec<PairRecord>) = results.into_iter().unzip();
    finish(
        "mixup",
        args,
        args.seed,
        &args.out,
        &a.index.classes,
        writer,
        category_ids(&a, format),
        entries,
        records,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    seed: u64,
    out: &Path,
    classes: &[String],
    writer: DatasetWriter,
    category_ids: Vec<u64>,
    entries: Vec<SampleEntry>,
    records: Vec<R>,
) -> Result<()> {
    let samples = entries.len();
    let labels = entries.iter().map(|e| e.labels.len()).sum();
    write_json(
        &out.join(RUN_FILE),
        &report(
            command,
            config,
            RunInfo {
                seed,
                rng: rng::ALGORITHM,
                source_classes: classes,
                samples: records,
            },
        ),
    )?;
    let (_, manifest) = writer.finish(classes, &category_ids, entries)?;
    print_json(&report(
        command,
        config,
        Summary {
            seed,
            rng: rng::ALGORITHM,
            out,
            samples,
            labels,
            files: manifest.files.len() + 1,
        },
    ))
}

/// Pixel-weighted per-channel mean over every image in the dataset; mid gray
/// when there are no pixels.
fn dataset_mean(ds: &Dataset) -> Result<[f64; 3]> {
    let sums = chunked(ds.index.samples.len(), |i| {
        let s = ds.load_sample(i)?;
        let mut acc = [0.0; 3];
        for px in s.image.data().chunks_exact(3) {
            for c in 0..3 {
                acc[c] += px[c];
            }
        }
        Ok((acc, s.image.width() * s.image.height()))
    })?;
    let mut total = [0.0; 3];
    let mut pixels = 0usize;
    for (acc, n) in sums {
        for c in 0..3 {
            total[c] += acc[c];
        }
        pixels += n;
    }
    if pixels == 0 {
        return Ok([0.5; 3]);
    }
    Ok(total.map(|t| t / pixels as f64))
}

fn with_boxes(s: &Sample) -> ImageBuffer {
    let mut img = s.image.clone();
    let (h, w) = (img.height(), img.width());
    let red = [1.0, 0.0, 0.0];
    for l in &s.labels {
        let x0 = (l.bbox.xmin().floor().max(0.0) as usize).min(w - 1);
        let y0 = (l.bbox.ymin().floor().max(0.0) as usize).min(h - 1);
        let x1 = (l.bbox.xmax().ceil() as usize).clamp(1, w) - 1;
        let y1 = (l.bbox.ymax().ceil() as usize).clamp(1, h) - 1;
        for x in x0..=x1.max(x0) {
            img.set_pixel(y0, x, red);
            img.set_pixel(y1, x, red);
        }
        for y in y0..=y1.max(y0) {
            img.set_pixel(y, x0, red);
            img.set_pixel(y, x1, red);
        }
    }
    img
}

#[derive(Serialize)]
struct AugmentRecord {
    name: String,
    labels_in: usize,
    labels_out: usize,
    height: usize,
    width: usize,
}

#[derive(Serialize)]
struct AugmentConfig<'a> {
    #[serde(flatten)]
    args: &'a AugmentArgs,
    expand_fill: Option<[f64; 3]>,
}

pub fn augment(args: &AugmentArgs) -> Result<()> {
    let ds = read_dataset(&args.input, args.strict)?;
    let policy = match args.policy {
        PolicyKind::Multi => AugmentPolicy::multi_stage()?,
        PolicyKind::Single => {
            let fill = match &args.fill {
                Some(v) => {
                    if v.len() != 3 || v.iter().any(|c| !(0.0..=1.0).contains(c)) {
                        return Err(domain("--fill needs three values in [0, 1]"));
                    }
                    [v[0], v[1], v[2]]
                }
                None => dataset_mean(&ds)?,
            };
            AugmentPolicy::single_stage(args.input_size, fill)?
        }
    };
    let fill = policy.steps().iter().find_map(|s| match s.transform {
        freebies::augment::Transform::Expand { fill, .. } => Some(fill),
        _ => None,
    });
    let config = AugmentConfig {
        args,
        expand_fill: fill,
    };
    let format = out_format(args.out_format, ds.index.format);

    fresh_dir(&args.out)?;
    let preview_dir = args.out.join("preview");
    if args.preview > 0 {
        std::fs::create_dir_all(&preview_dir).map_err(|e| freebies::Error::Io {
            path: preview_dir.clone(),
            source: e,
        })?;
    }
    let writer = DatasetWriter::create(&args.out, format, WriteOptions { lossy: args.lossy })?;
    let results = chunked(ds.index.samples.len(), |i| {
        let source = ds.load_sample(i)?;
        let mut rng = RngState::for_index(args.seed, i as u64);
        let sample = apply_policy(&source, &policy, &mut rng)?;
        let name = ds.index.samples[i].image_id.clone();
        if i < args.preview {
            save_image(&with_boxes(&source), &preview_dir.join(format!("{name}_before.png")))?;
            save_image(&with_boxes(&sample), &preview_dir.join(format!("{name}_after.png")))?;
        }
        let record = AugmentRecord {
            name: name.clone(),
            labels_in: source.labels.len(),
            labels_out: sample.labels.len(),
            height: sample.height(),
            width: sample.width(),
        };
        let entry = writer.write_sample(&NamedSample { name, sample })?;
        Ok((entry, record))
    })?;
    let (entries, records): (Vec<SampleEntry>, Vec<AugmentRecord>) = results.into_iter().unzip();
    finish(
        "augment",
        &config,
        args.seed,
        &args.out,
        &ds.index.classes,
        writer,
        category_ids(&ds, format),
        entries,
        records,
    )
}

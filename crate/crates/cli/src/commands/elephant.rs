use freebies::elephant::{evaluate, generate_frames, group_by_image, CleanSource, FrameTruth, PatchSpec};
use freebies::io::{load_image, parse_clean_objects_jsonl, parse_detections_jsonl, save_image, write_json, write_manifest};
use freebies::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fresh_dir, print_json, read_text, report};
use crate::args::{CleanSourceArg, ElephantEvalArgs, ElephantGenArgs};

pub const FRAMES_FILE: &str = "frames.json";

#[derive(Serialize)]
struct FramesBody<'a> {
    scene_height: usize,
    scene_width: usize,
    stride_x: usize,
    stride_y: usize,
    frames: &'a [FrameTruth],
}

#[derive(Deserialize)]
struct FramesFile {
    frames: Vec<FrameTruth>,
}

fn half_scaled(len: usize, scale: f64) -> usize {
    ((((len as f64) * scale).round() as usize) / 2).max(1)
}

pub fn gen(args: &ElephantGenArgs) -> Result<()> {
    let scene = load_image(&args.scene)?;
    let patch = load_image(&args.patch)?;
    let alpha_mask = match &args.mask {
        Some(p) => Some(load_image(p)?.data().chunks_exact(3).map(|px| px[0]).collect()),
        None => None,
    };
    let stride_x = args.stride.unwrap_or_else(|| half_scaled(patch.width(), args.scale));
    let stride_y = args
        .stride_y
        .or(args.stride)
        .unwrap_or_else(|| half_scaled(patch.height(), args.scale));
    let spec = PatchSpec {
        alpha_mask,
        stride_x,
        stride_y,
        scale: args.scale,
        ..PatchSpec::new(patch)
    };
    let frames = generate_frames(&scene, &spec, args.class_id)?;
    let truths = frames.truths();

    fresh_dir(&args.out)?;
    let frame_dir = args.out.join("frames");
    std::fs::create_dir_all(&frame_dir).map_err(|e| Error::Io {
        path: frame_dir.clone(),
        source: e,
    })?;
    (0..truths.len()).into_par_iter().try_for_each(|i| {
        let f = frames.render(i);
        save_image(&f.image, &frame_dir.join(format!("{}.png", f.truth.frame_id)))
    })?;
    let body = FramesBody {
        scene_height: scene.height(),
        scene_width: scene.width(),
        stride_x,
        stride_y,
        frames: &truths,
    };
    write_json(&args.out.join(FRAMES_FILE), &report("elephant gen", args, &body))?;
    let manifest = write_manifest(&args.out)?;

    #[derive(Serialize)]
    struct Summary {
        frames: usize,
        stride_x: usize,
        stride_y: usize,
        files: usize,
    }
    print_json(&report(
        "elephant gen",
        args,
        Summary {
            frames: truths.len(),
            stride_x,
            stride_y,
            files: manifest.files.len() + 1,
        },
    ))
}

pub fn eval(args: &ElephantEvalArgs) -> Result<()> {
    let text = read_text(&args.manifest)?;
    let frames: FramesFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: args.manifest.display().to_string(),
        message: e.to_string(),
    })?;
    let dets = group_by_image(parse_detections_jsonl(&read_text(&args.dets)?)?);
    let clean = parse_clean_objects_jsonl(&read_text(&args.clean)?)?;
    let source = match args.clean_source {
        CleanSourceArg::Annotations => CleanSource::Annotations,
        CleanSourceArg::Detections => CleanSource::Detections,
    };
    let r = evaluate(&frames.frames, &clean, source, &dets, args.iou, args.exclude_occluded)?;
    print_json(&report("elephant eval", args, r))
}

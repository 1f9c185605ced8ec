#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freebies::io::{named, write_dataset, SourceFormat, WriteOptions};
use freebies::{BBox, ImageBuffer, ObjectLabel, RngState};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_freebies"));
    c.env_remove("FREEBIES_CONFIG");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub const CLASSES: [&str; 3] = ["cat", "dog", "bird"];

/// `n` smooth random images of assorted sizes with one to three boxes each,
/// written as a VOC tree.
pub fn synthetic_voc(dir: &Path, n: usize, seed: u64) {
    let mut rng = RngState::new(seed);
    let samples = (0..n)
        .map(|i| {
            let h = rng.between(48, 120);
            let w = rng.between(48, 120);
            let base = [rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)];
            let image = ImageBuffer::from_fn(h, w, |y, x| {
                let t = (x + y) as f64 / (h + w) as f64;
                [base[0] * (1.0 - t), base[1] * t, (base[2] + t) / 2.0]
            })
            .unwrap();
            let labels = (0..rng.between(1, 3))
                .map(|_| {
                    let x0 = rng.between(0, w / 2) as f64;
                    let y0 = rng.between(0, h / 2) as f64;
                    let x1 = x0 + rng.between(8, w / 2) as f64;
                    let y1 = y0 + rng.between(8, h / 2) as f64;
                    ObjectLabel::new(BBox::new(x0, y0, x1, y1).unwrap(), rng.below(CLASSES.len()))
                })
                .collect();
            named(format!("{i:06}"), image, labels).unwrap()
        })
        .collect::<Vec<_>>();
    let classes: Vec<String> = CLASSES.iter().map(|c| c.to_string()).collect();
    write_dataset(dir, &classes, &[], &samples, SourceFormat::Voc, WriteOptions::default()).unwrap();
}

/// Relative path -> file bytes for every file under `dir`.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

//! Writes the two bundled benchmark datasets. Both are synthetic but shaped
//! like their UCI namesakes (Pima diabetes: 768 rows, 8 numeric attributes;
//! king-rook-vs-king-pawn: 3196 rows, 36 categorical attributes) so the
//! bundled experiment protocols exercise realistic split arithmetic.
//! Generation is fully seeded: rerunning reproduces the files byte for byte.

use std::fs;
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const DIABETES_SEED: u64 = 0xD1ABE7E5;
const KRKP_SEED: u64 = 0x4B524B50; // "KRKP"

fn main() {
    let out = match parse_out_dir() {
        Ok(dir) => dir,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("usage: datagen [--out DIR]");
            std::process::exit(2);
        }
    };
    fs::create_dir_all(&out).expect("create output directory");

    let diabetes = out.join("diabetes.csv");
    fs::write(&diabetes, generate_diabetes()).expect("write diabetes.csv");
    println!("wrote {}", diabetes.display());

    let krkp = out.join("krkp.csv");
    fs::write(&krkp, generate_krkp()).expect("write krkp.csv");
    println!("wrote {}", krkp.display());
}

fn parse_out_dir() -> Result<PathBuf, String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.as_slice() {
        [] => Ok(PathBuf::from("data")),
        [flag, dir] if flag == "--out" => Ok(PathBuf::from(dir)),
        other => Err(format!("unexpected arguments: {other:?}")),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// 768 rows, 8 numeric attributes, two classes, with concept drift along
/// the stream: the earliest rows follow a simpler concept over three
/// attributes; later rows follow the full concept, an additive signal spread
/// evenly across all eight. Hypotheses from the first phase are therefore
/// information-bounded on the validation tail, and accuracy there grows as
/// later phases contribute hypotheses for the attributes the early concept
/// never touched. A rejection margin around each concept's boundary keeps
/// classes crisp, so small trees err near-independently and majority voting
/// keeps gaining as hypotheses accumulate.
fn generate_diabetes() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(DIABETES_SEED);
    let n = 768;
    // The early concept reads only three attributes, one of them with the
    // opposite sign of the settled concept, so hypotheses trained on the
    // earliest rows transfer poorly once the concept settles.
    let early_weights = [0.0, 0.7, -0.5, 0.0, 0.0, -0.95, 0.0, 0.0];
    let full_weights = [0.72, 0.72, -0.72, 0.72, 0.72, 0.72, -0.72, 0.72];

    // (concept weights, rejection margin, label flip rate) per stream band;
    // the drifted concept covers the first phase's training block and fades
    // out early in its test block, and label noise decays along the stream.
    let band = |row: usize| -> (&[f64; 8], f64, f64) {
        if row < 80 {
            (&early_weights, 0.35, 0.08)
        } else if row < 200 {
            (&full_weights, 0.55, 0.05)
        } else {
            (&full_weights, 0.55, 0.035)
        }
    };

    let mut csv = String::from("preg,plas,pres,skin,insu,mass,pedi,age,class\n");
    for row in 0..n {
        let (weights, margin, flips) = band(row);
        let (z, score) = loop {
            let z: Vec<f64> = (0..8).map(|_| normal(&mut rng)).collect();
            let score: f64 = weights.iter().zip(&z).map(|(w, v)| w * v).sum();
            if score.abs() > margin {
                break (z, score);
            }
        };
        let noisy_label = (score > 0.0) ^ (rng.random::<f64>() < flips);
        let class = if noisy_label { "tested_positive" } else { "tested_negative" };
        let preg = (3.0 + 2.8 * z[0]).round().clamp(0.0, 17.0);
        let plas = (121.0 + 30.0 * z[1]).round().clamp(44.0, 199.0);
        let pres = (70.0 + 17.0 * z[2]).round().clamp(24.0, 122.0);
        let skin = (27.0 + 10.0 * z[3]).round().clamp(7.0, 99.0);
        let insu = (155.0 + 90.0 * z[4]).round().clamp(14.0, 846.0);
        let mass = (33.0 + 6.4 * z[5]).clamp(18.2, 67.1);
        let pedi = (0.42 * (0.55 * z[6]).exp()).clamp(0.078, 2.42);
        let age = (40.0 + 10.0 * z[7]).round().clamp(21.0, 81.0);
        csv.push_str(&format!(
            "{preg},{plas},{pres},{skin},{insu},{mass:.1},{pedi:.3},{age},{class}\n"
        ));
    }
    csv
}

/// 3196 rows, 36 categorical attributes (35 binary plus one three-valued),
/// two roughly balanced classes. The concept is a small disjunction of
/// three-literal terms over ten relevant attributes; the rest are
/// distractors, a few of them correlated with relevant ones.
fn generate_krkp() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(KRKP_SEED);
    let n = 3196;
    let relevant_bias = [0.55, 0.5, 0.6, 0.5, 0.55, 0.45, 0.5, 0.6, 0.5, 0.45];

    // As with the numeric dataset, early stream rows carry extra label noise.
    let flip_rate = |row: usize| -> f64 {
        if row < 500 {
            0.10
        } else if row < 1000 {
            0.06
        } else {
            0.04
        }
    };

    let mut csv = String::new();
    for i in 1..=35 {
        csv.push_str(&format!("b{i:02},"));
    }
    csv.push_str("tri,class\n");

    for row in 0..n {
        let r: Vec<bool> = relevant_bias.iter().map(|&p| rng.random::<f64>() < p).collect();
        let concept =
            (r[0] && r[1] && r[2]) || (r[3] && r[4] && !r[5]) || (!r[6] && r[7] && r[8]);
        let label = concept ^ (rng.random::<f64>() < flip_rate(row));

        let mut cells: Vec<&str> = Vec::with_capacity(37);
        for &bit in &r {
            cells.push(if bit { "t" } else { "f" });
        }
        // 25 distractors: the first ten echo a relevant attribute with 40%
        // corruption, the rest are coin flips.
        for &relevant in &r {
            let echoed = relevant ^ (rng.random::<f64>() < 0.4);
            cells.push(if echoed { "t" } else { "f" });
        }
        for _ in 0..15 {
            cells.push(if rng.random::<f64>() < 0.5 { "t" } else { "f" });
        }
        let tri = match rng.random_range(0..3u8) {
            0 => "n",
            1 => "w",
            _ => "b",
        };
        cells.push(tri);
        cells.push(if label { "won" } else { "nowin" });
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    csv
}

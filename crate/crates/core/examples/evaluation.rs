//! Scoring predictions against ground truth: matching, AP@0.5, max-F1
//! precision/recall and confusion counts, printed as a table.

use gaanet::eval::{average_precision, evaluate, match_predictions, EvalConfig};
use gaanet::{BBox, Detection, GroundTruth};

fn main() -> anyhow::Result<()> {
    let names: Vec<String> = ["bird", "drone", "plane"].map(String::from).to_vec();
    let gt = |x: f64, y: f64, s: f64, c: usize| GroundTruth::new(BBox::new(x, y, x + s, y + s), c);
    let det = |x: f64, y: f64, s: f64, c: usize, p: f64| Detection::new(BBox::new(x, y, x + s, y + s), c, p);

    let gts = vec![
        vec![gt(10.0, 10.0, 20.0, 0), gt(100.0, 40.0, 12.0, 1)],
        vec![gt(50.0, 50.0, 40.0, 2), gt(5.0, 5.0, 8.0, 1)],
    ];
    let dets = vec![
        vec![
            det(11.0, 10.0, 20.0, 0, 0.92),
            det(101.0, 41.0, 12.0, 1, 0.81),
            det(100.0, 40.0, 12.0, 1, 0.40),
        ],
        vec![
            det(52.0, 48.0, 40.0, 2, 0.77),
            det(200.0, 200.0, 10.0, 1, 0.60),
            det(50.0, 50.0, 40.0, 0, 0.30),
        ],
    ];

    let m = match_predictions(&dets[0], &gts[0], 0.5);
    println!("image 0 ranked TP flags: {:?}", m.ranked_flags());
    println!("AP of [TP, FP] with 1 truth: {}", average_precision(&[true, false], 1));
    println!("AP of [FP, TP] with 1 truth: {}", average_precision(&[false, true], 1));

    let report = evaluate(&dets, &gts, &names, &EvalConfig::default())?;
    println!();
    print!("{}", report.to_table());
    Ok(())
}

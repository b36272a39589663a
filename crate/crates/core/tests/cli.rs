use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gaanet::pnm::Image;

fn gaanet(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaanet"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn textured(w: usize, h: usize) -> Image {
    let mut img = Image::filled(w, h, 3, 30);
    for y in 0..h {
        for x in 0..w {
            let v = ((x * 7 + y * 13) % 256) as u8;
            img.set_pixel(x, y, [v, 255 - v, (x * y % 256) as u8]);
        }
    }
    img
}

fn write_dataset(root: &Path) {
    fs::create_dir_all(root.join("images")).unwrap();
    fs::create_dir_all(root.join("labels")).unwrap();
    for id in ["p", "q"] {
        fs::write(
            root.join(format!("images/{id}.pgm")),
            Image::filled(200, 100, 1, 0).to_pnm(),
        )
        .unwrap();
    }
    fs::write(root.join("labels/p.txt"), "0 0.25 0.5 0.1 0.2\n1 0.75 0.5 0.2 0.4\n").unwrap();
    fs::write(root.join("labels/q.txt"), "1 0.5 0.5 0.3 0.3\n").unwrap();
}

#[test]
fn usage_errors_exit_one_and_data_errors_exit_two() {
    assert_eq!(gaanet(&["frobnicate"], &[]).status.code(), Some(1));
    assert_eq!(gaanet(&["infer"], &[]).status.code(), Some(1));
    assert_eq!(gaanet(&["params", "--config"], &[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ppm");
    let o = gaanet(&["infer", missing.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let garbage = dir.path().join("bad.gaaw");
    fs::write(&garbage, b"not an archive").unwrap();
    let img = dir.path().join("x.ppm");
    fs::write(&img, textured(32, 32).to_pnm()).unwrap();
    let o = gaanet(
        &["infer", "--weights", garbage.to_str().unwrap(), img.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(gaanet(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn params_reports_total() {
    let o = gaanet(&["params"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("6466316") || text.contains("6,466,316"), "{text}");
    let f = gaanet(&["flops", "--img-size", "256"], &[]);
    assert!(f.status.success());
}

#[test]
fn infer_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    fs::write(&a, textured(120, 90).to_pnm()).unwrap();
    fs::write(&b, textured(64, 128).to_pnm()).unwrap();
    let args = ["infer", "--seed", "7", a.to_str().unwrap(), b.to_str().unwrap()];
    let one = gaanet(&args, &[("GAANET_THREADS", "1")]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let four = gaanet(&args, &[("GAANET_THREADS", "4")]);
    let again = gaanet(&args, &[("GAANET_THREADS", "4")]);
    assert!(!one.stdout.is_empty());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(four.stdout, again.stdout);
}

#[test]
fn blank_image_at_high_threshold_writes_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("blank.pgm");
    fs::write(&img, Image::filled(64, 64, 1, 0).to_pnm()).unwrap();
    let out = dir.path().join("pred.txt");
    let o = gaanet(
        &[
            "infer",
            "--conf",
            "0.99",
            "--out",
            out.to_str().unwrap(),
            img.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn eval_scores_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path());
    let pred = dir.path().join("pred.txt");
    fs::write(
        &pred,
        "p 0 0.9 40 40 60 60\np 1 0.8 130 30 170 70\nq 1 0.7 70 35 130 65\n",
    )
    .unwrap();
    let json = dir.path().join("report.json");
    let o = gaanet(
        &[
            "eval",
            "--names",
            "car,person",
            "--json",
            json.to_str().unwrap(),
            pred.to_str().unwrap(),
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let overall = stdout(&o)
        .lines()
        .find(|l| l.starts_with("overall"))
        .unwrap()
        .to_string();
    assert_eq!(overall.matches("100.0").count(), 3, "{overall}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["overall"]["ap50"], 1.0);

    fs::write(&pred, "p 0 0.9 40 40\n").unwrap();
    let bad = gaanet(&["eval", pred.to_str().unwrap(), dir.path().to_str().unwrap()], &[]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn render_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("scene.ppm");
    fs::write(&img, textured(96, 64).to_pnm()).unwrap();
    let pred = dir.path().join("pred.txt");
    fs::write(
        &pred,
        "scene 0 0.91 10 20 40 50\nscene 1 0.40 50 2 90 30\nother 0 0.5 0 0 5 5\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gaanet(
            &[
                "render",
                img.to_str().unwrap(),
                pred.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let first = run("r1.ppm");
    assert_eq!(first, run("r2.ppm"));
    assert_ne!(first, fs::read(&img).unwrap());
}

#[test]
fn anchors_on_single_size_boxes_fit_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("labels")).unwrap();
    fs::create_dir_all(dir.path().join("images")).unwrap();
    for i in 0..6 {
        fs::write(
            dir.path().join(format!("images/{i}.pgm")),
            Image::filled(256, 256, 1, 0).to_pnm(),
        )
        .unwrap();
        fs::write(
            dir.path().join(format!("labels/{i}.txt")),
            "0 0.3 0.3 0.0625 0.125\n0 0.6 0.6 0.0625 0.125\n",
        )
        .unwrap();
    }
    let o = gaanet(
        &[
            "anchors",
            dir.path().to_str().unwrap(),
            "--k",
            "3",
            "--generations",
            "50",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "fitness: 1.0000"), "{text}");
    assert!(text.lines().any(|l| l == "bpr: 1.0000"), "{text}");
}

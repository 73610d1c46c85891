use std::path::Path;
use std::process::{Command, Output};

use pantrack::MetricReport;

/// A small sensor keeps every run fast.
const LIGHT: &str = "sensor.beams = 16\nsensor.azimuth_steps = 512\nprojection.width = 1024\nprojection.height = 64\n";

fn pantrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pantrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes the light config and a simulated sequence under `root`.
fn setup(root: &Path, frames: u32) -> (String, String) {
    std::fs::create_dir_all(root).unwrap();
    let cfg = root.join("light.cfg");
    std::fs::write(&cfg, LIGHT).unwrap();
    let seq = root.join("seq");
    let o = pantrack(&[
        "simulate",
        "--out",
        p(&seq),
        "--frames",
        &frames.to_string(),
        "--seed",
        "1",
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (p(&cfg).to_string(), p(&seq).to_string())
}

#[test]
fn simulate_writes_the_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("light.cfg");
    std::fs::write(&cfg, LIGHT).unwrap();
    let seq = dir.path().join("seq");
    let o = pantrack(&[
        "simulate",
        "--out",
        p(&seq),
        "--frames",
        "10",
        "--seed",
        "1",
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).starts_with("frames 10 points "),
        "{}",
        stdout(&o)
    );
    assert_eq!(std::fs::read_dir(seq.join("scans")).unwrap().count(), 10);
    assert_eq!(std::fs::read_dir(seq.join("labels")).unwrap().count(), 10);
    assert_eq!(
        std::fs::read_to_string(seq.join("poses.txt"))
            .unwrap()
            .lines()
            .count(),
        10
    );
    assert!(seq.join("taxonomy.txt").is_file());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pantrack(&["simulate"]).status.code(), Some(2));
    assert_eq!(
        pantrack(&["track", "--seq", "x", "--out", "y", "--segmenter", "magic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(pantrack(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pantrack(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("plainfile");
    std::fs::write(&blocker, b"x").unwrap();
    let o = pantrack(&[
        "simulate",
        "--out",
        p(&blocker.join("seq")),
        "--frames",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("plainfile"), "{}", stderr(&o));
}

#[test]
fn flags_beat_config_which_beats_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, format!("{LIGHT}world.frames = 4\nworld.seed = 3\n")).unwrap();
    let count = |seq: &Path| std::fs::read_dir(seq.join("scans")).unwrap().count();

    let a = dir.path().join("a");
    assert!(pantrack(&["simulate", "--out", p(&a), "--config", p(&cfg)])
        .status
        .success());
    assert_eq!(count(&a), 4);
    let b = dir.path().join("b");
    assert!(pantrack(&[
        "simulate",
        "--out",
        p(&b),
        "--config",
        p(&cfg),
        "--frames",
        "2"
    ])
    .status
    .success());
    assert_eq!(count(&b), 2);

    // the config seed is used unless a flag overrides it
    let c = dir.path().join("c");
    assert!(pantrack(&[
        "simulate",
        "--out",
        p(&c),
        "--config",
        p(&cfg),
        "--frames",
        "2",
        "--seed",
        "3"
    ])
    .status
    .success());
    assert_eq!(
        std::fs::read(b.join("scans/000001.bin")).unwrap(),
        std::fs::read(c.join("scans/000001.bin")).unwrap()
    );
    let d = dir.path().join("d");
    assert!(pantrack(&[
        "simulate",
        "--out",
        p(&d),
        "--config",
        p(&cfg),
        "--frames",
        "2",
        "--seed",
        "4"
    ])
    .status
    .success());
    assert_ne!(
        std::fs::read(b.join("scans/000001.bin")).unwrap(),
        std::fs::read(d.join("scans/000001.bin")).unwrap()
    );
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "projection.widht = 10\n").unwrap();
    let o = pantrack(&[
        "simulate",
        "--out",
        p(&dir.path().join("s")),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("projection.widht"));
    let o = pantrack(&[
        "simulate",
        "--out",
        p(&dir.path().join("s")),
        "--config",
        p(&dir.path().join("missing.cfg")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn track_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, seq) = setup(dir.path(), 5);
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = pantrack(&[
            "track",
            "--seq",
            &seq,
            "--out",
            p(&out),
            "--confusion",
            "0.2",
            "--split",
            "0.2",
            "--seed",
            "9",
            "--config",
            &cfg,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("frames 5 points "));
        (0..5)
            .map(|f| std::fs::read(out.join(format!("{f:06}.label"))).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn track_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, seq) = setup(dir.path(), 2);
    let out = dir.path().join("out");
    let o = pantrack(&["track", "--seq", &seq, "--out", p(&out), "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 3 scans"), "{}", stderr(&o));

    let (cfg, seq) = setup(&dir.path().join("long"), 3);
    let o = pantrack(&[
        "track",
        "--seq",
        &seq,
        "--out",
        p(&out),
        "--segmenter",
        "files",
        "--config",
        &cfg,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pred"), "{}", stderr(&o));
}

#[test]
fn inferred_files_reproduce_the_oracle_run() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, seq) = setup(dir.path(), 4);
    let noise = [
        "--confusion",
        "0.1",
        "--drop",
        "0.1",
        "--seed",
        "4",
        "--bypass-projection",
        "--config",
        &cfg,
    ];
    let o = pantrack(&[&["infer", "--seq", &seq][..], &noise].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "clips 2");

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(
        pantrack(&[&["track", "--seq", &seq, "--out", p(&a)][..], &noise].concat())
            .status
            .success()
    );
    let o = pantrack(&[
        "track",
        "--seq",
        &seq,
        "--out",
        p(&b),
        "--segmenter",
        "files",
        "--bypass-projection",
        "--config",
        &cfg,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in 0..4 {
        let name = format!("{f:06}.label");
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap()
        );
    }
}

#[test]
fn evaluate_prints_the_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let (_, seq) = setup(dir.path(), 3);
    let gt = Path::new(&seq).join("labels");
    let report = dir.path().join("report.json");
    let o = pantrack(&[
        "evaluate",
        "--pred",
        p(&gt),
        "--gt",
        p(&gt),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0].split_whitespace().collect::<Vec<_>>(),
        ["PAT", "PQ", "TQ", "PTQ", "LSTQ"]
    );
    assert_eq!(
        lines[1].split_whitespace().collect::<Vec<_>>(),
        ["100.0"; 5]
    );
    let r = MetricReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.pat, 1.0);
}

#[test]
fn evaluate_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    assert_eq!(
        pantrack(&["evaluate", "--pred", p(&pred), "--gt", p(&gt)])
            .status
            .code(),
        Some(1)
    );

    let (_, seq) = setup(dir.path(), 3);
    let labels = Path::new(&seq).join("labels");
    std::fs::copy(labels.join("000000.label"), pred.join("000000.label")).unwrap();
    let o = pantrack(&["evaluate", "--pred", p(&pred), "--gt", p(&labels)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("000001") && stderr(&o).contains("000002"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn render_writes_deterministic_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, seq) = setup(dir.path(), 2);
    let labels = Path::new(&seq).join("labels");
    let (a, b) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
    for out in [&a, &b] {
        let o = pantrack(&[
            "render",
            "--seq",
            &seq,
            "--labels",
            p(&labels),
            "--frame",
            "1",
            "--out",
            p(out),
            "--config",
            &cfg,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert!(bytes.starts_with(b"P6\n1024 128\n255\n"));
    assert_eq!(bytes.len(), b"P6\n1024 128\n255\n".len() + 1024 * 128 * 3);
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let o = pantrack(&[
        "render",
        "--seq",
        &seq,
        "--labels",
        p(&labels),
        "--frame",
        "-1",
        "--out",
        p(&a),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = pantrack(&[
        "render",
        "--seq",
        &seq,
        "--labels",
        p(&labels),
        "--frame",
        "7",
        "--out",
        p(&a),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn quiet_silences_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("light.cfg");
    std::fs::write(&cfg, LIGHT).unwrap();
    let o = pantrack(&[
        "--quiet",
        "simulate",
        "--out",
        p(&dir.path().join("s")),
        "--frames",
        "1",
        "--config",
        p(&cfg),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

use std::path::Path;
use std::process::{Command, Output};

use ballnn::oracle::exact_kth_distance;
use ballnn_cli::formats::parse_balls;
use tempfile::TempDir;

fn ballnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ballnn")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read(dir: &TempDir, name: &str) -> Vec<u8> {
    std::fs::read(dir.path().join(name)).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for name in ["a.txt", "b.txt"] {
        ok(&ballnn(&["gen", "--dim", "2", "--n", "150", "--seed", "9", "--profile", "clustered", "--out", name], dir.path()));
    }
    assert_eq!(read(&dir, "a.txt"), read(&dir, "b.txt"));
    let stdout = ok(&ballnn(&["gen", "--dim", "2", "--n", "150", "--seed", "9", "--profile", "clustered"], dir.path()));
    assert_eq!(stdout.as_bytes(), read(&dir, "a.txt"));
    let three = ok(&ballnn(&["gen", "--dim", "1", "--n", "3", "--seed", "1"], dir.path()));
    assert_eq!(parse_balls(&three).unwrap().len(), 3);
}

#[test]
fn rebuilds_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    ok(&ballnn(&["gen", "--dim", "1", "--n", "120", "--seed", "4", "--out", "balls.txt"], dir.path()));
    for out in ["r1.idx", "r2.idx"] {
        let stats = ok(&ballnn(&["build", "balls.txt", "--out", out], dir.path()));
        assert!(stats.contains("kind registry"));
    }
    for out in ["a1.idx", "a2.idx"] {
        let stats = ok(&ballnn(&["build", "balls.txt", "--k", "11", "--eps", "0.25", "--out", out], dir.path()));
        assert!(stats.contains("kind avd") && stats.contains("w_cells"));
    }
    assert_eq!(read(&dir, "r1.idx"), read(&dir, "r2.idx"));
    assert_eq!(read(&dir, "a1.idx"), read(&dir, "a2.idx"));
}

#[test]
fn query_distances_are_in_original_units() {
    let dir = TempDir::new().unwrap();
    // Far from the unit cube on purpose, to exercise denormalization.
    let balls: Vec<String> = (0..60)
        .map(|i| format!("{} {} {}", 1000.0 + 7.0 * i as f64, -40.0 + 3.0 * (i % 5) as f64, 0.5 + (i % 4) as f64 * 0.25))
        .collect();
    std::fs::write(dir.path().join("balls.txt"), format!("2 60\n{}\n", balls.join("\n"))).unwrap();
    let balls = parse_balls(&String::from_utf8(read(&dir, "balls.txt")).unwrap()).unwrap();
    ok(&ballnn(&["build", "balls.txt", "--out", "reg.idx"], dir.path()));
    ok(&ballnn(&["build", "balls.txt", "--k", "20", "--eps", "0.5", "--out", "avd.idx"], dir.path()));

    let mut queries = String::new();
    let mut points = Vec::new();
    for i in 0..200 {
        let q = vec![990.0 + 2.1 * i as f64, -45.0 + (i % 17) as f64];
        queries.push_str(&format!("{} {} {} {}\n", q[0], q[1], 1 + i % 40, [0.5, 0.2, 0.1][i % 3]));
        points.push(q);
    }
    queries.push_str("1007 -37 1 0.1\nnot a query\n");
    std::fs::write(dir.path().join("q.txt"), &queries).unwrap();

    let out = ok(&ballnn(&["query", "reg.idx", "q.txt"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 202);
    for (i, line) in lines[..200].iter().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 4, "{line}");
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        let ball: usize = cols[1].parse().unwrap();
        let dist: f64 = cols[2].parse().unwrap();
        let (k, eps) = (1 + i % 40, [0.5, 0.2, 0.1][i % 3]);
        let direct = balls[ball].distance(&points[i]);
        assert!((dist - direct).abs() <= 1e-9 * direct.max(1.0), "{line}: direct {direct}");
        let dk = exact_kth_distance(&balls, &points[i], k).unwrap().value;
        assert!((1.0 - eps) * dk <= dist * (1.0 + 1e-9) && dist <= (1.0 + eps) * dk * (1.0 + 1e-9), "{line}: d_k {dk}");
    }
    // Center of ball 1 with k = 1.
    assert!(lines[200].starts_with("200 1 0 "), "{}", lines[200]);
    assert!(lines[201].starts_with("201 error "));

    std::fs::write(dir.path().join("qa.txt"), "1100 -35\n1100 -35 20 0.5\n1e9 1e9\n1100 -35 3\n").unwrap();
    let out = ok(&ballnn(&["query", "avd.idx", "qa.txt"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    let dk = exact_kth_distance(&balls, &[1100.0, -35.0], 20).unwrap().value;
    let dist: f64 = lines[0].split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(0.5 * dk <= dist && dist <= 1.5 * dk, "{dist} vs {dk}");
    assert_eq!(lines[0].split_whitespace().count(), 4);
    assert!(lines[2].ends_with(" out-of-domain"), "{}", lines[2]);
    assert!(lines[3].starts_with("3 error "));
}

#[test]
fn audit_passes_and_catches_truncation() {
    let dir = TempDir::new().unwrap();
    ok(&ballnn(&["gen", "--dim", "2", "--n", "60", "--seed", "2", "--out", "balls.txt"], dir.path()));
    ok(&ballnn(&["build", "balls.txt", "--k", "20", "--eps", "0.5", "--out", "avd.idx"], dir.path()));
    let report = ok(&ballnn(&["audit", "balls.txt", "--index", "avd.idx", "--trials", "200"], dir.path()));
    assert!(report.contains("avd") && report.contains("overall PASS"), "{report}");
    let report = ok(&ballnn(&["audit", "balls.txt", "--trials", "100"], dir.path()));
    assert!(report.contains("overall PASS"));

    let bytes = read(&dir, "avd.idx");
    std::fs::write(dir.path().join("cut.idx"), &bytes[..bytes.len() - 100]).unwrap();
    let out = ballnn(&["audit", "balls.txt", "--index", "cut.idx"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("integrity FAIL"), "{text}");
    assert!(!text.contains("knn"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "1 2\n0.1 0.05\n").unwrap();
    std::fs::write(dir.path().join("overlap.txt"), "1 2\n0.1 0.05\n0.12 0.05\n").unwrap();
    ok(&ballnn(&["gen", "--dim", "2", "--n", "40", "--out", "balls.txt"], dir.path()));
    let code = |args: &[&str]| ballnn(args, dir.path()).status.code();
    assert_eq!(code(&["build", "bad.txt", "--out", "x.idx"]), Some(1));
    assert_eq!(code(&["build", "overlap.txt", "--out", "x.idx"]), Some(1));
    assert_eq!(code(&["build", "missing.txt", "--out", "x.idx"]), Some(1));
    assert_eq!(code(&["build", "balls.txt", "--k", "20", "--out", "x.idx"]), Some(1));
    let small_k = ballnn(&["build", "balls.txt", "--k", "5", "--eps", "0.5", "--out", "x.idx"], dir.path());
    assert_eq!(small_k.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&small_k.stderr).contains("registry index"));
    assert_eq!(code(&["gen", "--dim", "1"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = ok(&ballnn(&["bench", "--dim", "1", "--n", "128,256", "--k", "n/8", "--eps", "0.5", "--trials", "50"], dir.path()));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("d,n,k,eps"));
    assert!(lines[1].starts_with("1,128,16,0.5,practical,"));
    assert!(lines[2].starts_with("1,256,32,0.5,practical,"));
}

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use hopnet::engine::{argmax, eval_plain, project_hops_at};
use hopnet::io::load_network;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hopnet"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_keys(dir: &Path) -> PathBuf {
    let keys = dir.join("keys");
    let o = run(&["keygen", "--params", p(&fixture("tiny.params")), "--out", p(&keys), "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    keys
}

fn write_input(dir: &Path, values: &[f64]) -> PathBuf {
    let path = dir.join("x.csv");
    let text: Vec<String> = values.iter().map(f64::to_string).collect();
    std::fs::write(&path, text.join(",")).unwrap();
    path
}

fn scores(out: &str) -> Vec<f64> {
    out.lines()
        .filter(|l| l.starts_with("score["))
        .map(|l| l.split(" = ").nth(1).unwrap().parse().unwrap())
        .collect()
}

fn header_word(path: &Path, i: usize) -> u64 {
    let bytes = std::fs::read(path).unwrap();
    u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap())
}

#[test]
fn keygen_defaults_determinism_and_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["keygen", "--out", p(out), "--seed", "42"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["params.txt", "secret.key", "public.key", "eval.key"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(header_word(&a.join("public.key"), 2), 8192);
    let again = run(&["keygen", "--out", p(&a), "--seed", "42"]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    assert!(run(&["keygen", "--out", p(&a), "--seed", "42", "--force"]).status.success());
}

#[test]
fn bad_params_file_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.txt");
    std::fs::write(&params, "n = 1024\nlimbs = 7, x\n").unwrap();
    let o = run(&["keygen", "--params", p(&params), "--out", p(&dir.path().join("k"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(run(&["keygen"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn infer_matches_plain_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let keys = tiny_keys(dir.path());
    let net = load_network(&fixture("tiny.fcnw")).unwrap();
    let lanes = 2;
    let report = dir.path().join("hops.csv");
    for (i, x) in [vec![0.0; 16], (0..16).map(|i| ((i * 7 % 11) as f64 - 5.0) / 6.0).collect()]
        .into_iter()
        .enumerate()
    {
        let input = write_input(dir.path(), &x);
        let o = run(&[
            "infer",
            "--model",
            p(&fixture("tiny.fcnw")),
            "--keys",
            p(&keys),
            "--input",
            p(&input),
            "--hops-report",
            p(&report),
            "--seed",
            "1",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let got = scores(&stdout(&o));
        let want = eval_plain(&net, &x).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-3 * w.abs().max(1.0), "input {i}: {g} vs {w}");
        }
        assert!(stdout(&o).contains(&format!("prediction = {}", argmax(&want).unwrap())));
    }
    // report totals equal the static projection over both lanes
    let projected = project_hops_at(&net, 12).unwrap().scaled(lanes);
    let csv = std::fs::read_to_string(&report).unwrap();
    let total: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let t = projected.totals();
    assert_eq!(total[0], "total");
    let want = [t.pt_ct_add, t.ct_ct_add, t.pt_ct_mul, t.ct_ct_mul, t.fast_path_hits].map(|v| v.to_string());
    assert_eq!([total[1], total[2], total[3], total[4], total[6]], want);
}

struct Server {
    child: std::process::Child,
    addr: String,
}

impl Server {
    fn start(params: &Path, eval_keys: &Path) -> Self {
        let mut child = bin()
            .args([
                "serve",
                "--model",
                p(&fixture("tiny.fcnw")),
                "--params",
                p(params),
                "--eval-keys",
                p(eval_keys),
                "--listen",
                "127.0.0.1:0",
                "--once",
            ])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listen line").to_string();
        Self { child, addr }
    }

    fn finish(self) -> String {
        let out = self.child.wait_with_output().unwrap();
        assert!(out.status.success());
        stderr(&out)
    }
}

#[test]
fn loopback_equals_local_infer() {
    let dir = tempfile::tempdir().unwrap();
    let keys = tiny_keys(dir.path());
    let x: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) / 8.0).collect();
    let input = write_input(dir.path(), &x);
    let server = Server::start(&keys.join("params.txt"), &keys.join("eval.key"));
    let remote = run(&["client", "--keys", p(&keys), "--input", p(&input), "--connect", &server.addr, "--seed", "5"]);
    assert!(remote.status.success(), "{}", stderr(&remote));
    let log = server.finish();
    assert!(log.contains("HOPs"), "{log}");
    let local = run(&[
        "infer",
        "--model",
        p(&fixture("tiny.fcnw")),
        "--keys",
        p(&keys),
        "--input",
        p(&input),
        "--seed",
        "9",
    ]);
    assert!(local.status.success());
    // both paths decrypt the same exact integers
    assert_eq!(scores(&stdout(&remote)), scores(&stdout(&local)));
}

#[test]
fn digest_mismatch_reaches_the_client() {
    let dir = tempfile::tempdir().unwrap();
    let keys = tiny_keys(dir.path());
    let other = dir.path().join("other");
    let params = dir.path().join("other.params");
    let text = std::fs::read_to_string(fixture("tiny.params")).unwrap();
    std::fs::write(&params, text.replace("t_lanes = 40961, 65537", "t_lanes = 65537, 114689")).unwrap();
    let o = run(&["keygen", "--params", p(&params), "--out", p(&other), "--seed", "3"]);
    assert!(o.status.success());
    let input = write_input(dir.path(), &[0.25; 16]);
    let server = Server::start(&keys.join("params.txt"), &keys.join("eval.key"));
    let o = run(&["client", "--keys", p(&other), "--input", p(&input), "--connect", &server.addr]);
    server.finish();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("digest"), "{}", stderr(&o));
}

#[test]
fn serve_refuses_secret_keys() {
    let dir = tempfile::tempdir().unwrap();
    let keys = tiny_keys(dir.path());
    let model = fixture("tiny.fcnw");
    let params = keys.join("params.txt");
    let secret = keys.join("secret.key");
    let o = run(&["serve", "--model", p(&model), "--params", p(&params), "--eval-keys", p(&secret), "--listen", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("secret key"));
    let o = run(&["serve", "--model", p(&model), "--params", p(&params), "--secret-key", p(&secret), "--listen", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(2));
    let src = include_str!("../src/serve.rs");
    assert!(!src.contains("decrypt") && !src.contains("SecretKey") && !src.contains("secret_key_from"));
}

#[test]
fn approx_reports_power_of_two_coefficients() {
    let o = run(&["approx", "--fn", "relu"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("optimal exponents -2 -1 -3"), "{}", stdout(&o));
    let o = run(&["approx", "--fn", "softplus", "--interval", "4", "--grid", "10001"]);
    assert!(stdout(&o).contains("optimal exponents 0 -1 -4"), "{}", stdout(&o));
    let o = run(&["approx", "--fn", "swish", "--degree", "2"]);
    let line = stdout(&o).lines().find(|l| l.starts_with("optimal c0")).unwrap().to_string();
    assert!(line.contains("c1=2^-1 c2=2^-3"), "{line}");
    assert_eq!(run(&["approx", "--fn", "tanh"]).status.code(), Some(2));
}

#[test]
fn compress_quantized_model_is_monomial_encodable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("small.fcnw");
    let o = run(&["compress", "--model", p(&fixture("tiny.fcnw")), "--prune", "0.5", "--quantize", "1.0", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("true")), "{report}");
    let net = load_network(&out).unwrap();
    let before = load_network(&fixture("tiny.fcnw")).unwrap();
    assert!(project_hops_at(&net, 12).unwrap().totals().total() < project_hops_at(&before, 12).unwrap().totals().total());
    assert_eq!(run(&["compress", "--model", p(&out), "--prune", "1.5"]).status.code(), Some(2));
}

#[test]
fn hops_ratio_for_mnist_configs() {
    let ratio = |config: &str| {
        let o = run(&["hops", "--config", config, "--maps", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        let line = out.lines().find(|l| l.starts_with("ratio")).unwrap().to_string();
        (line.rsplit(' ').next().unwrap().parse::<f64>().unwrap(), out)
    };
    let (a, dense) = ratio("cryptonets");
    let (b, faster) = ratio("faster");
    assert_eq!(a, b);
    assert!((7.3..=10.9).contains(&a), "{a}");
    assert!(dense.contains("act-1,0,0,0,845,"), "{dense}");
    assert!(!faster.contains("act-1,0,0,0,845,"));
    let o = run(&["hops", "--model", p(&fixture("tiny.fcnw")), "--precision", "12"]);
    assert!(stdout(&o).contains("total HOPs ="));
    assert_eq!(run(&["hops"]).status.code(), Some(2));
}

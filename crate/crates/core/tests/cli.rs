use std::fs;
use std::path::Path;
use std::process::Command;

use potinv::harness::{read_csv, RateRow, SweepRow};

const SMALL: &str = r#"
dim = 2
M = 8
M_fine = 32
k = 21
sigma = 0.02
gamma = { mode = "fixed", value = 1e-7 }

[optimizer]
max_iter = 60

[sweep]
gammas = [1e-6, 1e-8, 1e-8]

[rate]
k_list = [11, 21]
m_max = 8

[adaptive]
max_outer = 4
"#;

fn potinv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_potinv")).args(args).output().unwrap()
}

fn setup(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, format!("{extra}\n{SMALL}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn header(path: &Path) -> (String, String) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    (lines.next().unwrap().to_string(), lines.next().unwrap().to_string())
}

#[test]
fn every_subcommand_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), "");
    let expect: &[(&str, &[&str])] = &[
        ("mesh-info", &["nodes.csv", "elements.csv", "points.csv"]),
        ("forward", &["u_true.csv", "observations.csv"]),
        ("run", &["report.csv", "iterations.csv", "q.csv"]),
        ("adapt", &["gamma_trace.csv", "report.csv"]),
        ("sweep", &["sweep.csv", "plot_sweep_e_q.csv"]),
        ("rate", &["rate.csv", "plot_rate_e_u.csv"]),
    ];
    for (cmd, files) in expect {
        let out = dir.path().join(cmd);
        let o = potinv(&[cmd, "--config", &config, "--out", out.to_str().unwrap(), "--seed", "4"]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        for f in *files {
            assert!(out.join(f).is_file(), "{cmd} did not write {f}");
        }
        assert!(fs::read_dir(&out)
            .unwrap()
            .all(|e| !e.unwrap().path().to_string_lossy().ends_with(".partial")));
    }

    let sweep = dir.path().join("sweep/sweep.csv");
    let (hash, cols) = header(&sweep);
    assert!(hash.starts_with("# config_hash=") && hash.len() == "# config_hash=".len() + 64);
    assert_eq!(cols, "gamma,e_q,e_u");
    let (_, rows): (_, Vec<SweepRow>) = read_csv(&sweep).unwrap();
    assert_eq!(rows.len(), 3);
    // duplicated γ, identical observations
    assert_eq!(rows[1], rows[2]);

    assert_eq!(header(&dir.path().join("rate/rate.csv")).1, "n,gamma,M,e_q,e_u");
    let (_, rate): (_, Vec<RateRow>) = read_csv(&dir.path().join("rate/rate.csv")).unwrap();
    assert_eq!(rate.iter().map(|r| r.n).collect::<Vec<_>>(), vec![121, 441]);
    assert!(rate[1].gamma < rate[0].gamma);

    assert_eq!(
        header(&dir.path().join("adapt/gamma_trace.csv")).1,
        "k,gamma,misfit,q_h1,e_q"
    );
    assert_eq!(
        header(&dir.path().join("run/iterations.csv")).1,
        "k,J,misfit,penalty,grad_norm,step,beta"
    );
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), "");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = potinv(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        ["report.csv", "iterations.csv", "q.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "dim = 7\n").unwrap();
    let o = potinv(&["run", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = potinv(&[
        "run",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    // a linear-solver budget too small to converge
    let config = setup(dir.path(), "");
    let mut text = fs::read_to_string(&config).unwrap();
    text = text.replace("max_iter = 60", "max_iter = 60\nsolver_max_iter = 2");
    fs::write(&config, text).unwrap();
    let o = potinv(&["run", "--config", &config, "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

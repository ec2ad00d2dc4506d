use std::path::Path;
use std::process::{Command, Output};

fn stakeurn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stakeurn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = stakeurn(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[validators]\nn = 20\n[sweep]\naxis1 = { name = \"lambda_borrow\", values = [0.1, 0.9] }\naxis2 = { name = \"lambda_slash\", values = [0.1, 0.9] }\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    for cmd in ["sim2", "sim3", "sweep2", "sweep3"] {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let dir = tmp.path().join(format!("{cmd}-{threads}"));
            let d = dir.to_str().unwrap();
            run_ok(&[
                cmd,
                "--config",
                cfg,
                "--seed",
                "42",
                "--trajectories",
                "3",
                "--h-max",
                "400",
                "--threads",
                threads,
                "--out",
                d,
            ]);
            outputs.push(files(&dir));
        }
        assert!(!outputs[0].is_empty(), "{cmd} wrote nothing");
        assert_eq!(outputs[0], outputs[1], "{cmd} differs across thread counts");
    }
}

#[test]
fn rerun_with_manifest_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let args = [
        "sweep2",
        "--seed",
        "3",
        "--trajectories",
        "1",
        "--h-max",
        "200",
        "--out",
        d,
    ];
    run_ok(&args);
    let first = std::fs::read(tmp.path().join("sweep2.csv")).unwrap();
    assert!(tmp.path().join("sweep2.manifest.json").exists());
    run_ok(&args);
    assert_eq!(first, std::fs::read(tmp.path().join("sweep2.csv")).unwrap());
    // header plus 81 cells × 4 metrics × 2 stats
    assert_eq!(
        String::from_utf8(first).unwrap().lines().count(),
        1 + 81 * 8
    );
}

#[test]
fn analytic_table() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    run_ok(&[
        "analytic", "--p", "0,0.5", "--k", "1", "--sigma2", "2", "--out", d,
    ]);
    let text = std::fs::read_to_string(tmp.path().join("analytic.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,gamma,beta,aleph,k,sigma_s2,s_star");
    assert!(lines[1].starts_with("0,0,1,2,1,2,0.7071"));
    assert!(lines[2].starts_with("0.5,1,,,1,2,"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[sim]\nunknown_key = 1\n").unwrap();
    let code = |args: &[&str]| stakeurn(args).status.code();

    assert_eq!(
        code(&["sim2", "--config", bad.to_str().unwrap(), "--out", d]),
        Some(2)
    );
    assert_eq!(code(&["sim2", "--no-such-flag"]), Some(2));
    assert_eq!(code(&["sim2", "--h-max", "3", "--out", d]), Some(2));
    assert_eq!(code(&["analytic", "--p", "1.5", "--out", d]), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(
        code(&["sim2", "--config", missing.to_str().unwrap(), "--out", d]),
        Some(4)
    );
    // output path blocked by a regular file
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    assert_eq!(
        code(&["analytic", "--out", blocker.to_str().unwrap()]),
        Some(4)
    );
}

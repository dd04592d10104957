use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stospec(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stospec"));
    cmd.args(args).env_remove("STOSPEC_OUT");
    if let Some(p) = env_out {
        cmd.env("STOSPEC_OUT", p);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SWEEP: &str = "study = density-sweep\n[seeds]\ncount = 1\n[study]\nalpha = linspace(-2, 2, 21)\nsigma = 1\n";
const FTLE: &str = "study = ftle\n[seeds]\ncount = 40\n[study]\nt = 6\n[cocycle]\nkind = diagonal-iid\nblock1 = 2, 0.5\nblock2 = 8, 4\n";

#[test]
fn density_sweep_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.cfg", SWEEP);
    let out = dir.path().join("out");
    let o = stospec(&["density-sweep", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert!(out.join("envelope.json").exists() && out.join("lambda.dat").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.cfg", "study = ftle\n[seeds]\nlist = \n[study]\nt = 1\n");
    assert_eq!(stospec(&["ftle", "--config", &empty], None).status.code(), Some(1));
    let zero = write(dir.path(), "zero.cfg", &FTLE.replace("count = 40", "count = 0"));
    let o = stospec(&["ftle", "--config", &zero], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed list is empty"));
    let sweep = write(dir.path(), "sweep.cfg", SWEEP);
    assert_eq!(stospec(&["ftle", "--config", &sweep], None).status.code(), Some(1));
    assert_eq!(stospec(&["bogus", "--config", &sweep], None).status.code(), Some(1));
    assert_eq!(stospec(&["ftle", "--config", &sweep, "--workers", "0"], None).status.code(), Some(1));
    assert_eq!(stospec(&["ftle", "--config", "/nonexistent/file.cfg"], None).status.code(), Some(1));
}

#[test]
fn validate_prints_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ftle.cfg", FTLE);
    let o = stospec(&["validate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("study = ftle\n"));
    assert!(text.contains("# sha256 "));
}

#[test]
fn env_override_and_worker_independence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ftle.cfg", FTLE);
    let env_dir = dir.path().join("env");
    let a = stospec(&["ftle", "--config", &cfg, "--workers", "1"], Some(&env_dir));
    assert_eq!(a.status.code(), Some(0));
    let b_dir = dir.path().join("b");
    let b = stospec(&["ftle", "--config", &cfg, "--workers", "4", "--out", b_dir.to_str().unwrap()], Some(&env_dir.join("unused")));
    assert_eq!(b.status.code(), Some(0));
    for f in ["payload.json", "ftle.csv", "ftle_hist.dat"] {
        assert_eq!(fs::read(env_dir.join(f)).unwrap(), fs::read(b_dir.join(f)).unwrap(), "{f}");
    }
    assert!(!env_dir.join("unused").exists());
    let c_dir = dir.path().join("c");
    stospec(&["ftle", "--config", &cfg, "--seed-offset", "7", "--out", c_dir.to_str().unwrap()], None);
    assert_ne!(fs::read(env_dir.join("payload.json")).unwrap(), fs::read(c_dir.join("payload.json")).unwrap());
}

#[test]
fn inconclusive_estimate_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // Level 1 leaves grid points without a root, which is reported as inconclusive.
    let cfg = write(
        dir.path(),
        "conj.cfg",
        "study = conjugacy\n[seeds]\ncount = 1\n[study]\nalpha = -0.25\nsigma = 1\ndt = 0.01\nlevel = 1\nx = logspace(-3, 1, 3)\n",
    );
    let o = stospec(&["conjugacy", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no root"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "cfg") {
            let o = stospec(&["validate", "--config", p.to_str().unwrap()], None);
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
            n += 1;
        }
    }
    assert!(n >= 6);
}

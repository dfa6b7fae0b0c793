//! End-to-end tests of the `togglebrain` binary: exit codes, log output,
//! snapshot round-trips, microcode dumps, and seeded determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use togglebrain_core::{cue_editor_step, AdderMicrocode, CueSet};

const CONFIG: &str = "\
attributes = 8
subpriority_width = 3
importance = 1:7, 2:5, 3:3
major_mask = 0,1,2,3
significance_mask = 1,2,3
repeat_threshold = 3
half_period = 20000
seed = 42
";

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).expect("create tmp dir");
    dir.join(name)
}

fn write_tmp(name: &str, contents: &str) -> PathBuf {
    let path = tmp(name);
    std::fs::write(&path, contents).expect("write tmp file");
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_togglebrain"))
        .args(args)
        .output()
        .expect("spawn togglebrain")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

#[test]
fn missing_config_flag_exits_one() {
    let out = run(&["--cycles", "2"]);
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("--config"), "stderr was: {err}");
}

#[test]
fn unreadable_or_malformed_config_exits_one() {
    let out = run(&["--config", "/nonexistent/run.cfg"]);
    assert_eq!(exit_code(&out), 1);

    let cfg = write_tmp("bad.cfg", "attributes = 8\nbogus_key = 1\n");
    let out = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn malformed_stimuli_exits_two() {
    let cfg = write_tmp("stim_err.cfg", CONFIG);
    let stim = write_tmp("stim_err.stim", "0,11000000\n5,xx\n");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--stimuli",
        stim.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn malformed_snapshot_exits_three() {
    let cfg = write_tmp("snap_err.cfg", CONFIG);
    let snap = write_tmp("snap_err.snap", "not a snapshot\n");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--snapshot-in",
        snap.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn snapshot_width_mismatch_exits_three() {
    let cfg = write_tmp("snap_k.cfg", CONFIG);
    let snap = write_tmp("snap_k.snap", "K=4 M=8\n");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--snapshot-in",
        snap.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("attributes"), "stderr was: {err}");
}

#[test]
fn snapshot_round_trip_restores_memory() {
    let cfg = write_tmp("round.cfg", CONFIG);
    let stim = write_tmp(
        "round.stim",
        "0,11000000\n40000,10100000\n80000,10010000\n",
    );
    let snap1 = tmp("round1.snap");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--stimuli",
        stim.to_str().unwrap(),
        "--cycles",
        "6",
        "--snapshot-out",
        snap1.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let saved = std::fs::read_to_string(&snap1).expect("snapshot written");
    assert!(saved.starts_with("K=8 M=64\n"), "snapshot was: {saved}");
    assert_eq!(saved.lines().count(), 4, "header plus three images");

    // A fresh process preloading the snapshot must answer a cue probe with
    // the persisted images. The probe is not significant and not repeated,
    // so the store comes out unchanged.
    let probe = write_tmp("round.probe", "0,10000000\n");
    let snap2 = tmp("round2.snap");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--stimuli",
        probe.to_str().unwrap(),
        "--cycles",
        "2",
        "--snapshot-in",
        snap1.to_str().unwrap(),
        "--snapshot-out",
        snap2.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let log = stdout(&out);
    assert!(log.contains("0\tSEARCH\t0\n"), "log was: {log}");
    assert!(log.contains("0\tHIT\t0,1,2\n"), "log was: {log}");
    assert!(log.contains("0\tSELECT\t0\t7\t3\n"), "log was: {log}");
    assert!(log.contains("1\tLOAD_STM\tRECALL\t11000000\n"), "log was: {log}");

    let resaved = std::fs::read_to_string(&snap2).expect("snapshot rewritten");
    assert_eq!(saved, resaved, "probe run must not disturb the store");
}

#[test]
fn dump_microcode_parses_back() {
    let cfg = write_tmp("dump.cfg", CONFIG);
    let dump = tmp("dump.microcode");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--dump-microcode",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let text = std::fs::read_to_string(&dump).expect("microcode written");
    let code = AdderMicrocode::parse_text(&text).expect("dump must parse back");
    // Three importance entries mean three subpriority fields, summed by
    // two adder blocks.
    assert_eq!(code.block_count(), 2);
    assert_eq!(code.to_text(), text);
}

#[test]
fn identical_invocations_write_identical_logs() {
    let cfg = write_tmp("det.cfg", CONFIG);
    let stim = write_tmp("det.stim", "0,11000000\n40000,10100000\n");
    let mut logs = Vec::new();
    for name in ["det1.log", "det2.log"] {
        let log = tmp(name);
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--stimuli",
            stim.to_str().unwrap(),
            "--cycles",
            "6",
            "--log",
            log.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0);
        assert!(stdout(&out).is_empty(), "log goes to the file, not stdout");
        logs.push(std::fs::read(&log).expect("log written"));
    }
    assert_eq!(logs[0], logs[1]);
}

/// The cue-removal order the editor produces for `seed`, starting from the
/// cue set {1, 2, 3}.
fn expected_removals(seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cues = CueSet::from_indices([1, 2, 3]);
    let mut removals = Vec::new();
    while let Some((next, removed)) = cue_editor_step(&cues, &mut rng) {
        removals.push(removed);
        cues = next;
    }
    removals
}

#[test]
fn seed_flag_overrides_config_seed() {
    // No significance bits and no repetition: the frame is never memorized,
    // every search misses, and the armed editor is the only consumer of
    // randomness, so the CUE_EDIT rows expose which seed the run used.
    let cfg = write_tmp(
        "seed.cfg",
        "\
attributes = 8
subpriority_width = 3
importance = 1:7, 2:5, 3:3
major_mask = 0,1,2,3
repeat_threshold = 3
half_period = 20000
seed = 42
",
    );
    let stim = write_tmp("seed.stim", "0,01110000\n");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--stimuli",
        stim.to_str().unwrap(),
        "--cycles",
        "7",
        "--seed",
        "7",
    ]);
    assert_eq!(exit_code(&out), 0);
    let log = stdout(&out);
    let removed: Vec<usize> = log
        .lines()
        .filter(|line| line.contains("\tCUE_EDIT\t"))
        .map(|line| line.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(removed, expected_removals(7));
    assert_ne!(
        expected_removals(7),
        expected_removals(42),
        "seeds 7 and 42 must disagree for this test to discriminate"
    );
}

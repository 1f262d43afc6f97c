use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcbf_swarm_cli::{EVENTS_FILE, EVENTS_HEADER, TRAJECTORY_FILE, TRAJECTORY_HEADER};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcbf-swarm"))
        .args(args)
        .current_dir(dir)
        .env_remove("RCBF_SWARM_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_value(report: &str, label: &str) -> String {
    report
        .lines()
        .find(|l| l.trim_start().starts_with(label))
        .unwrap_or_else(|| panic!("no `{label}` in\n{report}"))
        .trim_start()[label.len()..]
        .trim()
        .to_string()
}

#[test]
fn validate_accepts_the_bundled_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["validate", "threeVthree"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn validate_reports_violations_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = rcbf_swarm::ScenarioConfig::bundled("threeVthree").unwrap();
    let text = cfg
        .to_toml_string()
        .unwrap()
        .replace("r_s = 300.0", "r_s = 200.0");
    fs::write(tmp.path().join("tight.toml"), text).unwrap();
    let o = cli(&["validate", "tight.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("r_s = 200"));
}

#[test]
fn unparsable_scenario_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("junk.toml"), "agents = 3").unwrap();
    assert_eq!(
        cli(&["validate", "junk.toml"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn missing_scenario_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        cli(&["run", "nowhere.toml"], tmp.path()).status.code(),
        Some(4)
    );
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("file"), "").unwrap();
    let o = cli(&["run", "threeVthree", "--out", "file"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn baseline_run_reports_the_collision() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(
        &["run", "threeVthree", "--filter", "off", "--out", "out"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    assert_eq!(report_value(&report, "collisions"), "1");
    let events = fs::read_to_string(
        tmp.path()
            .join("out/threeVthree-baseline")
            .join(EVENTS_FILE),
    )
    .unwrap();
    assert_eq!(events.lines().next().unwrap(), EVENTS_HEADER.join(","));
    assert!(events.lines().any(|l| l.contains(",collision,1,2,")));
}

#[test]
fn filtered_run_intercepts_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(
        &["run", "threeVthree", "--filter", "on", "--out", "out"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    assert_eq!(report_value(&report, "interceptions"), "3");
    assert_eq!(report_value(&report, "collisions"), "0");
    let traj = fs::read_to_string(
        tmp.path()
            .join("out/threeVthree-filtered")
            .join(TRAJECTORY_FILE),
    )
    .unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER.join(","));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), TRAJECTORY_HEADER.len());
    assert_eq!(first[0], "0.0000000000000000e0");
    assert_eq!(first[1..3], ["1", "effector"]);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = cli(&["compare", "threeVthree", "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for mode in ["baseline", "filtered"] {
        for file in [TRAJECTORY_FILE, EVENTS_FILE, "config.toml"] {
            let read = |root: &str| {
                fs::read(
                    tmp.path()
                        .join(root)
                        .join(format!("threeVthree-{mode}"))
                        .join(file),
                )
                .unwrap()
            };
            assert!(read("a") == read("b"), "{mode}/{file} differs");
        }
    }
}

#[test]
fn override_changes_exactly_one_key() {
    let tmp = tempfile::tempdir().unwrap();
    let plain = cli(
        &["run", "threeVthree", "--filter", "off", "--out", "plain"],
        tmp.path(),
    );
    let tuned = cli(
        &[
            "run",
            "threeVthree",
            "--filter",
            "off",
            "--out",
            "tuned",
            "--override",
            "guidance.nav_constant=3",
        ],
        tmp.path(),
    );
    assert_eq!(plain.status.code(), Some(0));
    assert_eq!(tuned.status.code(), Some(0));
    let read = |root: &str| -> toml::Table {
        let text = fs::read_to_string(
            tmp.path()
                .join(root)
                .join("threeVthree-baseline/config.toml"),
        )
        .unwrap();
        toml::from_str(&text).unwrap()
    };
    let (mut a, b) = (read("plain"), read("tuned"));
    assert_eq!(b["guidance"]["nav_constant"].as_float(), Some(3.0));
    a["guidance"]["nav_constant"] = toml::Value::Float(3.0);
    assert_eq!(a, b);
}

#[test]
fn bad_overrides_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in [
        "safety.nope=1",
        "safety.r_s=fast",
        "safety.r_s",
        "safety.r_s=100",
    ] {
        let o = cli(&["run", "threeVthree", "--override", bad], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rcbf-swarm"))
        .args(["run", "threeVthree", "--filter", "off"])
        .current_dir(tmp.path())
        .env("RCBF_SWARM_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp
        .path()
        .join("from-env/threeVthree-baseline")
        .join(TRAJECTORY_FILE)
        .is_file());
}

#[test]
fn compare_prints_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["compare", "threeVthree", "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    let header = report.lines().nth(1).unwrap();
    assert!(header.contains("baseline") && header.contains("filtered"));
    let collisions = report_value(&report, "collisions");
    let collisions: Vec<&str> = collisions.split_whitespace().collect();
    assert_eq!(collisions, ["1", "0"]);
}

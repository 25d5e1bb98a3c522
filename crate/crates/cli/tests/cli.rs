use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("hmms.toml"), "database = \"data/hmms.db\"\nruleset = \"rules.toml\"\n").unwrap();
        Env { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, body: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn hmms(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_hmms"))
            .args(args)
            .env("HMMS_CONFIG", self.path("hmms.toml"))
            .env("HMMS_ADMIN_PASSWORD", "bootstrap")
            .env_remove("RUST_LOG")
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn init(&self) {
        let out = self.hmms(&["init"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let out = self.hmms(&["ingest", "students", self.write("students.csv", STUDENTS).to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const STUDENTS: &str = "screening_id,rfid_token,student_name,date_of_birth
S1,CARD-0001,Mina Akter,2016-02-01
S2,CARD-0002,Rafi Khan,2014-07-19
";

#[test]
fn init_is_idempotent_and_installs_default_ruleset() {
    let env = Env::new();
    let out = env.hmms(&["init"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("catalog of 45 parameters"));
    assert!(env.path("data/hmms.db").exists());
    assert!(env.path("rules.toml").exists());
    let again = env.hmms(&["init"]);
    assert!(again.status.success());
    assert!(stdout(&again).contains("already initialized"));
}

#[test]
fn ingest_exit_codes() {
    let env = Env::new();
    env.init();
    let clean = env.write("v1.csv", "screening_id,parameter_key,value,camp_year,recorded_at\nS1,Height,118,2024,\nS1,Weight,21,2024,\n");
    let out = env.hmms(&["ingest", "values", s(&clean)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("2 rows read, 2 ok, 0 rejected"));

    let partial = env.write(
        "v2.csv",
        "screening_id,parameter_key,value,camp_year,recorded_at\nS1,Birth Weight,3.1,,\nS1,Birth Weight,3.4,,\nS2,Height,120,2024,\n",
    );
    let report = env.path("report.json");
    let out = env.hmms(&["ingest", "values", s(&partial), "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("line 3: ImmutableParameter"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["rows_read"], 3);
    assert_eq!(json["rows_ok"], 2);
    assert_eq!(json["rejected"][0]["code"], "ImmutableParameter");

    let wrong = env.write("v3.csv", "id,key,value\nS1,Height,120\n");
    let out = env.hmms(&["ingest", "values", s(&wrong)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error[HeaderMismatch]"));

    let out = env.hmms(&["ingest", "doses", s(&env.path("missing.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error[FileUnreadable]"));
}

#[test]
fn screen_and_export_cohort() {
    let env = Env::new();
    env.init();
    let values = env.write(
        "v.csv",
        "screening_id,parameter_key,value,camp_year,recorded_at
S1,Height,118,2024,2024-03-01T09:00:00Z
S1,Weight,21,2024,2024-03-01T09:00:00Z
S2,Height,140,2024,2024-03-01T09:00:00Z
",
    );
    env.hmms(&["ingest", "values", s(&values)]);
    let report = env.path("screen.json");
    let out = env.hmms(&["screen", "--as-of", "2024-06-01", "--report", s(&report)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("screened 2 students as of 2024-06-01; 2 referrals"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["outcomes"].as_array().unwrap().len(), 2);

    let csv = env.path("cohort.csv");
    let args = ["export-cohort", "--age-min", "4", "--age-max", "16", "--feature", "Height,Weight", "--feature", "bmi"];
    let out = env.hmms(&[&args[..], &["--as-of", "2024-06-01", "--out", s(&csv)]].concat());
    assert!(out.status.success(), "{}", stderr(&out));
    let bmi = 21.0 / (1.18f64 * 1.18);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("screening_id,Height,Weight,bmi"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["S1", "118", "21"]);
    assert!((row[3].parse::<f64>().unwrap() - bmi).abs() / bmi < 1e-9);
    assert_eq!(lines.next(), None);

    let out = env.hmms(&["export-cohort", "--age-min", "4", "--age-max", "16", "--feature", "Shoe Size"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error[UnresolvedFeatureKey]"));
}

#[test]
fn ruleset_commands() {
    let env = Env::new();
    env.init();
    let good = env.write("candidate.toml", hmms_core_ruleset());
    let out = env.hmms(&["ruleset", "validate", s(&good)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let bad = env.write("bad.toml", &hmms_core_ruleset().replace("\"Vision Condition\"", "\"Vision\""));
    let out = env.hmms(&["ruleset", "validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("UnresolvedRuleKey"));

    let trimmed = "ruleset_version = 2\nlabel = \"vision only\"\n\n[[rule]]\nid = \"vision\"\nparameter = \"Vision Condition\"\nseverity = \"fail\"\nmessage = \"vision\"\npredicate = { type = \"must_equal\", value = \"Normal\" }\n";
    let candidate = env.write("v2.toml", trimmed);
    let out = env.hmms(&["ruleset", "install", s(&candidate)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(env.path("rules.toml")).unwrap(), trimmed);
    let out = env.hmms(&["ruleset", "show"]);
    assert!(stdout(&out).contains("vision only"));
}

fn hmms_core_ruleset() -> &'static str {
    include_str!("../../core/data/ruleset.toml")
}

#[test]
fn backup_round_trip() {
    let env = Env::new();
    env.init();
    let doses = env.write("d.csv", "screening_id,vaccine_code,dose_number,given_on\nS1,BCG,1,2016-02-03\n");
    assert!(env.hmms(&["ingest", "doses", s(&doses)]).status.success());
    let out = env.hmms(&["backup", "doses"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "screening_id,vaccine_code,dose_number,given_on\nS1,BCG,1,2016-02-03\n");
    let students = env.path("students-backup.csv");
    env.hmms(&["backup", "students", "--out", s(&students)]);
    assert_eq!(std::fs::read_to_string(students).unwrap(), STUDENTS);
}

#[test]
fn schedule_and_generate() {
    let env = Env::new();
    let out = env.hmms(&["schedule", "show"]);
    assert_eq!(stdout(&out).lines().count(), 7);
    let out = env.hmms(&["generate", "--count", "12", "--seed", "3", "--as-of", "2024-06-01"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = env.hmms(&["backup", "students"]);
    assert_eq!(stdout(&out).lines().count(), 13);
}

#[test]
fn serve_reports_busy_port() {
    let env = Env::new();
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let out = env.hmms(&["serve", "--port", &port]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error[PortInUse]"), "{}", stderr(&out));
}

#[test]
fn bad_config_is_fatal() {
    let env = Env::new();
    std::fs::write(env.path("hmms.toml"), "database = \"x.db\"\ncatalog = \"nope.toml\"\n").unwrap();
    let out = env.hmms(&["screen"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error["));
}

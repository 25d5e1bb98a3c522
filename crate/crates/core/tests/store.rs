mod common;

use std::sync::Arc;

use common::{date, Fixture};
use hmms_core::record::{Referral, ReferralStatus};
use hmms_core::screening::{Finding, Verdict};
use hmms_core::store::{AuditAction, Store};
use hmms_core::synth::{generate, SynthOptions};

fn finding() -> Finding {
    Finding {
        rule_id: "vision".into(),
        parameter_key: "Vision Condition".into(),
        observed: Some("Abnormal-Refer".into()),
        verdict: Verdict::Fail,
        disease_hints: vec![],
        message: "vision not normal".into(),
    }
}

fn referral(id: &str, student: &str) -> Referral {
    Referral {
        referral_id: id.into(),
        screening_id: student.into(),
        created_at: common::noon(date(2021, 5, 1)),
        findings: vec![finding()],
        status: ReferralStatus::Open,
        doctor_notes: None,
    }
}

#[test]
fn registration() {
    let fx = Fixture::new();
    let store = fx.store();
    let r = store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    assert_eq!(r.observation_count(), 0);
    assert_eq!(store.audit_log().last().unwrap().action, AuditAction::Create);

    let dup_token = store.register_student(fx.identity("S2", "Rafi", date(2015, 1, 1)), "TOKEN-1", "nurse");
    assert_eq!(dup_token.unwrap_err().code(), "DuplicateRfidToken");
    let dup_id = store.register_student(fx.identity("S1", "Rafi", date(2015, 1, 1)), "TOKEN-2", "nurse");
    assert_eq!(dup_id.unwrap_err().code(), "DuplicateScreeningId");

    let no_dob = vec![fx.once("Screening ID", "S3"), fx.once("Student Name", "Tia")];
    assert_eq!(store.register_student(no_dob, "TOKEN-3", "nurse").unwrap_err().code(), "MissingRequiredField");
    assert_eq!(
        store.register_student(fx.identity("S4", "Ali", date(2015, 1, 1)), "abc", "nurse").unwrap_err().code(),
        "InvalidRfidToken"
    );
    assert_eq!(store.student_count(), 1);
}

#[test]
fn one_time_values_are_immutable() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    store.record_value("S1", fx.once("Birth Weight", "2.9"), "nurse").unwrap();
    let err = store.record_value("S1", fx.once("Birth Weight", "3.4"), "nurse").unwrap_err();
    assert_eq!(err.code(), "ImmutableParameter");
    assert_eq!(store.student("S1").unwrap().one_time_values["Birth Weight"].value.render(), "2.9");
}

#[test]
fn multiple_time_values_keep_history() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    store.record_value("S1", fx.camp("Height", "121.5", date(2022, 3, 1)), "nurse").unwrap();
    store.record_value("S1", fx.camp("Height", "114.0", date(2021, 3, 1)), "nurse").unwrap();
    let s = store.student("S1").unwrap();
    let history = &s.observations["Height"];
    assert_eq!(history.len(), 2);
    assert_eq!(history.iter().map(|v| v.camp_year.unwrap()).collect::<Vec<_>>(), [2021, 2022]);
    assert_eq!(s.latest("Height").unwrap().value.as_f64(), Some(121.5));
}

#[test]
fn unknown_parameter_and_student() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    let mut v = fx.camp("Height", "120", date(2021, 3, 1));
    v.key = "Shoe Size".into();
    assert_eq!(store.record_value("S1", v, "nurse").unwrap_err().code(), "UnknownParameter");
    let v = fx.camp("Height", "120", date(2021, 3, 1));
    assert_eq!(store.record_value("nobody", v, "nurse").unwrap_err().code(), "UnknownStudent");
}

#[test]
fn edit_is_limited_to_current_camp() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    store.record_value("S1", fx.camp("Weight", "20", date(2021, 3, 1)), "nurse").unwrap();
    let fix = fx.camp("Weight", "21", date(2021, 3, 2));
    let s = store.edit_value("S1", fix.clone(), 2021, "nurse").unwrap();
    assert_eq!(s.latest("Weight").unwrap().value.as_f64(), Some(21.0));
    assert_eq!(s.observations["Weight"].len(), 2);
    assert_eq!(store.edit_value("S1", fix, 2022, "nurse").unwrap_err().code(), "EditOutsideCurrentCamp");
    let fresh = fx.camp("Height", "110", date(2021, 3, 2));
    assert_eq!(store.edit_value("S1", fresh, 2021, "nurse").unwrap_err().code(), "NothingToEdit");
    assert_eq!(
        store.edit_value("S1", fx.once("Birth Weight", "3"), 2021, "nurse").unwrap_err().code(),
        "ImmutableParameter"
    );
}

#[test]
fn card_lookup() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    assert_eq!(store.lookup_by_card("TOKEN-1", "doctor").unwrap().screening_id, "S1");
    assert_eq!(store.audit_log().last().unwrap().action, AuditAction::Punch);
    assert_eq!(store.lookup_by_card("TOKEN-9", "doctor").unwrap_err().code(), "UnknownCard");
    store.delete_student("S1", "admin").unwrap();
    assert_eq!(store.lookup_by_card("TOKEN-1", "doctor").unwrap_err().code(), "UnknownCard");
}

#[test]
fn deleting_health_data_keeps_identity() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    for (k, v) in [("Height", "120"), ("Weight", "22"), ("Hearing", "Normal")] {
        store.record_value("S1", fx.camp(k, v, date(2021, 3, 1)), "nurse").unwrap();
    }
    let before = store.audit_len();
    let s = store.delete_health_data("S1", "admin").unwrap();
    assert_eq!(s.observation_count(), 0);
    assert_eq!(s.student_name(), Some("Mina"));
    assert_eq!(store.audit_len(), before + 1);
    assert_eq!(store.audit_log().last().unwrap().action, AuditAction::Delete);

    store.delete_health_data("S1", "admin").unwrap();
    assert_eq!(store.audit_len(), before + 2);
    assert_eq!(store.delete_health_data("nobody", "admin").unwrap_err().code(), "UnknownStudent");
}

#[test]
fn referral_transitions() {
    use ReferralStatus::*;
    let fx = Fixture::new();
    let all = [Open, Seen, Closed];
    let legal = [(Open, Seen), (Seen, Closed), (Open, Closed)];
    for from in all {
        for to in all {
            let store = fx.store();
            store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
            let mut r = referral("R1", "S1");
            r.status = from;
            store.persist_referral(r, "system").unwrap();
            let result = store.update_referral_status("R1", Some(to), Some("seen in clinic".into()), "doctor");
            if legal.contains(&(from, to)) {
                let r = result.unwrap();
                assert_eq!(r.status, to);
                assert_eq!(store.referral("R1").unwrap().doctor_notes.as_deref(), Some("seen in clinic"));
            } else {
                assert_eq!(result.unwrap_err().code(), "IllegalTransition", "{from:?} -> {to:?}");
                assert_eq!(store.referral("R1").unwrap().status, from);
            }
        }
    }
    let store = fx.store();
    assert_eq!(store.update_referral_status("nope", Some(Seen), None, "doctor").unwrap_err().code(), "UnknownReferral");
}

#[test]
fn empty_referral_rejected() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    let mut r = referral("R1", "S1");
    r.findings.clear();
    assert_eq!(store.persist_referral(r, "system").unwrap_err().code(), "EmptyReferral");
}

#[test]
fn sqlite_round_trip() {
    let fx = Fixture::new();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hmms.db");
    let as_of = date(2024, 6, 1);
    let students = generate(11, 25, &fx.schedule, &SynthOptions::new(as_of));
    let before = {
        let store = Store::sqlite(&path, fx.catalog.clone(), fx.schedule.clone()).unwrap();
        for s in &students {
            s.load_into(&store, "nurse").unwrap();
        }
        store.persist_referral(referral("R1", "S000001"), "system").unwrap();
        store.update_referral_status("R1", Some(ReferralStatus::Seen), Some("ok".into()), "doctor").unwrap();
        store.delete_health_data("S000002", "admin").unwrap();
        store.delete_student("S000003", "admin").unwrap();
        store.snapshot()
    };
    let store = Store::sqlite(&path, fx.catalog.clone(), fx.schedule.clone()).unwrap();
    let after = store.snapshot();
    assert_eq!(before, after);
    let seqs: Vec<u64> = after.audit.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());
    assert_eq!(store.lookup_by_card(&students[0].rfid_token, "doctor").unwrap().screening_id, "S000001");
    assert_eq!(store.lookup_by_card(&students[2].rfid_token, "doctor").unwrap_err().code(), "UnknownCard");
}

#[test]
fn concurrent_writes_keep_audit_gap_free() {
    let fx = Fixture::new();
    let store = Arc::new(fx.store());
    for i in 0..8 {
        store.register_student(fx.identity(&format!("S{i}"), "Kid", date(2015, 1, 1)), &format!("TOKEN-{i}"), "n").unwrap();
    }
    std::thread::scope(|scope| {
        for t in 0..8 {
            let store = store.clone();
            let fx = &fx;
            scope.spawn(move || {
                for k in 0..50 {
                    let day = date(2021, 1, 1) + chrono::Duration::days(k);
                    store.record_value(&format!("S{t}"), fx.camp("Height", "120", day), "n").unwrap();
                    let _ = store.lookup_by_card(&format!("TOKEN-{}", (t + 1) % 8), "d");
                }
            });
        }
    });
    let log = store.audit_log();
    assert_eq!(log.len(), 8 + 8 * 100);
    assert!(log.iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1));
    assert!(store.students().iter().all(|s| s.observations["Height"].len() == 50));
}

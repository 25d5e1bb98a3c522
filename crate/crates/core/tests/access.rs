mod common;

use common::{date, Fixture};
use hmms_core::access::{
    authorize, authorize_role, hash_password, minimal_view, Action, Decision, DenyReason, HashCost, MinimalProjection,
    Principal, Role, MINIMAL_VIEW_FIELDS,
};
use hmms_core::immunization::Overall;
use hmms_core::record::{Referral, ReferralStatus};
use hmms_core::screening::{Finding, Verdict};

/// Accessibility grid transcribed row by row: A = admin, N = nurse,
/// D = doctor, S = student/parent.
const GRID: &str = "
ManageStaff        A . . .
ViewBasicInfo      A N D .
ViewHealthData     A N D .
ViewOldHealthData  . . D .
InputHealthData    . N . .
EditHealthData     . N . .
PrintHealthData    . N D .
DeleteHealthData   A . . .
PunchCard          . N D .
SearchStudent      . N D .
ViewMinimalSelf    . . . S
RunScreening       . N . .
ManageRulesets     A . . .
ExportCohort       A . . .
";

fn expected(role: Role, action: Action) -> bool {
    let col = Role::ALL.iter().position(|r| *r == role).unwrap() + 1;
    let line = GRID.lines().find(|l| l.split_whitespace().next() == Some(&format!("{action:?}"))).unwrap();
    line.split_whitespace().nth(col).unwrap() != "."
}

#[test]
fn matrix_matches_grid() {
    assert_eq!(GRID.lines().filter(|l| !l.trim().is_empty()).count(), 14);
    for role in Role::ALL {
        let linked = (role == Role::Student).then_some("S1");
        for action in Action::ALL {
            let got = authorize_role(role, linked, action, linked);
            if expected(role, action) {
                assert_eq!(got, Decision::Allow, "{role:?} {action:?}");
            } else {
                assert_eq!(got, Decision::Deny(DenyReason::NotGranted), "{role:?} {action:?}");
            }
        }
    }
}

fn principal(role: Role, linked: Option<&str>) -> Principal {
    Principal {
        principal_id: format!("{role:?}").to_lowercase(),
        display_name: "x".into(),
        role,
        credential_hash: hash_password("pw", HashCost::LOW),
        screening_id: linked.map(str::to_string),
    }
}

#[test]
fn examples() {
    let nurse = principal(Role::Nurse, None);
    let admin = principal(Role::Admin, None);
    let doctor = principal(Role::Doctor, None);
    let student = principal(Role::Student, Some("S1"));
    assert!(!authorize(&nurse, Action::DeleteHealthData, None).is_allowed());
    assert!(authorize(&admin, Action::ManageStaff, None).is_allowed());
    assert!(!authorize(&doctor, Action::InputHealthData, Some("S1")).is_allowed());
    assert!(authorize(&student, Action::ViewMinimalSelf, Some("S1")).is_allowed());
    assert_eq!(
        authorize(&student, Action::ViewMinimalSelf, Some("S2")),
        Decision::Deny(DenyReason::NotOwnRecord)
    );
    assert!(student.verify_password("pw"));
    assert!(!student.verify_password("wrong"));
}

#[test]
fn students_never_reach_other_records() {
    for action in Action::ALL {
        assert!(!authorize_role(Role::Student, Some("S1"), action, Some("S2")).is_allowed(), "{action:?}");
    }
}

#[test]
fn minimal_view_contents() {
    let fx = Fixture::new();
    let store = fx.store();
    fx.register_complete(&store, "S1", date(2014, 2, 1));
    for (k, v) in [
        ("Present Class", "Class 2"),
        ("Height", "120"),
        ("Weight", "24"),
        ("CBC and ESR", "CBC=Abnormal;ESR=Normal"),
    ] {
        store.record_value("S1", fx.camp(k, v, date(2021, 3, 1)), "nurse").unwrap();
    }
    let referral = Referral {
        referral_id: "R1".into(),
        screening_id: "S1".into(),
        created_at: common::noon(date(2021, 3, 2)),
        findings: vec![Finding {
            rule_id: "cbc".into(),
            parameter_key: "CBC and ESR".into(),
            observed: Some("CBC=Abnormal;ESR=Normal".into()),
            verdict: Verdict::Fail,
            disease_hints: vec!["Anemia".into()],
            message: "blood count abnormal".into(),
        }],
        status: ReferralStatus::Open,
        doctor_notes: None,
    };
    store.persist_referral(referral.clone(), "system").unwrap();
    store.update_referral_status("R1", None, Some("iron supplements".into()), "doctor").unwrap();

    let record = store.student("S1").unwrap();
    let view = minimal_view(&record, &fx.schedule, date(2021, 4, 1));
    assert_eq!(view.present_class.as_deref(), Some("Class 2"));
    assert_eq!(view.bmi.as_deref(), Some("16.67"));
    assert_eq!(view.immunization, Some(Overall::Complete));
    assert_eq!(view.notices.len(), 1);
    assert_eq!(view.notices[0].text, referral.notice());
    assert_eq!(view.suggestions, ["iron supplements"]);

    let json = serde_json::to_value(&view).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    assert!(keys.iter().all(|k| MINIMAL_VIEW_FIELDS.contains(k)), "{keys:?}");
    assert!(!json.to_string().contains("Anemia"));

    assert_eq!(view.minimal_view(&fx.schedule, date(2021, 4, 1)), view);
}

#[test]
fn minimal_view_without_health_data() {
    let fx = Fixture::new();
    let store = fx.store();
    store.register_student(fx.identity("S1", "Mina", date(2015, 1, 1)), "TOKEN-1", "nurse").unwrap();
    let view = minimal_view(&store.student("S1").unwrap(), &fx.schedule, date(2021, 4, 1));
    assert_eq!(view.student_name.as_deref(), Some("Mina"));
    assert_eq!(view.screening_id, "S1");
    assert!(view.present_class.is_none() && view.height_cm.is_none() && view.bmi.is_none());
    assert!(view.immunization.is_none() && view.notices.is_empty() && view.suggestions.is_empty());
}

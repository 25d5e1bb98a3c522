//! Self-contained HTML summary of one student, for printing.

use std::fmt::Write;

use chrono::{DateTime, Utc};
use hmms_core::catalog::{Cardinality, ParameterCatalog};

use crate::wire::StudentDetail;

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin-bottom:1.5em}\
td,th{border:1px solid #999;padding:4px 8px;text-align:left}h2{margin-top:1.5em}";

pub fn render(catalog: &ParameterCatalog, s: &StudentDetail, printed_at: DateTime<Utc>) -> String {
    let mut h = String::new();
    let name = s.one_time.get(hmms_core::catalog::KEY_STUDENT_NAME).map(|v| v.value.render()).unwrap_or_default();
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Health record {id}</title><style>{STYLE}</style></head><body>\n\
         <h1>Student health record</h1>\n<p><strong>{name}</strong>, screening ID {id}. Printed {at}.</p>\n",
        id = esc(&s.screening_id),
        name = esc(&name),
        at = printed_at.format("%Y-%m-%d %H:%M UTC"),
    );

    h.push_str("<h2>General information</h2>\n<table>\n");
    for def in catalog.one_time() {
        if let Some(v) = s.one_time.get(&def.key) {
            let _ = writeln!(h, "<tr><th>{}</th><td>{}</td></tr>", esc(&def.display_name), esc(&v.value.render()));
        }
    }
    h.push_str("</table>\n");

    h.push_str("<h2>Recent health data</h2>\n<table>\n<tr><th>Parameter</th><th>Value</th><th>Camp</th></tr>\n");
    for def in catalog.definitions().iter().filter(|d| d.cardinality == Cardinality::MultipleTime) {
        if let Some(v) = s.recent.get(&def.key) {
            let year = v.camp_year.map(|y| y.to_string()).unwrap_or_default();
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td></tr>",
                esc(&def.display_name),
                esc(&v.value.render()),
                year
            );
        }
    }
    if let Some(bmi) = &s.bmi {
        let _ = writeln!(h, "<tr><td>BMI (derived)</td><td>{}</td><td></td></tr>", esc(bmi));
    }
    h.push_str("</table>\n");

    if let Some(old) = &s.old {
        h.push_str("<h2>Old health data</h2>\n<table>\n<tr><th>Parameter</th><th>Value</th><th>Camp</th><th>Recorded</th></tr>\n");
        for def in catalog.definitions() {
            for v in old.get(&def.key).into_iter().flatten() {
                let year = v.camp_year.map(|y| y.to_string()).unwrap_or_default();
                let _ = writeln!(
                    h,
                    "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                    esc(&def.display_name),
                    esc(&v.value.render()),
                    year,
                    v.recorded_at.format("%Y-%m-%d")
                );
            }
        }
        h.push_str("</table>\n");
    }

    if let Some(imm) = &s.immunization {
        let _ = writeln!(h, "<h2>Immunization</h2>\n<p>Overall: {}</p>\n<table>", imm.overall);
        h.push_str("<tr><th>Vaccine</th><th>Dose</th><th>Due</th><th>State</th></tr>\n");
        for d in &imm.per_dose {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{:?}</td></tr>",
                esc(&d.vaccine_code),
                d.dose_number,
                d.due_on,
                d.state
            );
        }
        h.push_str("</table>\n");
    }

    if !s.referrals.is_empty() {
        h.push_str("<h2>Referrals</h2>\n<table>\n<tr><th>Created</th><th>Status</th><th>Findings</th><th>Doctor notes</th></tr>\n");
        for r in &s.referrals {
            let findings: Vec<String> = r.findings.iter().map(|f| esc(&f.message)).collect();
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                r.created_at.format("%Y-%m-%d"),
                r.status.as_str(),
                findings.join("<br>"),
                esc(r.doctor_notes.as_deref().unwrap_or(""))
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</body></html>\n");
    h
}

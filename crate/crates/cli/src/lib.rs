//! Rendering helpers shared by the command-line tools.

use std::collections::BTreeMap;
use std::fmt::Write;

use maildust_core::survey::CountrySummary;
use maildust_core::threat::{self, AttackReport, AttackerKind, Mode};

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
}

fn summary_row(out: &mut String, name: &str, s: &CountrySummary) {
    writeln!(
        out,
        "{:<16} {:>8} {:>5} {:>5} {:>5} {:>5} {:>6} {:>15}",
        name, s.analyzed, s.old, s.new, s.temp, s.http, s.https, s.vulnerable_pct
    )
    .unwrap();
}

pub fn summary_table(countries: &BTreeMap<String, CountrySummary>, total: Option<&CountrySummary>) -> String {
    let mut out = format!(
        "{:<16} {:>8} {:>5} {:>5} {:>5} {:>5} {:>6} {:>15}\n",
        "Country", "Analyzed", "Old", "New", "Temp", "HTTP", "HTTPS", "Vulnerable (%)"
    );
    for (name, s) in countries {
        summary_row(&mut out, name, s);
    }
    if let Some(total) = total {
        summary_row(&mut out, "Total", total);
    }
    out
}

pub fn robustness_table(exponents: &[u32], curve: &[f64]) -> String {
    let mut out = String::from("threshold   above (%)\n");
    for (e, pct) in exponents.iter().zip(curve) {
        writeln!(out, "{:<11} {:>9.3}", format!("2^{e}"), pct).unwrap();
    }
    out
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn threat_overview() -> String {
    let mut out = String::from("Attackers resources and possible accesses\n");
    writeln!(
        out,
        "{:<30}| {:<12}| {:<12}| Recovery method",
        "Attacker", "User emails", "Password DB"
    )
    .unwrap();
    for kind in AttackerKind::ALL {
        let a = threat::access_matrix(kind);
        writeln!(
            out,
            "{:<30}| {:<12}| {:<12}| {}",
            kind.label(),
            yes_no(a.user_emails),
            yes_no(a.password_db),
            yes_no(a.recovery_method)
        )
        .unwrap();
    }
    out.push_str("\nPassive attackers\n");
    out.push_str(&threat::render_table(Mode::Passive));
    out.push_str("\nActive attackers\n");
    out.push_str(&threat::render_table(Mode::Active));
    out
}

pub fn attack_summary(n: usize, k: usize, m: usize, scheme: &str, report: &AttackReport) -> String {
    format!(
        "scheme: {scheme}\nn: {n}\nk: {k}\ncompromised: {m}\noutcome: {:?}\nmails seen: {}\nshares needed: {}\nlogin verified: {}\n",
        report.outcome,
        report.mails_seen,
        report.threshold,
        yes_no(report.login_verified)
    )
}

//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{corpus_graph, oracle_errors};
use rmcpd::critical::critical_value_table;
use rmcpd::dataset::{generate, Family, GeneratorConfig};
use rmcpd::detect::DetectConfig;
use rmcpd::graph::SimilarityGraph;
use rmcpd::pvalue::{critical_value, h_functions, nu, Channel, Correction};
use rmcpd::scanstat::default_window;
use rmcpd::simulate::{simulate, SimulationConfig, SimulationReport};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A1 critical values for alpha = 0.05, n = 200.
fn criterion_1() -> rmcpd::Result<Outcome> {
    let expected = [(10, [2.986, 3.032, 3.032]), (20, [2.900, 2.942, 2.942])];
    let channels = [Channel::OutW, Channel::OutD, Channel::InTilde];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n0, want) in expected {
        let mut got = [0.0; 3];
        for (slot, ch) in got.iter_mut().zip(channels) {
            *slot = critical_value(0.05, ch, Correction::A1, 200, n0, 200 - n0, None)?;
        }
        pass &= got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.005);
        parts.push(format!("n0={n0}: ({:.3}, {:.3}, {:.3})", got[0], got[1], got[2]));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn corpus_errors() -> Vec<common::OracleErrors> {
    (0..50).map(|i| oracle_errors(&corpus_graph(i).0)).collect()
}

fn criterion_2(errors: &[common::OracleErrors]) -> Outcome {
    let lemma1 = errors.iter().map(|e| e.lemma1).fold(0.0, f64::max);
    let third = errors.iter().map(|e| e.third).fold(0.0, f64::max);
    outcome(
        lemma1 <= 1e-9 && third <= 1e-9,
        format!("50 graphs, max |lemma1 err| = {lemma1:.2e}, max |third err| = {third:.2e}"),
    )
}

fn criterion_3(errors: &[common::OracleErrors]) -> Outcome {
    let orth = errors.iter().map(|e| e.orthogonality).fold(0.0, f64::max);
    let splits: usize = errors.iter().map(|e| e.splits).sum();
    let skipped: usize = errors.iter().map(|e| e.degenerate_splits).sum();
    outcome(
        orth <= 1e-10,
        format!("max deviation {orth:.2e} over {splits} splits ({skipped} with a constant channel)"),
    )
}

/// A2 against permutation critical values on Gaussian null data.
fn criterion_4() -> rmcpd::Result<Outcome> {
    let (n, ell, d) = (100, 5, 50);
    let gen = GeneratorConfig::setting(Family::Gaussian, 1, 50, 2024)?;
    let ds = generate(&gen, n, ell, d)?;
    let g = SimilarityGraph::from_dataset(&ds, 9)?;
    let (n0, n1) = default_window(n)?;
    let table = critical_value_table(n, n0, n1, 0.05, Some(&g), 5000, 7)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (ch, tol) in [(Channel::OutW, 0.25), (Channel::OutD, 0.08), (Channel::In, 0.08), (Channel::InTilde, 0.08)] {
        let row = table.row(ch).expect("row present");
        match (row.a2, row.permutation) {
            (Some(a2), Some(perm)) => {
                pass &= (a2 - perm).abs() <= tol;
                parts.push(format!("{}: A2 {a2:.3} perm {perm:.3}", ch.name()));
            }
            _ => {
                pass = false;
                parts.push(format!("{}: missing value", ch.name()));
            }
        }
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn power_config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        family: Family::Gaussian,
        settings: vec![1, 2, 3, 4],
        replicates: 100,
        n: 100,
        ell: 5,
        d: 40,
        tau: 50,
        radius: 10,
        detect: DetectConfig::default(),
        seed,
    }
}

fn criterion_5(report: &SimulationReport) -> Outcome {
    let s = &report.summary;
    let rej = |i: usize| s[i].rejections;
    let loc_frac = if rej(1) == 0 { 0.0 } else { s[1].localized as f64 / rej(1) as f64 };
    let pass = rej(0) <= 10 && rej(1) >= 55 && loc_frac >= 0.6 && rej(2) >= 45 && rej(3) >= 60;
    outcome(
        pass,
        format!(
            "rejections out of 100: S1 {}, S2 {} ({:.0}% in [40, 60]), S3 {}, S4 {}",
            rej(0),
            rej(1),
            100.0 * loc_frac,
            rej(2),
            rej(3)
        ),
    )
}

fn criterion_6() -> rmcpd::Result<Outcome> {
    let nu0 = nu(1e-10)?;
    let mut worst: f64 = 0.0;
    for x in [0.1, 0.3, 0.5] {
        let h = h_functions(10_000, x)?;
        worst = worst.max((h.out_w * x * (1.0 - x) - 1.0).abs());
    }
    let hd = h_functions(100, 0.5)?.out_d;
    let pass = (nu0 - 1.0).abs() <= 1e-6 && worst < 0.01 && hd == 2.0;
    Ok(outcome(
        pass,
        format!("nu(0+) = {nu0:.9}, worst h_out,w rel err {worst:.2e}, h_out,d(0.5) = {hd}"),
    ))
}

fn criterion_7(first: &SimulationReport) -> rmcpd::Result<Outcome> {
    let again = simulate(&power_config(first.seed), None)?;
    let (a, b) = (first.to_json()?, again.to_json()?);
    Ok(outcome(a == b, format!("two runs, {} bytes each, identical: {}", a.len(), a == b)))
}

fn report(id: u32, res: rmcpd::Result<Outcome>, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match res {
        Ok(o) => {
            println!("criterion {id}: {} [{secs:.1}s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("criterion {id}: FAIL [{secs:.1}s] error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, criterion_1(), t);

    let t = Instant::now();
    let errors = corpus_errors();
    ok &= report(2, Ok(criterion_2(&errors)), t);
    ok &= report(3, Ok(criterion_3(&errors)), t);

    let t = Instant::now();
    ok &= report(4, criterion_4(), t);

    let t = Instant::now();
    let power = simulate(&power_config(1), None);
    let c5 = match &power {
        Ok(r) => Ok(criterion_5(r)),
        Err(e) => Ok(outcome(false, format!("error: {e}"))),
    };
    ok &= report(5, c5, t);

    let t = Instant::now();
    ok &= report(6, criterion_6(), t);

    let t = Instant::now();
    let det = match &power {
        Ok(r) => criterion_7(r),
        Err(_) => Ok(outcome(false, "no first run to compare".into())),
    };
    ok &= report(7, det, t);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance suite. Runs every criterion at full scale and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::time::Instant;

use loopfield::bridges::bridge_check;
use loopfield::coupling::verify_gff_law;
use loopfield::experiment::{run_experiment, ExperimentConfig, NetworkSpec};
use loopfield::gff::verify_connectivity;
use loopfield::green::compute_green;
use loopfield::interlacement::{interlacement_check, isomorphism_check, levelset_containment_check, InterlacementCheck, StarGraph};
use loopfield::loopsoup::{verify_edge_avoidance, verify_occupation_law};
use loopfield::network::{build_grid_network, build_path_network, Network};
use loopfield::report::TestRecord;
use loopfield::stats::Thresholds;

const REPLICAS: usize = 100_000;
const CUTOFF: f64 = 1e-9;

fn two_vertex() -> Network {
    Network::from_triples(2, &[(0, 1, 1.0)], vec![1.0, 1.0]).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn summarise(records: &[TestRecord]) -> Outcome {
    let failed: Vec<&TestRecord> = records.iter().filter(|r| !r.pass).collect();
    let worst_z = records.iter().filter_map(|r| r.z).map(f64::abs).fold(0.0, f64::max);
    let min_p = records.iter().filter_map(|r| r.p).fold(1.0, f64::min);
    let mut detail = format!("{} checks, max |z| = {worst_z:.2}", records.len());
    if min_p < 1.0 {
        detail.push_str(&format!(", min KS p = {min_p:.2e}"));
    }
    for r in &failed {
        detail.push_str(&format!("; failed {} (z {:?}, p {:?}, est {:?})", r.test, r.z, r.p, r.estimate));
    }
    Outcome { pass: failed.is_empty(), detail }
}

fn coupling_records() -> Vec<(String, Vec<TestRecord>)> {
    let th = Thresholds::default();
    let nets = [
        ("two-vertex", two_vertex()),
        ("path3", build_path_network(3, 1.0, 1.0).unwrap()),
        ("grid3x3", build_grid_network(&[3, 3], 1.0, 0.5).unwrap()),
    ];
    nets.iter()
        .enumerate()
        .map(|(i, (name, net))| {
            let gop = compute_green(net).unwrap();
            (name.to_string(), verify_gff_law(net, &gop, REPLICAS, 100 + i as u64, CUTOFF, &th).unwrap())
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let net = two_vertex();
    let gop = compute_green(&net).unwrap();
    let r = verify_edge_avoidance(&net, &gop, &[0], REPLICAS, 300, CUTOFF, &Thresholds::default()).unwrap();
    let exact_ok = (r.exact.unwrap() - 0.75f64.sqrt()).abs() < 1e-14;
    let mut o = summarise(std::slice::from_ref(&r));
    o.pass &= exact_ok;
    o.detail = format!("target {:.6}, estimate {:.6}; {}", r.exact.unwrap(), r.estimate.unwrap(), o.detail);
    o
}

fn criterion_4() -> Outcome {
    let th = Thresholds::default();
    let mut records = Vec::new();
    for (i, net) in [two_vertex(), build_grid_network(&[3, 3], 1.0, 0.5).unwrap()].iter().enumerate() {
        let gop = compute_green(net).unwrap();
        records.extend(verify_occupation_law(net, &gop, 0.5, REPLICAS, 400 + i as u64, CUTOFF, &th).unwrap());
    }
    summarise(&records)
}

fn criterion_5() -> Outcome {
    let lambdas = [1e-4, 1e-2, 0.25, 1.0, 4.0, 25.0];
    let (rows, records) = bridge_check(&lambdas, REPLICAS, 500, 1e-10, &Thresholds::default()).unwrap();
    // the integral criterion is relative error below 1e-8
    let worst_rel = rows
        .iter()
        .map(|r| (r.quadrature - r.closed).abs() / r.closed)
        .fold(0.0, f64::max);
    let mut o = summarise(&records);
    o.pass &= worst_rel < 1e-8;
    o.detail = format!("max quadrature rel. error {worst_rel:.1e}; {}", o.detail);
    o
}

fn criterion_6() -> Outcome {
    let th = Thresholds::default();
    let mut records = Vec::new();
    let net = two_vertex();
    let gop = compute_green(&net).unwrap();
    records.extend(verify_connectivity(&net, &gop, 0, 1, REPLICAS, 600, &th).unwrap());
    let grid = build_grid_network(&[4, 4], 1.0, 0.5).unwrap();
    let gop = compute_green(&grid).unwrap();
    records.extend(verify_connectivity(&grid, &gop, 5, 6, REPLICAS, 601, &th).unwrap());
    records.extend(verify_connectivity(&grid, &gop, 0, 15, REPLICAS, 602, &th).unwrap());
    let exact_ok = (records[0].exact.unwrap() - 1.0 / 3.0).abs() < 1e-14;
    let mut o = summarise(&records);
    o.pass &= exact_ok;
    o
}

fn criterion_7() -> Outcome {
    let check = InterlacementCheck {
        dimension: 3,
        half_width: 8,
        window_radius: 2,
        u: 0.2,
        sets: vec![vec![vec![0, 0, 0]], vec![vec![0, 0, 0], vec![1, 0, 0]]],
    };
    let (records, caps) = interlacement_check(&check, 50_000, 700, &Thresholds::default()).unwrap();
    let mut o = summarise(&records);
    let drift: Vec<String> = caps[1..]
        .iter()
        .map(|c| format!("cap {:.4} (drift to n+4: {:.1e})", c.capacity, c.drift.unwrap()))
        .collect();
    o.detail = format!("{}; {}", drift.join(", "), o.detail);
    o
}

fn criterion_8() -> Outcome {
    let star = StarGraph::new(2, 5).unwrap();
    let mut records = Vec::new();
    for (i, u) in [0.5, 1.0].into_iter().enumerate() {
        records.extend(isomorphism_check(&star, u, REPLICAS, 800 + i as u64, &Thresholds::default()).unwrap());
    }
    summarise(&records)
}

fn criterion_9() -> Outcome {
    let star = StarGraph::new(2, 5).unwrap();
    let th = Thresholds::default();
    let mut structural = Vec::new();
    let mut moments = Vec::new();
    for (i, u) in [0.1, 1.0].into_iter().enumerate() {
        for r in levelset_containment_check(&star, u, 10_000, 900 + i as u64, CUTOFF, &th).unwrap() {
            if r.test.starts_with("levelset-field") {
                moments.push(r);
            } else {
                structural.push(r);
            }
        }
    }
    let violations: f64 = structural.iter().filter(|r| r.test == "levelset-containment").map(|r| r.estimate.unwrap()).sum();
    let mut o = summarise(&structural);
    let m = summarise(&moments);
    o.detail = format!(
        "{violations} violations in 2 x 10^4 replicas; field moments {}: {}",
        if m.pass { "consistent with G" } else { "INCONSISTENT" },
        m.detail
    );
    o.pass &= m.pass;
    o
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut names = Vec::new();
    let configs = [
        ("connectivity", Some(NetworkSpec::Builtin("grid4x4".into()))),
        ("coupling", Some(NetworkSpec::Builtin("grid3x3".into()))),
        ("isomorphism", None),
    ];
    for (name, net) in configs {
        let mut bytes = Vec::new();
        for run in 0..2 {
            let mut c = ExperimentConfig::new(name);
            c.replicas = 2000;
            c.seed = 1234;
            c.network = net.clone();
            c.params.half_width = Some(3);
            c.output = Some(dir.path().join(format!("{name}-{run}")));
            run_experiment(&c).unwrap();
            let json = std::fs::read(dir.path().join(format!("{name}-{run}.json"))).unwrap();
            let csv = std::fs::read(dir.path().join(format!("{name}-{run}.csv"))).unwrap();
            bytes.push((json, csv));
        }
        identical &= bytes[0] == bytes[1];
        names.push(name);
    }
    Outcome { pass: identical, detail: format!("JSON and CSV reports byte-identical for {}", names.join(", ")) }
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "criterion {n:>2} {} {title} [{:.1}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };

    let mut coupled = Vec::new();
    report(1, "coupling law", &mut || {
        coupled = coupling_records();
        let recs: Vec<TestRecord> = coupled
            .iter()
            .flat_map(|(_, r)| r.iter().filter(|r| r.test != "sign-constancy").cloned())
            .collect();
        let mut o = summarise(&recs);
        let nets: Vec<&str> = coupled.iter().map(|(n, _)| n.as_str()).collect();
        o.detail = format!("{}: {}", nets.join(", "), o.detail);
        o
    });
    report(2, "sign constancy on loop clusters", &mut || {
        let recs: Vec<TestRecord> = coupled
            .iter()
            .flat_map(|(_, r)| r.iter().filter(|r| r.test == "sign-constancy").cloned())
            .collect();
        let violations: f64 = recs.iter().map(|r| r.estimate.unwrap()).sum();
        let mut o = summarise(&recs);
        o.detail = format!("{violations} violations over {} replicas", 3 * REPLICAS);
        o
    });
    report(3, "edge-avoidance determinant ratio", &mut criterion_3);
    report(4, "occupation field at one-half", &mut criterion_4);
    report(5, "bridge integral", &mut criterion_5);
    report(6, "arcsine connectivity", &mut criterion_6);
    report(7, "interlacement vacant set", &mut criterion_7);
    report(8, "isomorphism moments", &mut criterion_8);
    report(9, "level-set containment", &mut criterion_9);
    report(10, "determinism", &mut criterion_10);

    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}

//! Acceptance suite: one PASS/FAIL line per criterion, each at its stated
//! tolerance. Runs without the libtest harness so the lines always show.
//!
//! A criterion listed in `KNOWN_FAILING` is still evaluated and reported as
//! FAIL; it does not fail the run, but passing unexpectedly does.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use aoa_lab::analytic::{aoa_seed_probs, aoai_seed_probs, averages, avg_aoa, avg_aoai, MetricAverages};
use aoa_lab::engine::{self, RunSummary};
use aoa_lab::markov::{
    aoa_series_mean, build_aoa_chain, build_aoai_chain, build_system_chain, choose_cap, mean_age, stationary,
    ChainState, StationaryDist, TruncatedChain,
};
use aoa_lab::validation::{sweep, CheckConfig, Grid, Method};
use aoa_lab::{cli, Params, SystemState};

const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const SAMPLE_EVENTS: &str = "t,data,energy\n1,0,0\n2,1,0\n3,0,0\n4,0,1\n5,0,0\n6,1,0\n7,0,0\n";

/// The AoI <= AoA half of the ordering is false for this model; see
/// `ordering` below for the witnesses printed at run time.
const KNOWN_FAILING: &[u32] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn grid() -> Vec<Params> {
    GRID.iter()
        .flat_map(|&a| GRID.iter().map(move |&b| Params::new(a, b).unwrap()))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn call(args: &[&str]) -> (i32, Vec<u8>, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("aoa-lab").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, out, String::from_utf8_lossy(&err).into_owned())
}

fn solve(chain: &TruncatedChain) -> StationaryDist {
    stationary(chain, 1e-14).expect("chain converges")
}

fn mass(chain: &TruncatedChain, dist: &StationaryDist, keep: impl Fn(&ChainState) -> bool) -> f64 {
    chain
        .states()
        .iter()
        .zip(&dist.probs)
        .filter(|(s, _)| keep(s))
        .map(|(_, v)| v)
        .sum()
}

fn trace_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    fs::write(&path, SAMPLE_EVENTS).unwrap();
    let start = Instant::now();
    let (code, out, err) = call(&["trace", "--events", path.to_str().unwrap()]);
    let elapsed = start.elapsed().as_secs_f64();
    if code != 0 {
        return outcome(false, format!("exit {code}: {err}"));
    }
    let text = String::from_utf8(out).unwrap();
    let rows: Vec<Vec<u64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let checks = [
        ("C", col(3), vec![0, 1, 1, 0, 0, 1, 1]),
        ("B", col(4), vec![0; 7]),
        ("actuated", col(5), vec![0, 0, 0, 1, 0, 0, 0]),
        ("I", col(6), vec![2, 1, 2, 3, 4, 1, 2]),
        ("A", col(7), vec![2, 3, 4, 1, 2, 3, 4]),
        ("AI", col(8), vec![2, 3, 4, 3, 4, 5, 6]),
    ];
    let mismatches: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(n, got, want)| format!("{n}={got:?} want {want:?}"))
        .collect();
    let pass = mismatches.is_empty() && elapsed < 1.0;
    outcome(
        pass,
        format!(
            "{elapsed:.3}s {}",
            if pass { "exact".into() } else { mismatches.join("; ") }
        ),
    )
}

fn simulation(runs: &[(Params, RunSummary)]) -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (p, run) in runs {
        let a = averages(p).unwrap();
        for (name, sim, exact) in [
            ("aoi", run.mean_aoi, a.aoi_bar),
            ("aoa", run.mean_aoa, a.aoa_bar),
            ("aoai", run.mean_aoai, a.aoai_bar),
        ] {
            let r = rel(sim, exact);
            if r > worst.0 {
                worst = (r, format!("{name} at ({}, {})", p.lambda1(), p.lambda2()));
            }
        }
    }
    outcome(
        worst.0 < 0.01,
        format!("max rel err {:.3e} ({}), 25 points x 1e7 slots", worst.0, worst.1),
    )
}

fn chains() -> Outcome {
    let mut worst = 0.0f64;
    for p in grid() {
        let cap = choose_cap(&p, 1e-10).unwrap();
        let c = build_aoa_chain(&p, cap).unwrap();
        worst = worst.max(rel(mean_age(&solve(&c), &c).unwrap().mean, avg_aoa(&p).unwrap()));
        let c = build_aoai_chain(&p, cap).unwrap();
        worst = worst.max(rel(mean_age(&solve(&c), &c).unwrap().mean, avg_aoai(&p).unwrap()));
    }
    outcome(worst < 1e-6, format!("max rel err {worst:.3e}"))
}

fn series() -> Outcome {
    let worst = grid()
        .iter()
        .map(|p| rel(aoa_series_mean(p, 1e-15).unwrap(), avg_aoa(p).unwrap()))
        .fold(0.0, f64::max);
    outcome(worst < 1e-9, format!("max rel err {worst:.3e}"))
}

fn seeds() -> Outcome {
    let mut worst = 0.0f64;
    let mut marginal = 0.0f64;
    let mut midpoint = [0.0; 4];
    for p in grid() {
        let cap = choose_cap(&p, 1e-10).unwrap();
        let c = build_aoa_chain(&p, cap).unwrap();
        let d = solve(&c);
        let a = aoa_seed_probs(&p);
        let v100 = d.probs[c.index_of(ChainState::new(1, 0, false)).unwrap()];
        let v101 = d.probs[c.index_of(ChainState::new(1, 0, true)).unwrap()];

        let c = build_aoai_chain(&p, cap).unwrap();
        let d = solve(&c);
        let ai = aoai_seed_probs(&p);
        let v110 = d.probs[c.index_of(ChainState::new(1, 1, false)).unwrap()];
        let v111 = d.probs[c.index_of(ChainState::new(1, 1, true)).unwrap()];
        for (got, want) in [(v100, a.v100), (v101, a.v101), (v110, ai.v110), (v111, ai.v111)] {
            worst = worst.max((got - want).abs());
        }
        if p.lambda1() == 0.5 && p.lambda2() == 0.5 {
            midpoint = [v100, v101, v110, v111];
        }

        let (l1, l2) = (p.lambda1(), p.lambda2());
        let i1 = mass(&c, &d, |s| s.second == 1);
        let b1 = mass(&c, &d, |s| s.battery);
        let ai1 = mass(&c, &d, |s| s.level == 1);
        marginal = marginal
            .max((i1 - l1).abs())
            .max((ai1 - (l1 * l2 + l1 * (1.0 - l2) * b1)).abs());
    }
    let mid_err = midpoint
        .iter()
        .zip([0.3, 0.1, 0.25, 0.1])
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-8 && mid_err < 1e-8 && marginal < 1e-8,
        format!("seed err {worst:.2e}, midpoint err {mid_err:.2e}, marginal err {marginal:.2e}"),
    )
}

fn occupancy() -> Outcome {
    let mut worst = 0.0f64;
    let mut midpoint = vec![];
    for p in grid() {
        let sys = stationary(&build_system_chain(&p), 1e-14).unwrap();
        let c = build_aoa_chain(&p, choose_cap(&p, 1e-10).unwrap()).unwrap();
        let d = solve(&c);
        for st in SystemState::ALL {
            worst = worst.max((mass(&c, &d, |s| c.occupancy(*s) == st) - sys.probs[st.index()]).abs());
        }
        if p.lambda1() == 0.5 && p.lambda2() == 0.5 {
            midpoint = sys.probs.clone();
        }
    }
    let mid_err = midpoint
        .iter()
        .zip([0.4, 0.4, 0.2])
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-8 && mid_err < 1e-8,
        format!("marginal err {worst:.2e}, midpoint {midpoint:?}"),
    )
}

fn ordering(runs: &[(Params, RunSummary)]) -> Outcome {
    let mut violations = Vec::new();
    for (p, run) in runs {
        let a = averages(p).unwrap();
        let sim = MetricAverages {
            aoi_bar: run.mean_aoi,
            aoa_bar: run.mean_aoa,
            aoai_bar: run.mean_aoai,
        };
        for (src, m) in [("analytic", a), ("sim", sim)] {
            if !(m.aoi_bar <= m.aoa_bar && m.aoa_bar <= m.aoai_bar) {
                violations.push(format!(
                    "{src}({},{}): {:.4} {:.4} {:.4}",
                    p.lambda1(),
                    p.lambda2(),
                    m.aoi_bar,
                    m.aoa_bar,
                    m.aoai_bar
                ));
            }
        }
    }
    let mut limit_err = 0.0f64;
    for l2 in [0.25, 0.5, 0.9] {
        let p = Params::new(1.0 - 1e-6, l2).unwrap();
        limit_err = limit_err.max(rel(avg_aoa(&p).unwrap(), 1.0 / l2));
    }
    let limits_ok = limit_err < 1e-4;
    let detail = format!(
        "limit rel err {limit_err:.2e} ({}); ordering violated at {} of 50: {}",
        if limits_ok { "ok" } else { "too large" },
        violations.len(),
        violations.join(", ")
    );
    outcome(violations.is_empty() && limits_ok, detail)
}

fn findings() -> Outcome {
    let p = |a, b| Params::new(a, b).unwrap();
    let low = avg_aoa(&p(0.2, 0.1)).unwrap();
    let high = avg_aoa(&p(0.9, 0.1)).unwrap();
    let cfg = CheckConfig {
        methods: vec![Method::Analytic],
        ..CheckConfig::default()
    };
    let report = sweep(&Grid::parse("0.1:0.9:0.1").unwrap(), &cfg).unwrap();
    let a = low < high && (low - 9.755).abs() < 1e-3 && (high - 9.99).abs() < 1e-2;
    let b = report.aoai_monotone;
    let c = report.symmetry_max_rel_dev.is_finite();
    outcome(
        a && b && c,
        format!(
            "(a) {low:.6} < {high:.6}: {a}; (b) aoai_monotone={b}; (c) symmetry_max_rel_dev={:.6}",
            report.symmetry_max_rel_dev
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2).map(|i| dir.path().join(format!("sweep{i}.csv"))).collect();
    for f in &files {
        let (code, _, err) = call(&[
            "sweep",
            "--grid",
            "0.1:0.9:0.2",
            "--methods",
            "analytic,sim,chain,series",
            "--slots",
            "200000",
            "--seed",
            "42",
            "--out",
            f.to_str().unwrap(),
        ]);
        if code != 0 {
            return outcome(false, format!("exit {code}: {err}"));
        }
    }
    let a = fs::read(&files[0]).unwrap();
    let b = fs::read(&files[1]).unwrap();
    outcome(
        a == b && !a.is_empty(),
        format!("{} bytes, identical={}", a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let runs: Vec<(Params, RunSummary)> = {
        use rayon::prelude::*;
        grid()
            .into_par_iter()
            .map(|p| (p, engine::run(&p, 10_000_000, 1, 1_000).unwrap()))
            .collect()
    };

    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "sample-path replay", trace_replay()),
        (2, "closed form vs simulation (1%)", simulation(&runs)),
        (3, "closed form vs truncated chain (1e-6)", chains()),
        (4, "closed form vs series (1e-9)", series()),
        (5, "steady-state seeds and marginals (1e-8)", seeds()),
        (6, "occupancy marginals vs system chain (1e-8)", occupancy()),
        (7, "ordering and unit-rate limits", ordering(&runs)),
        (8, "non-monotone AoA, monotone AoAI, symmetry", findings()),
        (9, "sweep CSV determinism", determinism()),
    ];

    let mut unexpected = 0;
    for (id, name, o) in &results {
        println!(
            "{} criterion {id}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if o.pass == KNOWN_FAILING.contains(id) {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!(
        "{passed}/{} criteria pass; known failing: {KNOWN_FAILING:?}; {:.1}s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria differ from the expected outcome");
        ExitCode::FAILURE
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, exit status nonzero if
//! any criterion fails. Runs without the libtest harness so that the report
//! is always printed.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use explore_core::costmap::NavKind;
use explore_core::experiment::{run_experiment, ExperimentOutput, ExperimentSpec, RunOutput};
use explore_core::explorer::{ExplorationConfig, Outcome, Session, Strategy};
use explore_core::frontier::{cluster_frontiers, detect_frontiers};
use explore_core::geometry::{GridSpec, Vec2};
use explore_core::occupancy::{CellState, MappingParams, OccupancyGrid, SafeSpaces};
use explore_core::oracle::{is_visible_bruteforce, run_suite, viewpoint_set_bruteforce};
use explore_core::viewpoint::{viewpoint_set, visible_frontiers, ViewpointQuery};
use explore_core::world::{load_world, SensorParams};

const ORACLE_INSTANCES: usize = 60;
const ORACLE_SECONDS: f64 = 30.0;
const RUN_SECONDS: f64 = 60.0;
const ORDER_SLACK: f64 = 1.05;
const FAR_SAMPLES: usize = 20;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, criterion: usize, pass: bool, detail: String) {
        println!(
            "criterion {criterion}: {} - {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        self.lines.push((criterion, pass, detail));
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn criterion_1(report: &mut Report) {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for suite in ["erosion", "distance", "dijkstra"] {
        for r in run_suite(suite, ORACLE_INSTANCES, 2024).expect("known suite") {
            summary.push(format!("{} {}/{}", r.suite, r.checks - r.failures.len(), r.checks));
            if !r.passed() || r.instances < 50 {
                failures.push(format!("{r}: {:?}", r.failures));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < ORACLE_SECONDS;
    report.record(
        1,
        pass,
        format!(
            "{ORACLE_INSTANCES} random instances per suite ({}) in {secs:.2} s{}",
            summary.join(", "),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    );
}

/// Rows top first: '.' free, '#' occupied, '?' unknown.
fn fixture(rows: &[&str]) -> OccupancyGrid {
    let h = rows.len();
    let w = rows[0].len();
    let spec = GridSpec::new(w, h, 0.1);
    let mut states = vec![CellState::Unknown; w * h];
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), w, "ragged fixture");
        for (x, ch) in row.chars().enumerate() {
            states[(h - 1 - r) * w + x] = match ch {
                '.' => CellState::Free,
                '#' => CellState::Occupied,
                _ => CellState::Unknown,
            };
        }
    }
    OccupancyGrid::from_states(spec, MappingParams::default(), &states).unwrap()
}

fn visibility_fixtures() -> Vec<(&'static str, OccupancyGrid)> {
    vec![
        (
            "pillar room",
            fixture(&[
                "########################",
                "#..................?????",
                "#..................?????",
                "#..................?????",
                "#.........####.....?????",
                "#.........####.....?????",
                "#.........####.....?????",
                "#.........####.....?????",
                "#..................?????",
                "#..................?????",
                "#..................?????",
                "#..................?????",
                "########################",
            ]),
        ),
        (
            "doorway",
            fixture(&[
                "##########################",
                "#...........#?????????????",
                "#...........#?????????????",
                "#...........#?????????????",
                "#...........#....?????????",
                "#................?????????",
                "#................?????????",
                "#...........#....?????????",
                "#...........#?????????????",
                "#...........#?????????????",
                "##########################",
            ]),
        ),
        (
            "sealed corners",
            fixture(&[
                "???????????????????????",
                "?#########?????????????",
                "?#.......#.....????????",
                "?#.......#.....#???????",
                "?#...............??????",
                "?#.......#.....#???????",
                "?####.####.....????????",
                "????#.#????#?##????????",
                "????#.#???????????#????",
                "????#.#????????????????",
                "???????????????????????",
            ]),
        ),
    ]
}

fn criterion_2(report: &mut Report) {
    let mut checks = 0usize;
    let mut failures = Vec::new();
    for (name, grid) in visibility_fixtures() {
        let spec = *grid.spec();
        let frontiers = detect_frontiers(&grid);
        let regions = cluster_frontiers(&spec, &frontiers.cells);
        for (sensing_range, eta) in [(1.0, 0.2), (1.5, 0.2), (0.6, 0.1)] {
            let mut query = ViewpointQuery::new(spec.resolution, sensing_range);
            query.eta = eta;
            // every free cell center, plus an off-center point in each
            for i in grid.mask_of(CellState::Free).iter_set() {
                let c = spec.center_of_index(i);
                for v in [c, c + Vec2::new(0.023, -0.031)] {
                    let got = visible_frontiers(&grid, &frontiers.cells, v, &query);
                    let want: Vec<usize> = frontiers
                        .cells
                        .iter()
                        .copied()
                        .filter(|&f| is_visible_bruteforce(&grid, f, v, eta, sensing_range))
                        .collect();
                    checks += 1;
                    if got != want {
                        failures.push(format!("{name}: visible set from {v:?} R={sensing_range}"));
                    }
                }
            }
            for (radius, clearance) in [(0.05, 0.02), (0.15, 0.05)] {
                let spaces = SafeSpaces::compute(&grid, radius, clearance);
                for region in &regions {
                    let got = viewpoint_set(&grid, region, &spaces, &query);
                    let want =
                        viewpoint_set_bruteforce(&grid, &region.cells, &spaces.planning_free, eta, sensing_range);
                    checks += 1;
                    if got != want {
                        failures.push(format!(
                            "{name}: viewpoint set of region {} R={sensing_range}",
                            region.id
                        ));
                    }
                }
            }
        }
    }
    report.record(
        2,
        failures.is_empty(),
        format!(
            "3 fixtures, {checks} set comparisons, {} mismatches{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
}

fn run_spec(text: &str, out: &std::path::Path) -> ExperimentOutput {
    let overrides = [("out_dir".to_string(), out.display().to_string())];
    let spec = ExperimentSpec::parse(text, &overrides, std::path::Path::new(".")).expect("valid spec");
    run_experiment(&spec, jobs()).expect("experiment runs")
}

fn criteria_3_to_6(report: &mut Report, runs: &[&RunOutput]) {
    let mut unsafe_ticks = 0usize;
    let mut unsafe_runs = Vec::new();
    let mut regressions = 0usize;
    let mut mapping_drops = 0usize;
    let mut tick_total = 0usize;
    for r in runs {
        let ticks = &r.record.ticks;
        tick_total += ticks.len();
        let bad = ticks.iter().filter(|t| !t.in_control).count();
        if bad > 0 || r.record.outcome == Outcome::SafetyViolation {
            unsafe_ticks += bad;
            unsafe_runs.push(r.run.dir_name());
        }
        for pair in ticks.windows(2) {
            if pair[0].path_id == pair[1].path_id && pair[1].s < pair[0].s {
                regressions += 1;
            }
            if pair[1].mapping_pct < pair[0].mapping_pct {
                mapping_drops += 1;
            }
        }
    }
    report.record(
        3,
        unsafe_runs.is_empty() && runs.len() >= 30,
        format!(
            "{} runs, {tick_total} ticks, {unsafe_ticks} ticks outside the control space{}",
            runs.len(),
            if unsafe_runs.is_empty() {
                String::new()
            } else {
                format!(" in {}", unsafe_runs.join(", "))
            }
        ),
    );
    report.record(
        4,
        regressions == 0,
        format!("{regressions} decreases of s within a path over {} runs", runs.len()),
    );
    report.record(
        5,
        mapping_drops == 0,
        format!(
            "{mapping_drops} decreases of mapping percentage over {} runs",
            runs.len()
        ),
    );

    let required = |r: &&&RunOutput| {
        let c = r.run.combination;
        c.strategy != Strategy::Online || c.nav == NavKind::Geodesic
    };
    let mut missing = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut count = 0;
    for r in runs.iter().filter(required) {
        count += 1;
        slowest = slowest.max(r.elapsed);
        if r.record.outcome != Outcome::Complete {
            missing.push(format!("{} {}", r.run.dir_name(), r.record.outcome));
        }
    }
    let mut extra = Vec::new();
    for r in runs.iter().filter(|r| !required(r)) {
        extra.push(format!("{} {}", r.run.dir_name(), r.record.outcome));
    }
    report.record(
        6,
        missing.is_empty() && slowest.as_secs_f64() < RUN_SECONDS,
        format!(
            "{}/{count} required runs COMPLETE, slowest {:.1} s{}; not required: {}",
            count - missing.len(),
            slowest.as_secs_f64(),
            if missing.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", missing.join(", "))
            },
            extra.join(", ")
        ),
    );
}

type Key = (Strategy, NavKind);

/// Mean distance and per-pose distances, keyed by (strategy, nav).
type DistanceTable = BTreeMap<(&'static str, &'static str), (f64, Vec<(usize, f64)>)>;

fn mean_distances(runs: &[&RunOutput]) -> DistanceTable {
    let mut by: BTreeMap<(&'static str, &'static str), Vec<(usize, f64)>> = BTreeMap::new();
    for r in runs {
        let c = r.run.combination;
        by.entry((c.strategy.as_str(), c.nav.as_str()))
            .or_default()
            .push((r.run.pose_index, r.record.total_distance()));
    }
    by.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|p| p.0);
            let mean = v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
            (k, (mean, v))
        })
        .collect()
}

fn criterion_7(report: &mut Report, runs: &[&RunOutput]) {
    let table = mean_distances(runs);
    let get = |k: Key| table.get(&(k.0.as_str(), k.1.as_str()));
    let mut parts = Vec::new();
    let mut pass = true;
    // per-pose exceptions: pose where the expected ordering does not hold
    let exceptions = |a: &[(usize, f64)], b: &[(usize, f64)]| -> Vec<usize> {
        a.iter()
            .zip(b)
            .filter(|(x, y)| x.1 > ORDER_SLACK * y.1)
            .map(|(x, _)| x.0)
            .collect()
    };

    // (a) geodesic vs euclidean per strategy
    for s in Strategy::ALL {
        if let (Some(g), Some(e)) = (get((s, NavKind::Geodesic)), get((s, NavKind::Euclidean))) {
            let ok = g.0 <= ORDER_SLACK * e.0;
            pass &= ok;
            parts.push(format!(
                "(a) {} geodesic {:.1} m vs euclidean {:.1} m {} exceptions {:?}",
                s.as_str(),
                g.0,
                e.0,
                if ok { "ok" } else { "VIOLATED" },
                exceptions(&g.1, &e.1)
            ));
        }
    }
    // (b) preventive vs persistent per navigation cost
    for n in NavKind::ALL {
        if let (Some(v), Some(p)) = (get((Strategy::Preventive, n)), get((Strategy::Persistent, n))) {
            let ok = v.0 <= ORDER_SLACK * p.0;
            pass &= ok;
            parts.push(format!(
                "(b) {} preventive {:.1} m vs persistent {:.1} m {} exceptions {:?}",
                n.as_str(),
                v.0,
                p.0,
                if ok { "ok" } else { "VIOLATED" },
                exceptions(&v.1, &p.1)
            ));
        }
    }
    // (c) uniform navigation cost is the longest under persistent
    if let Some(u) = get((Strategy::Persistent, NavKind::Uniform)) {
        let others: Vec<f64> = [NavKind::Euclidean, NavKind::Geodesic]
            .iter()
            .filter_map(|&n| get((Strategy::Persistent, n)).map(|x| x.0))
            .collect();
        let ok = others.iter().all(|&o| u.0 >= o);
        pass &= ok;
        parts.push(format!(
            "(c) persistent uniform {:.1} m vs others {:?} {}",
            u.0,
            others.iter().map(|o| format!("{o:.1}")).collect::<Vec<_>>(),
            if ok { "ok" } else { "VIOLATED" }
        ));
    }
    report.record(7, pass, parts.join("; "));
}

fn criterion_8(report: &mut Report) {
    let world = load_world(explore_core::experiment::OFFICE_WORLD, SensorParams::default()).unwrap();
    let config = ExplorationConfig {
        strategy: Strategy::Persistent,
        ..ExplorationConfig::default()
    };
    let pose = explore_core::experiment::OFFICE_POSES[0];
    let mut session = Session::new(&world, config, pose.position(), pose.theta).unwrap();
    let range = world.sensor.sensing_range;
    let mut candidates = 0usize;
    let mut sampled = 0usize;
    let mut violations = 0usize;
    loop {
        let robot = session.state().position;
        let spec = *session.grid().spec();
        let far = session
            .frontiers()
            .cells
            .iter()
            .all(|&f| spec.center_of_index(f).distance(robot) > range);
        if far {
            candidates += 1;
            // every 7th qualifying tick, until enough samples
            if candidates % 7 == 1 && sampled < FAR_SAMPLES {
                sampled += 1;
                let q = *session.query();
                let mut points: Vec<Vec2> = q.probes(robot).to_vec();
                for k in 0..8 {
                    let a = 0.3 + k as f64 * std::f64::consts::FRAC_PI_4;
                    points.push(robot + Vec2::from_angle(a) * (0.5 * q.eta));
                }
                for u in points {
                    if !visible_frontiers(session.grid(), &session.frontiers().cells, u, &q).is_empty() {
                        violations += 1;
                    }
                }
            }
        }
        if session.step().unwrap().is_some() {
            break;
        }
    }
    let outcome = session.outcome().unwrap();
    report.record(
        8,
        violations == 0 && sampled >= FAR_SAMPLES && outcome == Outcome::Complete,
        format!(
            "{sampled} sampled poses without a frontier within R ({candidates} qualifying ticks), {violations} visible frontiers from their eta-neighbors; run {outcome}"
        ),
    );
}

fn criterion_9(report: &mut Report, first: &ExperimentOutput, second: &ExperimentOutput) {
    let mut differing = Vec::new();
    for (a, b) in first.runs.iter().zip(&second.runs) {
        let x = std::fs::read(a.dir.join("metrics.csv")).unwrap();
        let y = std::fs::read(b.dir.join("metrics.csv")).unwrap();
        if x != y || x.is_empty() {
            differing.push(a.run.dir_name());
        }
    }
    let summaries_equal = std::fs::read(&first.summary_path).unwrap() == std::fs::read(&second.summary_path).unwrap();
    report.record(
        9,
        differing.is_empty() && summaries_equal && first.runs.len() == second.runs.len(),
        format!(
            "{} metrics.csv files compared across two executions of the demo spec, {} differ; summary.csv identical: {summaries_equal}",
            first.runs.len(),
            differing.len()
        ),
    );
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut report = Report { lines: Vec::new() };
    criterion_1(&mut report);
    criterion_2(&mut report);

    let dir = tempfile::tempdir().expect("temp dir");
    // the demo spec covers the three strategies with geodesic cost; the
    // remaining combinations complete the comparison matrix
    let demo = run_spec("", &dir.path().join("demo-a"));
    let demo_again = run_spec("", &dir.path().join("demo-b"));
    let extra = run_spec(
        "combinations = persistent/volume/uniform, persistent/volume/euclidean, \
         preventive/volume/uniform, preventive/volume/euclidean, online/volume/euclidean",
        &dir.path().join("extra"),
    );
    let matrix: Vec<&RunOutput> = demo.runs.iter().chain(&extra.runs).collect();
    let every: Vec<&RunOutput> = matrix.iter().copied().chain(&demo_again.runs).collect();

    criteria_3_to_6(&mut report, &every);
    criterion_7(&mut report, &matrix);
    criterion_8(&mut report);
    criterion_9(&mut report, &demo, &demo_again);

    for r in &matrix {
        println!(
            "  run {:<36} {:<16} {:>8.2} m {:>7.1} s sim {:>5.2} s wall",
            r.run.dir_name(),
            r.record.outcome.as_str(),
            r.record.total_distance(),
            r.record.total_time(),
            r.elapsed.as_secs_f64()
        );
    }
    let failed: Vec<usize> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.1} s",
        report.lines.len() - failed.len(),
        report.lines.len(),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

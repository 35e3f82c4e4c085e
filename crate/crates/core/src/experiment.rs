//! Batch experiments: flat `key = value` configuration, the run matrix of
//! start poses times (strategy, information, navigation) combinations, a
//! worker pool, and the CSV / PGM artifacts each run leaves behind.
//!
//! Every number written to CSV uses six decimals so that repeated runs of the
//! same configuration produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::costmap::NavKind;
use crate::error::{ExploreError, Result};
use crate::explorer::{ExplorationConfig, Outcome, RunRecord, Session, Strategy};
use crate::frontier::InfoKind;
use crate::geometry::Vec2;
use crate::world::{load_world, GroundTruthWorld, SensorParams};

/// Text of the bundled 12 m x 16 m office world.
pub const OFFICE_WORLD: &str = include_str!("../worlds/office.world");

/// Start poses used with the bundled office world unless overridden, in
/// four different rooms and at least 0.9 m from any wall.
pub const OFFICE_POSES: [Pose; 4] = [
    Pose::new(2.0, 3.0, 0.0),
    Pose::new(10.0, 14.0, std::f64::consts::PI),
    Pose::new(1.5, 13.5, 0.0),
    Pose::new(9.5, 9.0, std::f64::consts::PI),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combination {
    pub strategy: Strategy,
    pub info: InfoKind,
    pub nav: NavKind,
}

impl Combination {
    pub fn new(strategy: Strategy, info: InfoKind, nav: NavKind) -> Self {
        Self { strategy, info, nav }
    }

    /// `strategy-info-nav`, used for directory and file names.
    pub fn label(&self) -> String {
        format!(
            "{}-{}-{}",
            self.strategy.as_str(),
            self.info.as_str(),
            self.nav.as_str()
        )
    }

    fn to_config_value(self) -> String {
        format!(
            "{}/{}/{}",
            self.strategy.as_str(),
            self.info.as_str(),
            self.nav.as_str()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorldSource {
    /// A world compiled into the crate, written `@name`.
    Builtin(String),
    File(PathBuf),
}

impl WorldSource {
    pub fn load(&self, sensor: SensorParams) -> Result<GroundTruthWorld> {
        match self {
            WorldSource::Builtin(name) if name == "office" => load_world(OFFICE_WORLD, sensor),
            WorldSource::Builtin(name) => Err(ExploreError::config("world", format!("no built-in world `@{name}`"))),
            WorldSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| ExploreError::io(path, e))?;
                load_world(&text, sensor)
            }
        }
    }

    fn to_config_value(&self) -> String {
        match self {
            WorldSource::Builtin(name) => format!("@{name}"),
            WorldSource::File(path) => path.display().to_string(),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub world: WorldSource,
    pub poses: Vec<Pose>,
    pub combinations: Vec<Combination>,
    /// Mapping-percentage milestones (percent) at which maps are saved.
    pub snapshots: Vec<f64>,
    pub out_dir: PathBuf,
    pub sensor: SensorParams,
    /// Everything but strategy, info and nav, which come from the combination.
    pub base: ExplorationConfig,
}

/// Every accepted key, in the order of the resolved dump.
pub const KEYS: [&str; 32] = [
    "world",
    "poses",
    "strategy",
    "info",
    "nav",
    "combinations",
    "snapshots",
    "out_dir",
    "sensing_range",
    "beam_count",
    "scan_period",
    "robot_radius",
    "clearance",
    "eta",
    "mu",
    "alpha_max",
    "beta_max",
    "replan_period",
    "step_budget",
    "warmup_scans",
    "p_free",
    "p_occ",
    "free_evidence",
    "occupied_evidence",
    "log_odds_limit",
    "k_v",
    "k_w",
    "k_safety",
    "k_s",
    "v_max",
    "w_max",
    "dt",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// unknown and repeated keys are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ExploreError::config(
                format!("line {}", n + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ExploreError::config(key, "unknown key"));
        }
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ExploreError::config(key, "given more than once"));
        }
    }
    Ok(pairs)
}

/// Splits a `key=value` override as passed on the command line.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| ExploreError::config(text, "override must look like key=value"))?;
    let key = key.trim().to_string();
    if !KEYS.contains(&key.as_str()) {
        return Err(ExploreError::config(key, "unknown key"));
    }
    Ok((key, value.trim().to_string()))
}

/// Parses an empty-or-`auto` optional value.
fn optional(key: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() || value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        number(key, value).map(Some)
    }
}

fn number(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ExploreError::config(key, format!("`{value}` is not a finite number")))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v = number(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ExploreError::config(key, format!("out of range: must be > 0, got {v}")))
    }
}

fn positive_opt(key: &str, value: &str) -> Result<Option<f64>> {
    match optional(key, value)? {
        Some(v) if v <= 0.0 => Err(ExploreError::config(key, format!("out of range: must be > 0, got {v}"))),
        other => Ok(other),
    }
}

fn count(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .ok()
        .filter(|v| *v > 0)
        .ok_or_else(|| ExploreError::config(key, format!("out of range: need a positive integer, got `{value}`")))
}

fn list<T: std::str::FromStr<Err = ExploreError>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_poses(value: &str) -> Result<Vec<Pose>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|triple| {
            let parts: Vec<&str> = triple.split_whitespace().collect();
            let [x, y, theta] = parts.as_slice() else {
                return Err(ExploreError::config(
                    "poses",
                    format!("expected `x y theta`, got `{triple}`"),
                ));
            };
            Ok(Pose::new(
                number("poses", x)?,
                number("poses", y)?,
                number("poses", theta)?,
            ))
        })
        .collect()
}

fn parse_combinations(value: &str) -> Result<Vec<Combination>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|c| {
            let parts: Vec<&str> = c.split('/').map(str::trim).collect();
            let [s, i, n] = parts.as_slice() else {
                return Err(ExploreError::config(
                    "combinations",
                    format!("expected `strategy/info/nav`, got `{c}`"),
                ));
            };
            Ok(Combination::new(s.parse()?, i.parse()?, n.parse()?))
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            world: WorldSource::Builtin("office".into()),
            poses: OFFICE_POSES.to_vec(),
            combinations: Strategy::ALL
                .iter()
                .map(|&s| Combination::new(s, InfoKind::Volume, NavKind::Geodesic))
                .collect(),
            snapshots: vec![25.0, 50.0, 75.0, 90.0],
            out_dir: PathBuf::from("runs"),
            sensor: SensorParams::default(),
            base: ExplorationConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Resolves configuration text plus overrides (applied last). Relative
    /// world paths are taken relative to `base_dir`.
    pub fn parse(text: &str, overrides: &[(String, String)], base_dir: &Path) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        for (k, v) in overrides {
            if !KEYS.contains(&k.as_str()) {
                return Err(ExploreError::config(k.clone(), "unknown key"));
            }
            pairs.insert(k.clone(), v.clone());
        }
        let mut spec = ExperimentSpec::default();
        let get = |k: &str| pairs.get(k).map(String::as_str);

        if let Some(w) = get("world") {
            spec.world = match w.strip_prefix('@') {
                Some(name) => WorldSource::Builtin(name.to_string()),
                None if w.is_empty() => return Err(ExploreError::config("world", "empty path")),
                None => WorldSource::File(base_dir.join(w)),
            };
        }
        match get("poses") {
            Some(p) => spec.poses = parse_poses(p)?,
            None if !matches!(spec.world, WorldSource::Builtin(_)) => {
                return Err(ExploreError::config("poses", "required for a world file"));
            }
            None => {}
        }
        if spec.poses.is_empty() {
            return Err(ExploreError::config("poses", "at least one start pose is required"));
        }

        if let Some(c) = get("combinations").filter(|c| !c.is_empty()) {
            if ["strategy", "info", "nav"].iter().any(|k| pairs.contains_key(*k)) {
                return Err(ExploreError::config(
                    "combinations",
                    "give either combinations or strategy/info/nav lists, not both",
                ));
            }
            spec.combinations = parse_combinations(c)?;
        } else {
            let strategies: Vec<Strategy> = get("strategy").map(list).transpose()?.unwrap_or(Strategy::ALL.to_vec());
            let infos: Vec<InfoKind> = get("info").map(list).transpose()?.unwrap_or(vec![InfoKind::Volume]);
            let navs: Vec<NavKind> = get("nav").map(list).transpose()?.unwrap_or(vec![NavKind::Geodesic]);
            spec.combinations.clear();
            for &s in &strategies {
                for &i in &infos {
                    for &n in &navs {
                        spec.combinations.push(Combination::new(s, i, n));
                    }
                }
            }
        }
        if spec.combinations.is_empty() {
            return Err(ExploreError::config(
                "combinations",
                "at least one combination is required",
            ));
        }

        if let Some(s) = get("snapshots") {
            spec.snapshots = s
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|v| {
                    let pct = number("snapshots", v)?;
                    if (0.0..=100.0).contains(&pct) {
                        Ok(pct)
                    } else {
                        Err(ExploreError::config(
                            "snapshots",
                            format!("out of range: {pct} is not a percentage"),
                        ))
                    }
                })
                .collect::<Result<_>>()?;
        }
        if let Some(o) = get("out_dir") {
            spec.out_dir = PathBuf::from(o);
        }

        let sensor = &mut spec.sensor;
        let cfg = &mut spec.base;
        for (key, value) in &pairs {
            let v = value.as_str();
            match key.as_str() {
                "sensing_range" => sensor.sensing_range = positive(key, v)?,
                "beam_count" => sensor.beam_count = count(key, v)? as usize,
                "scan_period" => {
                    cfg.scan_period = positive(key, v)?;
                    sensor.scan_rate = 1.0 / cfg.scan_period;
                }
                "robot_radius" => cfg.robot_radius = positive(key, v)?,
                "clearance" => cfg.clearance = positive(key, v)?,
                "eta" => cfg.eta = positive_opt(key, v)?,
                "mu" => {
                    cfg.mu = number(key, v)?;
                    if cfg.mu < 0.0 {
                        return Err(ExploreError::config(
                            key,
                            format!("out of range: must be >= 0, got {}", cfg.mu),
                        ));
                    }
                }
                "alpha_max" => cfg.alpha_max = positive_opt(key, v)?,
                "beta_max" => cfg.beta_max = positive_opt(key, v)?,
                "replan_period" => cfg.replan_period = positive(key, v)?,
                "step_budget" => {
                    cfg.step_budget = if v.is_empty() || v.eq_ignore_ascii_case("auto") {
                        None
                    } else {
                        Some(count(key, v)?)
                    }
                }
                "warmup_scans" => cfg.warmup_scans = count(key, v)? as usize,
                "p_free" => cfg.mapping.p_free = number(key, v)?,
                "p_occ" => cfg.mapping.p_occ = number(key, v)?,
                "free_evidence" => cfg.mapping.free_evidence = number(key, v)?,
                "occupied_evidence" => cfg.mapping.occupied_evidence = number(key, v)?,
                "log_odds_limit" => cfg.mapping.log_odds_limit = positive(key, v)?,
                "k_v" => cfg.control.k_v = positive(key, v)?,
                "k_w" => cfg.control.k_w = positive(key, v)?,
                "k_safety" => cfg.control.k_safety = positive(key, v)?,
                "k_s" => cfg.control.k_s = positive(key, v)?,
                "v_max" => cfg.control.v_max = positive(key, v)?,
                "w_max" => cfg.control.w_max = positive(key, v)?,
                "dt" => cfg.control.dt = positive(key, v)?,
                _ => {}
            }
        }
        if let Some(eta) = cfg.eta {
            if eta >= sensor.sensing_range {
                return Err(ExploreError::config(
                    "eta",
                    format!("out of range: must be below sensing_range {}", sensor.sensing_range),
                ));
            }
        }
        spec.base.validate()?;
        Ok(spec)
    }

    /// Configuration for one combination.
    pub fn run_config(&self, combination: Combination) -> ExplorationConfig {
        ExplorationConfig {
            strategy: combination.strategy,
            info: combination.info,
            nav: combination.nav,
            ..self.base.clone()
        }
    }

    /// The run matrix, combination-major.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &combination in &self.combinations {
            for (pose_index, &pose) in self.poses.iter().enumerate() {
                out.push(RunSpec {
                    index: out.len(),
                    pose_index,
                    pose,
                    combination,
                });
            }
        }
        out
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn resolved_text(&self) -> String {
        let c = &self.base;
        let m = &c.mapping;
        let k = &c.control;
        let join = |v: Vec<String>, sep: &str| v.join(sep);
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "world" => self.world.to_config_value(),
                "poses" => join(
                    self.poses
                        .iter()
                        .map(|p| format!("{} {} {}", p.x, p.y, p.theta))
                        .collect(),
                    "; ",
                ),
                // the combination list is authoritative in the dump
                "strategy" | "info" | "nav" => continue,
                "combinations" => join(self.combinations.iter().map(|c| c.to_config_value()).collect(), ", "),
                "snapshots" => join(self.snapshots.iter().map(|s| s.to_string()).collect(), ", "),
                "out_dir" => self.out_dir.display().to_string(),
                "sensing_range" => self.sensor.sensing_range.to_string(),
                "beam_count" => self.sensor.beam_count.to_string(),
                "scan_period" => c.scan_period.to_string(),
                "robot_radius" => c.robot_radius.to_string(),
                "clearance" => c.clearance.to_string(),
                "eta" => fmt_opt(c.eta),
                "mu" => c.mu.to_string(),
                "alpha_max" => fmt_opt(c.alpha_max),
                "beta_max" => fmt_opt(c.beta_max),
                "replan_period" => c.replan_period.to_string(),
                "step_budget" => c.step_budget.map_or_else(|| "auto".to_string(), |b| b.to_string()),
                "warmup_scans" => c.warmup_scans.to_string(),
                "p_free" => m.p_free.to_string(),
                "p_occ" => m.p_occ.to_string(),
                "free_evidence" => m.free_evidence.to_string(),
                "occupied_evidence" => m.occupied_evidence.to_string(),
                "log_odds_limit" => m.log_odds_limit.to_string(),
                "k_v" => k.k_v.to_string(),
                "k_w" => k.k_w.to_string(),
                "k_safety" => k.k_safety.to_string(),
                "k_s" => k.k_s.to_string(),
                "v_max" => k.v_max.to_string(),
                "w_max" => k.w_max.to_string(),
                "dt" => k.dt.to_string(),
                _ => unreachable!("every key is dumped"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// The same experiment restricted to a single run.
    pub fn single(&self, run: &RunSpec) -> ExperimentSpec {
        ExperimentSpec {
            poses: vec![run.pose],
            combinations: vec![run.combination],
            ..self.clone()
        }
    }
}

/// Validates configuration text on its own (paths relative to the cwd).
pub fn validate_config(text: &str) -> Result<ExperimentSpec> {
    ExperimentSpec::parse(text, &[], Path::new("."))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub index: usize,
    pub pose_index: usize,
    pub pose: Pose,
    pub combination: Combination,
}

impl RunSpec {
    pub fn dir_name(&self) -> String {
        format!("{}-pose{}", self.combination.label(), self.pose_index)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub run: RunSpec,
    pub dir: PathBuf,
    pub record: RunRecord,
    /// Wall-clock time of the simulation alone.
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub runs: Vec<RunOutput>,
    pub summary_path: PathBuf,
}

impl ExperimentOutput {
    pub fn safety_violations(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.record.outcome == Outcome::SafetyViolation)
            .count()
    }
}

pub fn metrics_csv(record: &RunRecord) -> String {
    let mut out =
        String::from("tick,time_s,x_m,y_m,theta_rad,s,distance_traveled_m,mapping_pct,n_frontier_regions,event\n");
    for t in &record.ticks {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            t.tick,
            t.time,
            t.position.x,
            t.position.y,
            t.heading,
            t.s,
            t.distance_traveled,
            100.0 * t.mapping_pct,
            t.n_regions,
            t.event.as_str()
        );
    }
    out
}

pub fn trajectory_csv(record: &RunRecord) -> String {
    let mut out =
        String::from("tick,time_s,x_m,y_m,theta_rad,v_mps,w_radps,s,s_rate,dist_to_unsafe_m,path_id,in_control\n");
    for t in &record.ticks {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            t.tick,
            t.time,
            t.position.x,
            t.position.y,
            t.heading,
            t.v,
            t.w,
            t.s,
            t.s_rate,
            t.dist_to_unsafe,
            t.path_id,
            u8::from(t.in_control)
        );
    }
    out
}

pub fn replans_csv(record: &RunRecord) -> String {
    let mut out = String::from(
        "tick,time_s,start_x_m,start_y_m,reference_x_m,reference_y_m,robot_x_m,robot_y_m,region_id,viewpoint_x_m,viewpoint_y_m,path_length_m,travel_cost\n",
    );
    for r in &record.replans {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            r.tick,
            r.time,
            r.start.x,
            r.start.y,
            r.reference.x,
            r.reference.y,
            r.robot.x,
            r.robot.y,
            r.region_id,
            r.viewpoint.x,
            r.viewpoint.y,
            r.path_length,
            r.travel_cost
        );
    }
    out
}

/// File name of the map saved at a mapping-percentage milestone.
pub fn snapshot_name(pct: f64) -> String {
    format!("map_{pct:06.2}.pgm")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| ExploreError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| ExploreError::io(path, e))
}

/// Runs one configuration from one pose to its end.
pub fn execute(world: &GroundTruthWorld, spec: &ExperimentSpec, run: &RunSpec) -> Result<RunRecord> {
    let fractions: Vec<f64> = spec.snapshots.iter().map(|p| p / 100.0).collect();
    let mut session = Session::new(
        world,
        spec.run_config(run.combination),
        run.pose.position(),
        run.pose.theta,
    )?
    .with_snapshots(&fractions);
    session.run_to_end()?;
    Ok(session.into_record())
}

fn write_run(spec: &ExperimentSpec, run: &RunSpec, dir: &Path, record: &RunRecord) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join("config.txt"), &spec.single(run).resolved_text())?;
    write(&dir.join("metrics.csv"), &metrics_csv(record))?;
    write(&dir.join("trajectory.csv"), &trajectory_csv(record))?;
    write(&dir.join("replans.csv"), &replans_csv(record))?;
    if !record.warnings.is_empty() {
        write(&dir.join("warnings.txt"), &(record.warnings.join("\n") + "\n"))?;
    }
    if !record.snapshots.is_empty() {
        let snaps = dir.join("snapshots");
        create_dir(&snaps)?;
        for s in &record.snapshots {
            write(&snaps.join(snapshot_name(100.0 * s.milestone)), &s.pgm)?;
        }
    }
    Ok(())
}

/// Runs the whole matrix on `jobs` worker threads and writes every artifact
/// under `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutput> {
    let world = spec.world.load(spec.sensor)?;
    for (k, p) in spec.poses.iter().enumerate() {
        if !world.is_free_position(p.position()) {
            return Err(ExploreError::config(
                "poses",
                format!("pose {k} at ({}, {}) is not in free space", p.x, p.y),
            ));
        }
    }
    create_dir(&spec.out_dir)?;
    write(&spec.out_dir.join("resolved.txt"), &spec.resolved_text())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExploreError::Internal(format!("worker pool: {e}")))?;
    let runs = spec.runs();
    let results: Vec<Result<RunOutput>> = pool.install(|| {
        runs.par_iter()
            .map(|run| {
                let started = Instant::now();
                let record = execute(&world, spec, run)?;
                let elapsed = started.elapsed();
                let dir = spec.out_dir.join(run.dir_name());
                write_run(spec, run, &dir, &record)?;
                Ok(RunOutput {
                    run: *run,
                    dir,
                    record,
                    elapsed,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summary_path = spec.out_dir.join("summary.csv");
    write(&summary_path, &summary_csv(&runs))?;
    write(&spec.out_dir.join("paired.csv"), &paired_csv(&runs))?;
    let curves = spec.out_dir.join("curves");
    create_dir(&curves)?;
    for combination in &spec.combinations {
        let members: Vec<&RunRecord> = runs
            .iter()
            .filter(|r| r.run.combination == *combination)
            .map(|r| &r.record)
            .collect();
        write(
            &curves.join(format!("{}.csv", combination.label())),
            &mean_curve_csv(&members),
        )?;
    }
    Ok(ExperimentOutput { runs, summary_path })
}

pub fn summary_csv(runs: &[RunOutput]) -> String {
    let mut out = String::from(
        "combination,strategy,info,nav,pose,outcome,total_distance_m,total_time_s,replans,final_mapping_pct,ticks\n",
    );
    for r in runs {
        let c = r.run.combination;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{},{:.6},{}",
            c.label(),
            c.strategy.as_str(),
            c.info.as_str(),
            c.nav.as_str(),
            r.run.pose_index,
            r.record.outcome.as_str(),
            r.record.total_distance(),
            r.record.total_time(),
            r.record.replans.len(),
            100.0 * r.record.final_mapping_pct(),
            r.record.ticks.len()
        );
    }
    out
}

/// PREVENTIVE versus PERSISTENT total distance for every pose and
/// (info, nav) pair that ran under both strategies.
pub fn paired_csv(runs: &[RunOutput]) -> String {
    let mut out = String::from("info,nav,pose,persistent_distance_m,preventive_distance_m,ratio\n");
    for a in runs
        .iter()
        .filter(|r| r.run.combination.strategy == Strategy::Persistent)
    {
        let partner = runs.iter().find(|b| {
            b.run.pose_index == a.run.pose_index
                && b.run.combination
                    == Combination::new(Strategy::Preventive, a.run.combination.info, a.run.combination.nav)
        });
        if let Some(b) = partner {
            let (pd, vd) = (a.record.total_distance(), b.record.total_distance());
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                a.run.combination.info.as_str(),
                a.run.combination.nav.as_str(),
                a.run.pose_index,
                pd,
                vd,
                if pd > 0.0 { vd / pd } else { f64::NAN }
            );
        }
    }
    out
}

/// Mapping percentage of a run after `distance` meters of travel.
fn mapped_at(curve: &[(f64, f64)], distance: f64) -> f64 {
    let k = curve.partition_point(|&(d, _)| d <= distance);
    if k == 0 {
        curve.first().map_or(0.0, |c| c.1)
    } else {
        curve[k - 1].1
    }
}

/// Mean mapping percentage versus distance traveled, sampled every meter.
/// Runs that ended earlier keep their final value.
pub fn mean_curve_csv(records: &[&RunRecord]) -> String {
    let mut out = String::from("distance_m,mean_mapping_pct,min_mapping_pct,max_mapping_pct\n");
    if records.is_empty() {
        return out;
    }
    let curves: Vec<Vec<(f64, f64)>> = records.iter().map(|r| r.map_curve()).collect();
    let longest = records.iter().map(|r| r.total_distance()).fold(0.0, f64::max);
    let steps = longest.ceil() as usize;
    for k in 0..=steps {
        let d = k as f64;
        let values: Vec<f64> = curves.iter().map(|c| 100.0 * mapped_at(c, d)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(out, "{d:.6},{mean:.6},{lo:.6},{hi:.6}");
    }
    out
}

/// Replays the single run described by `run_dir/config.txt` and writes the
/// map at the first tick reaching `pct` percent. Returns the written path.
pub fn replay_snapshot(run_dir: &Path, pct: f64) -> Result<PathBuf> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(ExploreError::config(
            "pct",
            format!("out of range: {pct} is not a percentage"),
        ));
    }
    let config_path = run_dir.join("config.txt");
    let text = fs::read_to_string(&config_path).map_err(|e| ExploreError::io(&config_path, e))?;
    let mut spec = ExperimentSpec::parse(&text, &[], run_dir)?;
    let runs = spec.runs();
    let [run] = runs.as_slice() else {
        return Err(ExploreError::config(
            "config.txt",
            format!("expected a single-run configuration, found {} runs", runs.len()),
        ));
    };
    spec.snapshots = vec![pct];
    let world = spec.world.load(spec.sensor)?;
    let record = execute(&world, &spec, run)?;
    let Some(snap) = record.snapshots.first() else {
        return Err(ExploreError::config(
            "pct",
            format!(
                "the run never reached {pct}% (final {:.2}%)",
                100.0 * record.final_mapping_pct()
            ),
        ));
    };
    let dir = run_dir.join("snapshots");
    create_dir(&dir)?;
    let path = dir.join(snapshot_name(pct));
    write(&path, &snap.pgm)?;
    Ok(path)
}

//! The closed exploration loop: sense, map, select, plan and follow, under
//! one of three replanning strategies.
//!
//! Every tick the robot takes a scan, folds it into the map, checks the
//! strategy's replanning trigger, and advances the path follower by one
//! control period. Replanning always starts from the current reference point
//! `p(s)` rather than from the robot, since `p(s)` is guaranteed to lie in
//! the planning space while the robot need not.

use std::fmt;
use std::str::FromStr;

use crate::control::{step, ControlOutput, ControlParams, UnicycleState};
use crate::costmap::{build_cost_field, CostField, CostToGo, NavKind, PathPlan};
use crate::error::{ExploreError, Result};
use crate::frontier::{cluster_frontiers, detect_frontiers, refresh_frontiers, FrontierRegion, FrontierSet, InfoKind};
use crate::geometry::Vec2;
use crate::occupancy::{CellState, MappingParams, OccupancyGrid, SafeSpaces};
use crate::viewpoint::{is_informative, is_near, pick_target, score_regions, MapView, Target, ViewpointQuery};
use crate::world::{simulate_scan, GroundTruthWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Replan on arrival at the end of the current path.
    Persistent,
    /// Replan on arrival, or as soon as the path end stops being informative.
    Preventive,
    /// Replan at a fixed period.
    Online,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Persistent, Strategy::Preventive, Strategy::Online];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Persistent => "persistent",
            Strategy::Preventive => "preventive",
            Strategy::Online => "online",
        }
    }
}

impl FromStr for Strategy {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "persistent" => Ok(Strategy::Persistent),
            "preventive" | "last-mile" | "last_mile" => Ok(Strategy::Preventive),
            "online" => Ok(Strategy::Online),
            other => Err(ExploreError::config("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig {
    pub strategy: Strategy,
    pub info: InfoKind,
    pub nav: NavKind,
    /// Seconds between replans under [`Strategy::Online`].
    pub replan_period: f64,
    /// Tick limit; `None` derives it from the world size.
    pub step_budget: Option<u64>,
    pub scan_period: f64,
    pub robot_radius: f64,
    pub clearance: f64,
    /// Visibility tolerance; `None` means two cell widths.
    pub eta: Option<f64>,
    pub mu: f64,
    /// Distance-to-unknown saturation; `None` means twice the sensing range.
    pub alpha_max: Option<f64>,
    /// Distance-to-collision saturation; `None` means five times `radius + clearance`.
    pub beta_max: Option<f64>,
    /// Scans taken in place before the first plan, at most.
    pub warmup_scans: usize,
    pub mapping: MappingParams,
    pub control: ControlParams,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Persistent,
            info: InfoKind::Volume,
            nav: NavKind::Geodesic,
            replan_period: 1.0,
            step_budget: None,
            scan_period: 0.1,
            robot_radius: 0.35,
            clearance: 0.1,
            eta: None,
            mu: 0.0,
            alpha_max: None,
            beta_max: None,
            warmup_scans: 10,
            mapping: MappingParams::default(),
            control: ControlParams::default(),
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        self.mapping.validate()?;
        self.control.validate()?;
        let positive = [
            ("replan_period", self.replan_period),
            ("scan_period", self.scan_period),
            ("robot_radius", self.robot_radius),
            ("clearance", self.clearance),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExploreError::config(key, format!("must be positive, got {value}")));
            }
        }
        for (key, value) in [
            ("alpha_max", self.alpha_max),
            ("beta_max", self.beta_max),
            ("eta", self.eta),
        ] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ExploreError::config(key, format!("must be positive, got {v}")));
                }
            }
        }
        if self.step_budget == Some(0) {
            return Err(ExploreError::config("step_budget", "must be positive"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(ExploreError::config("mu", format!("must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn query(&self, resolution: f64, sensing_range: f64) -> ViewpointQuery {
        ViewpointQuery {
            eta: self.eta.unwrap_or(2.0 * resolution),
            sensing_range,
            mu: self.mu,
            info: self.info,
            nav: self.nav,
        }
    }

    pub fn alpha(&self, sensing_range: f64) -> f64 {
        self.alpha_max.unwrap_or(2.0 * sensing_range)
    }

    pub fn beta(&self) -> f64 {
        self.beta_max.unwrap_or(5.0 * (self.robot_radius + self.clearance))
    }

    pub fn budget_for(&self, world: &GroundTruthWorld) -> u64 {
        self.step_budget.unwrap_or_else(|| {
            let coverage = world.free_cell_count() as f64 * world.spec.resolution / self.control.v_max;
            (20.0 * coverage / self.control.dt).ceil() as u64
        })
    }

    /// Ticks between scans.
    fn scan_every(&self) -> u64 {
        ((self.scan_period / self.control.dt).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Complete,
    Timeout,
    SafetyViolation,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Complete => "COMPLETE",
            Outcome::Timeout => "TIMEOUT",
            Outcome::SafetyViolation => "SAFETY_VIOLATION",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickEvent {
    None,
    Replan,
    /// Trigger fired but no plan was found from the anchor; the path is kept.
    Hold,
    Complete,
    Timeout,
    SafetyViolation,
}

impl TickEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TickEvent::None => "",
            TickEvent::Replan => "replan",
            TickEvent::Hold => "hold",
            TickEvent::Complete => "complete",
            TickEvent::Timeout => "timeout",
            TickEvent::SafetyViolation => "safety_violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub time: f64,
    pub position: Vec2,
    pub heading: f64,
    pub s: f64,
    pub v: f64,
    pub w: f64,
    pub s_rate: f64,
    pub dist_to_unsafe: f64,
    pub distance_traveled: f64,
    pub mapping_pct: f64,
    pub n_regions: usize,
    /// Increments with every new path.
    pub path_id: u64,
    /// Whether the position lies in the control space of the current map.
    pub in_control: bool,
    pub event: TickEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanRecord {
    pub tick: u64,
    pub time: f64,
    /// Where the new path starts: the reference point at trigger time.
    pub start: Vec2,
    /// Reference point `p(s)` at trigger time.
    pub reference: Vec2,
    pub robot: Vec2,
    pub region_id: usize,
    pub viewpoint: Vec2,
    pub path_length: f64,
    pub travel_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub milestone: f64,
    pub tick: u64,
    pub pgm: String,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub ticks: Vec<TickRecord>,
    pub replans: Vec<ReplanRecord>,
    pub outcome: Outcome,
    pub warnings: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    pub final_map: OccupancyGrid,
}

impl RunRecord {
    pub fn total_distance(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.distance_traveled)
    }

    pub fn total_time(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.time)
    }

    pub fn final_mapping_pct(&self) -> f64 {
        self.final_map.mapping_percentage()
    }

    /// `(distance traveled, mapping percentage)` per tick.
    pub fn map_curve(&self) -> Vec<(f64, f64)> {
        self.ticks
            .iter()
            .map(|t| (t.distance_traveled, t.mapping_pct))
            .collect()
    }
}

/// Map-derived layers, rebuilt whenever the classification changes.
#[derive(Debug, Clone)]
struct Layers {
    revision: u64,
    /// Classification the layers were derived from.
    states: Vec<CellState>,
    spaces: SafeSpaces,
    frontiers: FrontierSet,
    regions: Vec<FrontierRegion>,
    field: Option<CostField>,
}

impl Layers {
    fn build(grid: &OccupancyGrid, config: &ExplorationConfig) -> Self {
        let spaces = SafeSpaces::compute(grid, config.robot_radius, config.clearance);
        let frontiers = detect_frontiers(grid);
        let regions = cluster_frontiers(grid.spec(), &frontiers.cells);
        Self {
            revision: grid.revision(),
            states: grid.states().to_vec(),
            spaces,
            frontiers,
            regions,
            field: None,
        }
    }

    /// Incremental rebuild around the cells whose class changed.
    fn update(&mut self, grid: &OccupancyGrid) {
        let changed: Vec<usize> = grid
            .states()
            .iter()
            .zip(&self.states)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect();
        self.states.copy_from_slice(grid.states());
        self.revision = grid.revision();
        if changed.is_empty() {
            return;
        }
        self.spaces.refresh(grid, &changed);
        refresh_frontiers(grid, &mut self.frontiers, &changed);
        self.regions = cluster_frontiers(grid.spec(), &self.frontiers.cells);
        self.field = None;
    }
}

/// Result of planning from one start position.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub path: PathPlan,
    pub target: Target,
}

/// Selects the target region as seen from `start` and plans the minimum
/// travel-cost path to its viewpoint. `None` means nothing qualifies.
pub fn exploration_plan(view: &MapView<'_>, start: Vec2, query: &ViewpointQuery) -> Result<Option<PlanOutcome>> {
    let reach = CostToGo::compute(view.field, start);
    let Some(target) = pick_target(&score_regions(view, &reach, query), query.mu) else {
        return Ok(None);
    };
    let path = reach
        .path_to(target.viewpoint)
        .ok_or_else(|| ExploreError::Internal(format!("selected viewpoint {} is unreachable", target.viewpoint)))?;
    Ok(Some(PlanOutcome { path, target }))
}

/// One exploration run, advanced tick by tick.
pub struct Session<'w> {
    world: &'w GroundTruthWorld,
    config: ExplorationConfig,
    query: ViewpointQuery,
    grid: OccupancyGrid,
    layers: Layers,
    state: UnicycleState,
    path: PathPlan,
    path_id: u64,
    tick: u64,
    budget: u64,
    distance: f64,
    last_replan: Option<f64>,
    ticks: Vec<TickRecord>,
    replans: Vec<ReplanRecord>,
    warnings: Vec<String>,
    milestones: Vec<f64>,
    snapshots: Vec<Snapshot>,
    outcome: Option<Outcome>,
}

impl<'w> Session<'w> {
    /// Places the robot, scans in place until its cell is in the planning
    /// space, and sets the initial path to the start point itself.
    pub fn new(world: &'w GroundTruthWorld, config: ExplorationConfig, start: Vec2, heading: f64) -> Result<Self> {
        config.validate()?;
        if !world.is_free_position(start) {
            return Err(ExploreError::InvalidStart(start));
        }
        let sensor = world.sensor;
        let query = config.query(world.spec.resolution, sensor.sensing_range);
        query.validate()?;
        let mut grid = OccupancyGrid::new(world.spec, config.mapping)?;
        let mut layers = Layers::build(&grid, &config);
        let mut scans = 0;
        while !layers.spaces.in_planning(start) {
            if scans == config.warmup_scans.max(1) {
                return Err(ExploreError::InvalidStart(start));
            }
            let scan = simulate_scan(world, start)?;
            grid.integrate_scan(&scan)?;
            layers.update(&grid);
            scans += 1;
        }

        let mut warnings = Vec::new();
        if config.strategy == Strategy::Online && config.nav != NavKind::Geodesic {
            warnings.push(format!(
                "online replanning with {} navigation cost may livelock",
                config.nav.as_str()
            ));
        }
        let budget = config.budget_for(world);
        Ok(Self {
            world,
            query,
            grid,
            layers,
            state: UnicycleState::new(start, heading),
            path: PathPlan::stationary(start),
            path_id: 0,
            tick: 0,
            budget,
            distance: 0.0,
            last_replan: None,
            ticks: Vec::new(),
            replans: Vec::new(),
            warnings,
            milestones: Vec::new(),
            snapshots: Vec::new(),
            outcome: None,
            config,
        })
    }

    /// Mapping-percentage milestones at which a map snapshot is kept.
    pub fn with_snapshots(mut self, milestones: &[f64]) -> Self {
        let mut m = milestones.to_vec();
        m.sort_by(f64::total_cmp);
        self.milestones = m;
        self
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn spaces(&self) -> &SafeSpaces {
        &self.layers.spaces
    }

    pub fn frontiers(&self) -> &FrontierSet {
        &self.layers.frontiers
    }

    pub fn regions(&self) -> &[FrontierRegion] {
        &self.layers.regions
    }

    pub fn state(&self) -> &UnicycleState {
        &self.state
    }

    pub fn path(&self) -> &PathPlan {
        &self.path
    }

    pub fn query(&self) -> &ViewpointQuery {
        &self.query
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.ticks
    }

    pub fn replans(&self) -> &[ReplanRecord] {
        &self.replans
    }

    pub fn cost_field(&mut self) -> Result<&CostField> {
        if self.layers.field.is_none() {
            let sensing = self.world.sensor.sensing_range;
            self.layers.field = Some(build_cost_field(
                &self.grid,
                &self.layers.spaces,
                self.config.alpha(sensing),
                self.config.beta(),
            )?);
        }
        Ok(self.layers.field.as_ref().unwrap())
    }

    fn sense(&mut self) -> Result<()> {
        if !self.tick.is_multiple_of(self.config.scan_every()) {
            return Ok(());
        }
        let scan = simulate_scan(self.world, self.state.position)?;
        self.grid.integrate_scan(&scan)?;
        if self.grid.revision() != self.layers.revision {
            self.layers.update(&self.grid);
        }
        Ok(())
    }

    fn triggered(&self, time: f64) -> bool {
        let end = self.path.end();
        let arrived = is_near(self.state.position, end, self.query.eta);
        match self.config.strategy {
            Strategy::Persistent => arrived,
            Strategy::Preventive => arrived || !is_informative(&self.grid, &self.layers.frontiers, end, &self.query),
            Strategy::Online => match self.last_replan {
                None => true,
                Some(t) => time - t >= self.config.replan_period - 1e-9,
            },
        }
    }

    /// Start of the next plan: `p(s)`, or the nearest waypoint of its segment
    /// when `p(s)` falls outside the planning lattice cells.
    fn anchor(&self) -> Vec2 {
        let reference = self.path.point_at(self.state.s);
        if self.layers.spaces.in_planning(reference) {
            return reference;
        }
        let w = self.path.nearest_waypoint(self.state.s);
        if self.layers.spaces.in_planning(w) {
            w
        } else {
            self.path.end()
        }
    }

    /// Runs the replanning step. Returns the tick event and whether the run
    /// is complete.
    fn replan(&mut self, time: f64) -> Result<TickEvent> {
        let end = self.path.end();
        let anchor = self.anchor();
        let query = self.query;
        self.cost_field()?;
        let layers = &self.layers;
        let view = MapView {
            grid: &self.grid,
            spaces: &layers.spaces,
            field: layers.field.as_ref().unwrap(),
            frontiers: &layers.frontiers,
            regions: &layers.regions,
        };
        let at_end = exploration_plan(&view, end, &query)?;
        if at_end.is_none() {
            return Ok(TickEvent::Complete);
        }
        let plan = if anchor == end {
            at_end
        } else {
            exploration_plan(&view, anchor, &query)?
        };
        self.last_replan = Some(time);
        let Some(plan) = plan else {
            return Ok(TickEvent::Hold);
        };
        let spec = self.grid.spec();
        self.replans.push(ReplanRecord {
            tick: self.tick,
            time,
            start: plan.path.start(),
            reference: self.path.point_at(self.state.s),
            robot: self.state.position,
            region_id: plan.target.region_id,
            viewpoint: spec.center_of_index(plan.target.viewpoint),
            path_length: plan.path.total_length(),
            travel_cost: plan.path.total_cost(),
        });
        self.path = plan.path;
        self.path_id += 1;
        self.state.s = 0.0;
        Ok(TickEvent::Replan)
    }

    fn log(&mut self, time: f64, out: Option<ControlOutput>, event: TickEvent) {
        let out = out.unwrap_or(ControlOutput {
            v: 0.0,
            w: 0.0,
            s_rate: 0.0,
            dist_to_unsafe: 0.0,
        });
        let mapping_pct = self.grid.mapping_percentage();
        self.ticks.push(TickRecord {
            tick: self.tick,
            time,
            position: self.state.position,
            heading: self.state.heading,
            s: self.state.s,
            v: out.v,
            w: out.w,
            s_rate: out.s_rate,
            dist_to_unsafe: out.dist_to_unsafe,
            distance_traveled: self.distance,
            mapping_pct,
            n_regions: self.layers.regions.len(),
            path_id: self.path_id,
            in_control: self.layers.spaces.in_control(self.state.position),
            event,
        });
        while let Some(&m) = self.milestones.first() {
            if mapping_pct < m {
                break;
            }
            self.milestones.remove(0);
            self.snapshots.push(Snapshot {
                milestone: m,
                tick: self.tick,
                pgm: self.grid.to_pgm(),
            });
        }
    }

    /// Advances one tick. Returns the outcome once the run has ended.
    pub fn step(&mut self) -> Result<Option<Outcome>> {
        if let Some(o) = self.outcome {
            return Ok(Some(o));
        }
        let time = self.tick as f64 * self.config.control.dt;
        self.sense()?;

        let mut event = TickEvent::None;
        if self.triggered(time) {
            event = self.replan(time)?;
            if event == TickEvent::Complete {
                self.log(time, None, event);
                self.outcome = Some(Outcome::Complete);
                return Ok(self.outcome);
            }
        }

        match step(&self.state, &self.path, &self.layers.spaces, &self.config.control) {
            Ok((next, out)) => {
                self.distance += next.position.distance(self.state.position);
                self.state = next;
                self.tick += 1;
                let time = self.tick as f64 * self.config.control.dt;
                let at_budget = self.tick >= self.budget;
                let event = if at_budget && event == TickEvent::None {
                    TickEvent::Timeout
                } else {
                    event
                };
                self.log(time, Some(out), event);
                if at_budget {
                    self.outcome = Some(Outcome::Timeout);
                }
            }
            Err(ExploreError::SafetyViolation(p)) => {
                self.state.position = p;
                self.tick += 1;
                let time = self.tick as f64 * self.config.control.dt;
                self.log(time, None, TickEvent::SafetyViolation);
                self.outcome = Some(Outcome::SafetyViolation);
            }
            Err(e) => return Err(e),
        }
        Ok(self.outcome)
    }

    /// Steps until the run ends.
    pub fn run_to_end(&mut self) -> Result<Outcome> {
        loop {
            if let Some(o) = self.step()? {
                return Ok(o);
            }
        }
    }

    pub fn into_record(self) -> RunRecord {
        RunRecord {
            ticks: self.ticks,
            replans: self.replans,
            outcome: self.outcome.unwrap_or(Outcome::Timeout),
            warnings: self.warnings,
            snapshots: self.snapshots,
            final_map: self.grid,
        }
    }
}

/// Runs one exploration from `start` to its end.
pub fn run_exploration(
    world: &GroundTruthWorld,
    config: &ExplorationConfig,
    start: Vec2,
    heading: f64,
) -> Result<RunRecord> {
    let mut session = Session::new(world, config.clone(), start, heading)?;
    session.run_to_end()?;
    Ok(session.into_record())
}

pub fn run_persistent(
    world: &GroundTruthWorld,
    config: &ExplorationConfig,
    start: Vec2,
    heading: f64,
) -> Result<RunRecord> {
    let config = ExplorationConfig {
        strategy: Strategy::Persistent,
        ..config.clone()
    };
    run_exploration(world, &config, start, heading)
}

pub fn run_preventive(
    world: &GroundTruthWorld,
    config: &ExplorationConfig,
    start: Vec2,
    heading: f64,
) -> Result<RunRecord> {
    let config = ExplorationConfig {
        strategy: Strategy::Preventive,
        ..config.clone()
    };
    run_exploration(world, &config, start, heading)
}

pub fn run_online(
    world: &GroundTruthWorld,
    config: &ExplorationConfig,
    start: Vec2,
    heading: f64,
) -> Result<RunRecord> {
    let config = ExplorationConfig {
        strategy: Strategy::Online,
        ..config.clone()
    };
    run_exploration(world, &config, start, heading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{load_world, SensorParams};

    fn boxed(w: usize, h: usize) -> GroundTruthWorld {
        let mut s = String::from("resolution 0.1\n");
        for r in 0..h {
            for c in 0..w {
                let border = r == 0 || c == 0 || r == h - 1 || c == w - 1;
                s.push(if border { '#' } else { '.' });
            }
            s.push('\n');
        }
        load_world(&s, SensorParams::default()).unwrap()
    }

    #[test]
    fn small_room_completes_immediately() {
        // 1.6 m room: one position sees everything
        let world = boxed(16, 16);
        for strategy in Strategy::ALL {
            let config = ExplorationConfig {
                strategy,
                robot_radius: 0.2,
                ..Default::default()
            };
            let rec = run_exploration(&world, &config, Vec2::new(0.8, 0.8), 0.0).unwrap();
            assert_eq!(rec.outcome, Outcome::Complete, "{strategy:?}");
            assert!(rec.replans.len() <= 1, "{strategy:?}: {} replans", rec.replans.len());
        }
    }

    #[test]
    fn start_in_wall_rejected() {
        let world = boxed(30, 30);
        let err = Session::new(&world, ExplorationConfig::default(), Vec2::new(0.05, 0.05), 0.0).err();
        assert!(matches!(err, Some(ExploreError::InvalidStart(_))));
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("sometimes".parse::<Strategy>().is_err());
    }

    #[test]
    fn online_euclidean_flagged() {
        let world = boxed(30, 30);
        let config = ExplorationConfig {
            strategy: Strategy::Online,
            nav: NavKind::Euclidean,
            ..Default::default()
        };
        let session = Session::new(&world, config, Vec2::new(1.5, 1.5), 0.0).unwrap();
        assert_eq!(session.warnings.len(), 1);
    }
}

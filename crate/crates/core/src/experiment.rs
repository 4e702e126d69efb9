//! Experiment configuration, the reproducible commands behind the CLI, and
//! SVG rendering of episodes.
//!
//! Every command is a function of the configuration and a seed. Output
//! files are byte-identical across reruns apart from wall-clock runtime
//! columns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::controllers::{ExpertConfig, GoalZone, LeftTurnPath, Obstacle, ReferencePath};
use crate::dynamics::Pose;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::supervisor::{
    run_episode, AvoidanceSettings, EpisodeConfig, EpisodeLog, EpisodeStatus, Mode, VerificationSettings,
};
use crate::trainer::{generate_dataset, train, write_dataset, DatasetConfig, JitterBox, TrainConfig, TrainReport};
use crate::world::{random_obstacles, RandomObstacles, WorldMap};

pub const WEIGHTS_FILE: &str = "weights.json";
pub const TRAINING_REPORT_FILE: &str = "training_report.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const EPISODE_FILE: &str = "episode.csv";
pub const BOXES_FILE: &str = "boxes.csv";
pub const WORLD_FILE: &str = "world.json";
pub const SVG_FILE: &str = "trajectory.svg";
pub const STEPS_TABLE_FILE: &str = "sweep_steps.csv";
pub const ORDERS_TABLE_FILE: &str = "sweep_orders.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub width: f64,
    pub height: f64,
    pub robot_radius: f64,
    /// Fixed obstacles. When empty, `random` places obstacles from the seed.
    pub obstacles: Vec<Obstacle>,
    pub random: RandomObstacles,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldMap::default();
        WorldSection {
            width: w.width,
            height: w.height,
            robot_radius: w.robot_radius,
            obstacles: Vec::new(),
            random: RandomObstacles::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    /// `[x, y, theta]`.
    pub start: [f64; 3],
    /// Localization half-widths `[x, y, theta]`.
    pub noise: [f64; 3],
    pub timeout: f64,
    pub deadline: f64,
    pub collision_samples: usize,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        EpisodeSection {
            start: e.start.as_array(),
            noise: e.noise,
            timeout: e.timeout,
            deadline: e.deadline,
            collision_samples: e.collision_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub trajectories: usize,
    pub rate_hz: f64,
    pub trajectory_timeout: f64,
    pub jitter_lo: [f64; 3],
    pub jitter_hi: [f64; 3],
    pub max_path_offset: f64,
    pub lookahead: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub warmup_epochs: usize,
    pub hidden: Vec<usize>,
    pub heldout_fraction: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        let t = TrainConfig::default();
        TrainingSection {
            trajectories: d.n_traj,
            rate_hz: d.rate_hz,
            trajectory_timeout: d.timeout,
            jitter_lo: d.jitter.lo,
            jitter_hi: d.jitter.hi,
            max_path_offset: d.max_path_offset,
            lookahead: d.expert.lookahead,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            momentum: t.momentum,
            decay_every: t.decay_every,
            decay_factor: t.decay_factor,
            warmup_epochs: t.warmup_epochs,
            hidden: t.hidden,
            heldout_fraction: t.heldout_fraction,
            max_grad_norm: t.max_grad_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub steps: Vec<usize>,
    pub tm_degrees: Vec<u32>,
    pub bp_orders: Vec<usize>,
    /// Episodes per sweep point; episode `i` uses seed `seed + i`.
    pub episodes: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            steps: vec![10, 15, 20, 30],
            tm_degrees: vec![1, 2, 3],
            bp_orders: vec![1, 2, 3],
            episodes: 10,
        }
    }
}

/// The whole configuration file. Every section and key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub world: WorldSection,
    pub path: LeftTurnPath,
    pub goal: GoalZone,
    pub episode: EpisodeSection,
    pub verification: VerificationSettings,
    pub avoidance: AvoidanceSettings,
    pub training: TrainingSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            world: WorldSection::default(),
            path: LeftTurnPath::default(),
            goal: GoalZone::default(),
            episode: EpisodeSection::default(),
            verification: VerificationSettings::default(),
            avoidance: AvoidanceSettings::default(),
            training: TrainingSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.verification;
        if v.steps == 0 || v.substeps == 0 || !(v.delta > 0.0) || v.bp_order == 0 || v.tm_degree == 0 {
            return Err(Error::Config(
                "verification steps, substeps, delta, tm_degree and bp_order must be positive".into(),
            ));
        }
        let e = &self.episode;
        if !(e.timeout > 0.0) || !(e.deadline > 0.0) || e.noise.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::Config("episode timeout and deadline must be positive, noise non-negative".into()));
        }
        if self.sweep.steps.contains(&0) || self.sweep.tm_degrees.contains(&0) || self.sweep.bp_orders.contains(&0) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        if self.training.trajectories == 0 || self.training.hidden.contains(&0) {
            return Err(Error::Config("training needs trajectories and non-empty hidden layers".into()));
        }
        self.base_world().validate()
    }

    fn base_world(&self) -> WorldMap {
        WorldMap {
            width: self.world.width,
            height: self.world.height,
            obstacles: self.world.obstacles.clone(),
            robot_radius: self.world.robot_radius,
        }
    }

    pub fn reference_path(&self) -> Result<ReferencePath> {
        ReferencePath::left_turn(&self.path)
    }

    /// The world for `seed`: the fixed obstacles if any are listed,
    /// otherwise `world.random.count` obstacles placed along the path.
    pub fn world_for_seed(&self, seed: u64) -> Result<WorldMap> {
        let mut world = self.base_world();
        if world.obstacles.is_empty() && self.world.random.count > 0 {
            world.obstacles = random_obstacles(&self.reference_path()?, &self.world.random, &world, seed)?;
        }
        world.validate()?;
        Ok(world)
    }

    pub fn episode_config(&self, seed: u64) -> Result<EpisodeConfig> {
        let [x, y, theta] = self.episode.start;
        Ok(EpisodeConfig {
            world: self.world_for_seed(seed)?,
            start: Pose::new(x, y, theta),
            goal: self.goal,
            noise: self.episode.noise,
            timeout: self.episode.timeout,
            deadline: self.episode.deadline,
            verification: self.verification,
            avoidance: self.avoidance,
            collision_samples: self.episode.collision_samples,
        })
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let t = &self.training;
        let [x, y, theta] = self.episode.start;
        DatasetConfig {
            n_traj: t.trajectories,
            start: Pose::new(x, y, theta),
            jitter: JitterBox {
                lo: t.jitter_lo,
                hi: t.jitter_hi,
            },
            max_path_offset: t.max_path_offset,
            rate_hz: t.rate_hz,
            timeout: t.trajectory_timeout,
            path: self.path,
            expert: ExpertConfig {
                lookahead: t.lookahead,
                goal: self.goal,
                ..ExpertConfig::default()
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            momentum: t.momentum,
            decay_every: t.decay_every,
            decay_factor: t.decay_factor,
            warmup_epochs: t.warmup_epochs,
            hidden: t.hidden.clone(),
            heldout_fraction: t.heldout_fraction,
            max_grad_norm: t.max_grad_norm,
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Generates the demonstrations, trains, and writes the weights, the
/// dataset and the per-epoch loss report into `out_dir`.
pub fn cmd_train(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(NetworkSpec, TrainReport)> {
    let data = generate_dataset(&cfg.dataset_config(), seed)?;
    info!("generated {} demonstrations", data.len());
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_dataset(out_dir.join(DATASET_FILE), &data)?;
    let (net, report) = train(&data, &cfg.train_config(), seed)?;
    info!(
        "best held-out MSE {:.4e} at epoch {} ({} train / {} held-out samples)",
        report.best_heldout, report.best_epoch, report.train_samples, report.heldout_samples
    );
    net.save(out_dir.join(WEIGHTS_FILE))?;
    write(out_dir, TRAINING_REPORT_FILE, &report.to_csv())?;
    Ok((net, report))
}

/// Runs one supervised episode and writes its log, flowpipe boxes, world
/// and SVG rendering into `out_dir`.
pub fn cmd_run(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64, out_dir: &Path) -> Result<EpisodeLog> {
    let ep = cfg.episode_config(seed)?;
    let log = run_episode(&ep, net, seed)?;
    info!(
        "episode {} at t={:.1}s, {} switch cycles, backup {:.1}s, mean verification {:.4}s",
        log.status,
        log.end_time,
        log.switch_cycles(),
        log.backup_time(),
        log.mean_runtime()
    );
    write(out_dir, EPISODE_FILE, &log.to_csv())?;
    write(out_dir, BOXES_FILE, &log.boxes_csv())?;
    let world_json = serde_json::to_string_pretty(&ep.world).expect("world serializes");
    write(out_dir, WORLD_FILE, &world_json)?;
    let scene = Scene::from_log(&ep.world, cfg.goal, &log);
    write(out_dir, SVG_FILE, &render_svg(&scene, Some(&cfg.reference_path()?)))?;
    Ok(log)
}

fn run_batch(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64) -> Result<Vec<EpisodeLog>> {
    let episodes = cfg.sweep.episodes.max(1);
    (0..episodes as u64)
        .map(|i| {
            let s = seed.wrapping_add(i);
            let log = run_episode(&cfg.episode_config(s)?, net, s)?;
            if log.status != EpisodeStatus::GoalReached {
                warn!("sweep episode with seed {s} ended in {}", log.status);
            }
            Ok(log)
        })
        .collect()
}

/// Averages over a batch of episodes at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    /// Mean wall-clock verification runtime per tick, seconds.
    pub runtime: f64,
    pub total_time: f64,
    pub backup_time: f64,
    pub collisions: usize,
}

impl SweepPoint {
    fn from_logs(logs: &[EpisodeLog]) -> Self {
        let ticks: usize = logs.iter().map(|l| l.ticks.len()).sum();
        let runtime: f64 = logs.iter().flat_map(|l| &l.ticks).map(|r| r.runtime_seconds).sum();
        let n = logs.len().max(1) as f64;
        SweepPoint {
            runtime: if ticks == 0 { 0.0 } else { runtime / ticks as f64 },
            total_time: logs.iter().map(|l| l.total_time()).sum::<f64>() / n,
            backup_time: logs.iter().map(|l| l.backup_time()).sum::<f64>() / n,
            collisions: logs.iter().filter(|l| l.status == EpisodeStatus::Collision).count(),
        }
    }

    /// Backup time as a percentage of total task time.
    pub fn utilization(&self) -> f64 {
        if self.total_time > 0.0 {
            self.backup_time / self.total_time * 100.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepsTable {
    pub steps: Vec<usize>,
    pub points: Vec<SweepPoint>,
}

impl StepsTable {
    /// One row per metric, one column per step count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric");
        for k in &self.steps {
            let _ = write!(s, ",{k}");
        }
        s.push('\n');
        let rows: [(&str, fn(&SweepPoint) -> f64); 4] = [
            ("runtime_s", |p| p.runtime),
            ("task_total_time_s", |p| p.total_time),
            ("backup_time_s", |p| p.backup_time),
            ("backup_utilization_pct", |p| p.utilization()),
        ];
        for (name, f) in rows {
            s.push_str(name);
            for p in &self.points {
                let _ = write!(s, ",{}", f(p));
            }
            s.push('\n');
        }
        s
    }
}

/// Runs `sweep.episodes` episodes for every horizon in `sweep.steps`.
pub fn sweep_steps(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64) -> Result<StepsTable> {
    let mut points = Vec::new();
    for &steps in &cfg.sweep.steps {
        let mut c = cfg.clone();
        c.verification.steps = steps;
        let p = SweepPoint::from_logs(&run_batch(&c, net, seed)?);
        info!("steps {steps}: runtime {:.4}s, utilization {:.2}%", p.runtime, p.utilization());
        points.push(p);
    }
    Ok(StepsTable {
        steps: cfg.sweep.steps.clone(),
        points,
    })
}

pub fn cmd_sweep_steps(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64, out_dir: &Path) -> Result<StepsTable> {
    let table = sweep_steps(cfg, net, seed)?;
    write(out_dir, STEPS_TABLE_FILE, &table.to_csv())?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrdersRow {
    pub tm_degree: u32,
    pub bp_order: usize,
    pub runtime: f64,
    /// Mean runtime within the deadline.
    pub valid: bool,
}

pub fn orders_csv(rows: &[OrdersRow]) -> String {
    let mut s = String::from("tm_degree,bp_order,mean_runtime_s,valid\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.tm_degree, r.bp_order, r.runtime, r.valid);
    }
    s
}

/// Runs `sweep.episodes` episodes for every (TM degree, BP order) pair.
pub fn sweep_orders(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64) -> Result<Vec<OrdersRow>> {
    let mut rows = Vec::new();
    for &tm_degree in &cfg.sweep.tm_degrees {
        for &bp_order in &cfg.sweep.bp_orders {
            let mut c = cfg.clone();
            c.verification.tm_degree = tm_degree;
            c.verification.bp_order = bp_order;
            let p = SweepPoint::from_logs(&run_batch(&c, net, seed)?);
            info!("tm {tm_degree} bp {bp_order}: runtime {:.4}s", p.runtime);
            rows.push(OrdersRow {
                tm_degree,
                bp_order,
                runtime: p.runtime,
                valid: p.runtime < cfg.episode.deadline,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep_orders(cfg: &ExperimentConfig, net: &NetworkSpec, seed: u64, out_dir: &Path) -> Result<Vec<OrdersRow>> {
    let rows = sweep_orders(cfg, net, seed)?;
    write(out_dir, ORDERS_TABLE_FILE, &orders_csv(&rows))?;
    Ok(rows)
}

/// What an SVG rendering shows.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub world: WorldMap,
    pub goal: GoalZone,
    /// Robot positions per tick with the mode chosen there.
    pub trajectory: Vec<([f64; 2], Mode)>,
    /// Flowpipe boxes `[x_lo, x_hi, y_lo, y_hi]` with the tick's mode.
    pub boxes: Vec<([f64; 4], Mode)>,
}

impl Scene {
    pub fn from_log(world: &WorldMap, goal: GoalZone, log: &EpisodeLog) -> Self {
        let mut trajectory: Vec<_> = log.ticks.iter().map(|r| ([r.pose.x, r.pose.y], r.mode)).collect();
        if let Some(last) = log.ticks.last() {
            trajectory.push(([log.final_pose.x, log.final_pose.y], last.mode));
        }
        let boxes = log
            .ticks
            .iter()
            .flat_map(|r| r.boxes.iter().map(move |b| (*b, r.mode)))
            .collect();
        Scene {
            world: world.clone(),
            goal,
            trajectory,
            boxes,
        }
    }

    /// Rebuilds a scene from the files written by [`cmd_run`].
    pub fn load(dir: &Path, goal: GoalZone) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let world: WorldMap = serde_json::from_str(&read(WORLD_FILE)?).map_err(|e| Error::parse("world file", e))?;
        world.validate()?;
        let episode = read(EPISODE_FILE)?;
        let mut trajectory = Vec::new();
        for row in csv_rows(&episode, EpisodeLog::HEADER, "episode log")? {
            trajectory.push(([num(&row, 1)?, num(&row, 2)?], mode(&row, 4)?));
        }
        let boxes_text = read(BOXES_FILE)?;
        let mut boxes = Vec::new();
        for row in csv_rows(&boxes_text, "t,period,x_lo,x_hi,y_lo,y_hi,mode", "boxes file")? {
            boxes.push(([num(&row, 2)?, num(&row, 3)?, num(&row, 4)?, num(&row, 5)?], mode(&row, 6)?));
        }
        Ok(Scene {
            world,
            goal,
            trajectory,
            boxes,
        })
    }
}

fn csv_rows<'a>(text: &'a str, header: &str, what: &'static str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::parse(what, format!("expected header `{header}`")));
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row: Vec<&str> = l.split(',').collect();
            if row.len() == width {
                Ok(row)
            } else {
                Err(Error::parse(what, format!("expected {width} fields in `{l}`")))
            }
        })
        .collect()
}

fn num(row: &[&str], i: usize) -> Result<f64> {
    row[i]
        .parse()
        .map_err(|_| Error::parse("csv field", format!("`{}` is not a number", row[i])))
}

fn mode(row: &[&str], i: usize) -> Result<Mode> {
    match row[i] {
        "NN" => Ok(Mode::Nn),
        "BACKUP" => Ok(Mode::Backup),
        other => Err(Error::parse("csv field", format!("unknown mode `{other}`"))),
    }
}

const PX_PER_M: f64 = 100.0;
const MARGIN: f64 = 20.0;
const NN_COLOR: &str = "#2ca02c";
const BACKUP_COLOR: &str = "#d62728";

fn mode_color(m: Mode) -> &'static str {
    match m {
        Mode::Nn => NN_COLOR,
        Mode::Backup => BACKUP_COLOR,
    }
}

/// SVG picture of a scene, y axis pointing up: walls, goal zone, optional
/// reference path, obstacles, flowpipe boxes and the trajectory, the last
/// two colored green for NN and red for BACKUP.
pub fn render_svg(scene: &Scene, path: Option<&ReferencePath>) -> String {
    let w = &scene.world;
    let width = w.width * PX_PER_M + 2.0 * MARGIN;
    let height = w.height * PX_PER_M + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x * PX_PER_M;
    let py = |y: f64| MARGIN + (w.height - y) * PX_PER_M;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##);

    let g = &scene.goal;
    let gx0 = g.x_min.max(0.0);
    let gx1 = g.x_max.min(w.width);
    let gy0 = g.y_min.clamp(0.0, w.height);
    if gx1 > gx0 && w.height > gy0 {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#fff3c4" stroke="none"/>"##,
            px(gx0),
            py(w.height),
            (gx1 - gx0) * PX_PER_M,
            (w.height - gy0) * PX_PER_M
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000" stroke-width="3"/>"##,
        px(0.0),
        py(w.height),
        w.width * PX_PER_M,
        w.height * PX_PER_M
    );

    if let Some(p) = path {
        let _ = write!(s, r##"<polyline fill="none" stroke="#888888" stroke-width="1" stroke-dasharray="6 4" points=""##);
        for (i, q) in p.points().iter().enumerate().step_by(20) {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", px(q[0]), py(q[1]));
        }
        if let Some(q) = p.points().last() {
            let _ = write!(s, " {:.2},{:.2}", px(q[0]), py(q[1]));
        }
        s.push_str("\"/>\n");
    }

    for o in &w.obstacles {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#555555"/>"##,
            px(o.x),
            py(o.y),
            o.radius * PX_PER_M
        );
    }

    let _ = writeln!(s, r#"<g fill-opacity="0.08" stroke-opacity="0.5" stroke-width="0.5">"#);
    for (b, m) in &scene.boxes {
        let c = mode_color(*m);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{c}" stroke="{c}"/>"#,
            px(b[0]),
            py(b[3]),
            (b[1] - b[0]) * PX_PER_M,
            (b[3] - b[2]) * PX_PER_M
        );
    }
    s.push_str("</g>\n");

    // segment i is colored by the mode chosen at point i; one polyline per
    // run of equal mode, consecutive runs share a vertex
    let t = &scene.trajectory;
    let mut start = 0;
    while start + 1 < t.len() {
        let m = t[start].1;
        let mut end = start + 1;
        while end + 1 < t.len() && t[end].1 == m {
            end += 1;
        }
        let _ = write!(s, r#"<polyline fill="none" stroke="{}" stroke-width="2.5" points=""#, mode_color(m));
        for (i, (p, _)) in t[start..=end].iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", px(p[0]), py(p[1]));
        }
        s.push_str("\"/>\n");
        start = end;
    }
    s.push_str("</svg>\n");
    s
}

/// Re-renders the SVG in `dir` from the files written by [`cmd_run`].
pub fn cmd_render(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    let scene = Scene::load(dir, cfg.goal)?;
    write(dir, SVG_FILE, &render_svg(&scene, Some(&cfg.reference_path()?)))
}

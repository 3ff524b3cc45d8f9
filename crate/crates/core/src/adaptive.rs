//! Adaptive zone-2 scheme.
//!
//! A 1→H→1 regressor (logistic hidden layer, linear output) maps wind speed
//! to the magnitude of the in-feed compensated zone-2 reach. The network is
//! trained by full-batch gradient descent on data produced by the fault
//! solver. [`adaptive_update`] picks the zone-2 reach from whatever is
//! available: nothing (farm offline), phasor telemetry, or wind speed alone.
//!
//! Losses and gradients are taken on the normalized output scale; RMSE
//! figures in reports are in Ω.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::faultsolver::{solve_with_mode, FaultError, FaultScenario, SolverMode};
use crate::network::{min_remote_line_z1, NetworkModel};
use crate::phasor::{Impedance, Phasor};
use crate::relay::{infeed_factor, zone2_adaptive, zone2_static, KMode, RelayError, ZoneSettings};
use crate::windfarm::{WindFarm, WindState};

pub const HIDDEN_UNITS: usize = 85;

/// Wind-speed band the input normalization maps onto [-1, 1], m/s.
pub const INPUT_BAND: (f64, f64) = (4.0, 25.0);

/// Speeds a dataset may hold, m/s.
pub const SPEED_LIMITS: (f64, f64) = (0.0, 30.0);

pub const MIN_DATASET_ROWS: usize = 20;

/// Accepted range of `TrainingConfig::train_fraction`.
pub const TRAIN_FRACTION_BAND: (f64, f64) = (0.6, 0.7);

const FORMAT_TAG: &str = "zone2-mlp";
const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("dataset has {rows} rows, at least {MIN_DATASET_ROWS} are needed")]
    DatasetTooSmall { rows: usize },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("duplicate wind speed {0} m/s in dataset")]
    DuplicateSpeed(f64),
    #[error("dataset row {index}: {reason}")]
    InvalidRow { index: usize, reason: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("solve at {speed} m/s failed: {source}")]
    Solve { speed: f64, source: FaultError },
    #[error(transparent)]
    Relay(#[from] RelayError),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

/// Affine map `(x − mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { mean: 0.0, scale: 1.0 };

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }

    pub fn invert(&self, u: f64) -> f64 {
        u * self.scale + self.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub input_norm: Normalization,
    pub output_norm: Normalization,
}

/// Parameter gradients, same layout as [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

impl MlpModel {
    /// All parameters zero, identity normalizations.
    pub fn zeros(hidden: usize) -> Self {
        MlpModel {
            w1: vec![0.0; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            input_norm: Normalization::IDENTITY,
            output_norm: Normalization::IDENTITY,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn validate(&self) -> Result<(), AdaptiveError> {
        let h = self.hidden();
        if h == 0 || self.b1.len() != h || self.w2.len() != h {
            return Err(AdaptiveError::InvalidModel(format!("layer sizes differ: w1 {}, b1 {}, w2 {}", h, self.b1.len(), self.w2.len())));
        }
        let finite = self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite()) && self.b2.is_finite();
        if !finite {
            return Err(AdaptiveError::InvalidModel("non-finite parameter".into()));
        }
        for (name, n) in [("input", self.input_norm), ("output", self.output_norm)] {
            if !(n.mean.is_finite() && n.scale.is_finite() && n.scale > 0.0) {
                return Err(AdaptiveError::InvalidModel(format!("{name} normalization must be finite with scale > 0")));
            }
        }
        Ok(())
    }

    /// Hidden activations and normalized output for normalized input `u`.
    fn forward_normalized(&self, u: f64) -> (Vec<f64>, f64) {
        let h: Vec<f64> = self.w1.iter().zip(&self.b1).map(|(w, b)| sigmoid(w * u + b)).collect();
        let o = self.w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + self.b2;
        (h, o)
    }

    fn output_normalized(&self, u: f64) -> f64 {
        self.w1.iter().zip(&self.b1).zip(&self.w2).map(|((w1, b1), w2)| w2 * sigmoid(w1 * u + b1)).sum::<f64>() + self.b2
    }

    fn gradient_normalized(&self, u: f64, t: f64) -> (Gradients, f64) {
        let (h, o) = self.forward_normalized(u);
        let r = o - t;
        let w2 = h.iter().map(|h| r * h).collect();
        let b1: Vec<f64> = self.w2.iter().zip(&h).map(|(w, h)| r * w * h * (1.0 - h)).collect();
        let w1 = b1.iter().map(|d| d * u).collect();
        (Gradients { w1, b1, w2, b2: r }, 0.5 * r * r)
    }

    /// Loss `½(o − t)²` on the normalized output scale.
    pub fn loss(&self, x: f64, y_target: f64) -> f64 {
        let (_, o) = self.forward_normalized(self.input_norm.apply(x));
        let r = o - self.output_norm.apply(y_target);
        0.5 * r * r
    }

    /// Flat parameter view: w1, b1, w2, b2.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(3 * self.hidden() + 1);
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    /// Inverse of [`MlpModel::parameters`]; `p` must have `3·hidden + 1` entries.
    pub fn set_parameters(&mut self, p: &[f64]) {
        let h = self.hidden();
        assert_eq!(p.len(), 3 * h + 1, "parameter vector length");
        self.w1.copy_from_slice(&p[..h]);
        self.b1.copy_from_slice(&p[h..2 * h]);
        self.w2.copy_from_slice(&p[2 * h..3 * h]);
        self.b2 = p[3 * h];
    }

    /// Serialize to the flat text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{FORMAT_TAG} {FORMAT_VERSION} inputs=1 hidden={} outputs=1 input_mean={:.16e} input_scale={:.16e} output_mean={:.16e} output_scale={:.16e}",
            self.hidden(),
            self.input_norm.mean,
            self.input_norm.scale,
            self.output_norm.mean,
            self.output_norm.scale
        );
        for v in self.parameters() {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }
}

impl FromStr for MlpModel {
    type Err = AdaptiveError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |line: usize, reason: String| AdaptiveError::Format { line, reason };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(FORMAT_TAG) || fields.next() != Some(FORMAT_VERSION) {
            return Err(bad(1, format!("expected header '{FORMAT_TAG} {FORMAT_VERSION} ...'")));
        }
        let keys = ["inputs", "hidden", "outputs", "input_mean", "input_scale", "output_mean", "output_scale"];
        let mut values = [0.0f64; 7];
        for (key, slot) in keys.iter().zip(values.iter_mut()) {
            let field = fields.next().ok_or_else(|| bad(1, format!("missing '{key}'")))?;
            let value = field
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| bad(1, format!("expected '{key}=...', found '{field}'")))?;
            *slot = value.parse().map_err(|_| bad(1, format!("'{key}' is not a number: '{value}'")))?;
        }
        if let Some(extra) = fields.next() {
            return Err(bad(1, format!("unexpected field '{extra}'")));
        }
        let [inputs, hidden, outputs, in_mean, in_scale, out_mean, out_scale] = values;
        if inputs != 1.0 || outputs != 1.0 {
            return Err(bad(1, "only 1-input 1-output networks are supported".into()));
        }
        if !(hidden >= 1.0 && hidden.fract() == 0.0 && hidden <= 1e6) {
            return Err(bad(1, format!("invalid hidden size {hidden}")));
        }
        let h = hidden as usize;
        let mut params = Vec::with_capacity(3 * h + 1);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line.trim().parse().map_err(|_| bad(line_no, format!("not a number: '{line}'")))?;
            params.push(v);
        }
        if params.len() != 3 * h + 1 {
            return Err(bad(0, format!("expected {} parameters for hidden={h}, found {}", 3 * h + 1, params.len())));
        }
        let mut model = MlpModel::zeros(h);
        model.set_parameters(&params);
        model.input_norm = Normalization { mean: in_mean, scale: in_scale };
        model.output_norm = Normalization { mean: out_mean, scale: out_scale };
        model.validate()?;
        Ok(model)
    }
}

/// `y = denorm(w2·σ(w1·norm(x) + b1) + b2)`, Ω.
pub fn mlp_forward(model: &MlpModel, x: f64) -> f64 {
    let (_, o) = model.forward_normalized(model.input_norm.apply(x));
    model.output_norm.invert(o)
}

/// Backpropagated gradient of `½(o − norm(y_target))²`. With identity
/// output normalization the `b2` component equals `y − y_target`.
pub fn mlp_gradient(model: &MlpModel, x: f64, y_target: f64) -> Gradients {
    model.gradient_normalized(model.input_norm.apply(x), model.output_norm.apply(y_target)).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRow {
    /// m/s
    pub wind_speed: f64,
    /// Ω
    pub target: f64,
}

/// Training rows with unique speeds in [0, 30] m/s and positive targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>) -> Result<Self, AdaptiveError> {
        for (index, r) in rows.iter().enumerate() {
            if !(r.wind_speed >= SPEED_LIMITS.0 && r.wind_speed <= SPEED_LIMITS.1) {
                return Err(AdaptiveError::InvalidRow {
                    index,
                    reason: format!("wind speed {} m/s outside [{}, {}]", r.wind_speed, SPEED_LIMITS.0, SPEED_LIMITS.1),
                });
            }
            if !(r.target > 0.0 && r.target.is_finite()) {
                return Err(AdaptiveError::InvalidRow { index, reason: format!("target {} must be finite and > 0", r.target) });
            }
        }
        let mut speeds: Vec<f64> = rows.iter().map(|r| r.wind_speed).collect();
        speeds.sort_by(f64::total_cmp);
        if let Some(w) = speeds.windows(2).find(|w| w[0] == w[1]) {
            return Err(AdaptiveError::DuplicateSpeed(w[0]));
        }
        Ok(Dataset { rows })
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Magnitude of the in-feed compensated zone-2 reach for every speed in
/// `speeds`, in grid order.
pub fn generate_dataset(model: &NetworkModel, farm: &WindFarm, scenario: &FaultScenario, speeds: &[f64]) -> Result<Dataset, AdaptiveError> {
    generate_dataset_with(model, farm, scenario, speeds, SolverMode::Full, KMode::Complex)
}

pub fn generate_dataset_with(
    model: &NetworkModel,
    farm: &WindFarm,
    scenario: &FaultScenario,
    speeds: &[f64],
    mode: SolverMode,
    k_mode: KMode,
) -> Result<Dataset, AdaptiveError> {
    let ctx = AdaptiveContext::for_network(model, k_mode)?;
    let mut rows = Vec::with_capacity(speeds.len());
    for (index, &speed) in speeds.iter().enumerate() {
        if !(speed >= SPEED_LIMITS.0 && speed <= SPEED_LIMITS.1) {
            return Err(AdaptiveError::InvalidRow { index, reason: format!("wind speed {speed} m/s outside [0, 30]") });
        }
        let wind = WindState::uniform(farm, speed);
        let sol = solve_with_mode(model, farm, &wind, scenario, mode).map_err(|source| AdaptiveError::Solve { speed, source })?;
        let k = infeed_factor(sol.i_remote, sol.i_relay)?;
        let reach = zone2_adaptive(ctx.z_ab, &ctx.remote_z1s, k_mode.apply(k))?;
        rows.push(DatasetRow { wind_speed: speed, target: reach.norm() });
    }
    Dataset::new(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Validation RMSE (Ω) at which training stops.
    pub target_rmse: f64,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { train_fraction: 0.7, learning_rate: 0.5, max_epochs: 5_000, target_rmse: 0.0, seed: 1, hidden: HIDDEN_UNITS }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        let fail = |m: String| Err(AdaptiveError::InvalidConfig(m));
        if !(self.train_fraction >= TRAIN_FRACTION_BAND.0 && self.train_fraction <= TRAIN_FRACTION_BAND.1) {
            return fail(format!("train_fraction {} outside [0.6, 0.7]", self.train_fraction));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be finite and > 0, got {}", self.learning_rate));
        }
        if !(self.target_rmse >= 0.0) {
            return fail(format!("target_rmse must be >= 0, got {}", self.target_rmse));
        }
        if self.hidden == 0 {
            return fail("hidden must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Ω
    pub train_rmse: f64,
    /// Ω
    pub val_rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Epoch 0 is the initial model.
    pub curve: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub stop: StopReason,
    pub final_learning_rate: f64,
}

impl TrainingReport {
    pub fn final_record(&self) -> EpochRecord {
        *self.curve.last().expect("curve always holds epoch 0")
    }
}

struct Batch {
    u: Vec<f64>,
    t: Vec<f64>,
}

impl Batch {
    fn new(model: &MlpModel, rows: &[DatasetRow], idx: &[usize]) -> Self {
        Batch {
            u: idx.iter().map(|&i| model.input_norm.apply(rows[i].wind_speed)).collect(),
            t: idx.iter().map(|&i| model.output_norm.apply(rows[i].target)).collect(),
        }
    }

    /// Mean loss on the normalized scale.
    fn loss(&self, model: &MlpModel) -> f64 {
        let n = self.u.len() as f64;
        self.u
            .iter()
            .zip(&self.t)
            .map(|(&u, &t)| {
                let r = model.output_normalized(u) - t;
                0.5 * r * r
            })
            .sum::<f64>()
            / n
    }

    fn rmse_ohm(&self, model: &MlpModel) -> f64 {
        (2.0 * self.loss(model)).sqrt() * model.output_norm.scale
    }

    /// Mean gradient in the flat [`MlpModel::parameters`] layout.
    #[allow(clippy::needless_range_loop)] // several parallel per-unit arrays
    fn mean_gradient(&self, model: &MlpModel, acc: &mut [f64]) {
        let h = model.hidden();
        acc.iter_mut().for_each(|v| *v = 0.0);
        let mut act = vec![0.0; h];
        for (&u, &t) in self.u.iter().zip(&self.t) {
            let mut o = model.b2;
            for j in 0..h {
                act[j] = sigmoid(model.w1[j] * u + model.b1[j]);
                o += model.w2[j] * act[j];
            }
            let r = o - t;
            for j in 0..h {
                let d = r * model.w2[j] * act[j] * (1.0 - act[j]);
                acc[j] += d * u;
                acc[h + j] += d;
                acc[2 * h + j] += r * act[j];
            }
            acc[3 * h] += r;
        }
        let n = self.u.len() as f64;
        acc.iter_mut().for_each(|v| *v /= n);
    }
}

fn split_with(rng: &mut ChaCha8Rng, n: usize, train_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train_idx = order[..n_train].to_vec();
    let mut val_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    (train_idx, val_idx)
}

/// Training and validation row indices [`train`] uses for `n` rows under `cfg`.
pub fn split_indices(n: usize, cfg: &TrainingConfig) -> Result<(Vec<usize>, Vec<usize>), AdaptiveError> {
    cfg.validate()?;
    if n < MIN_DATASET_ROWS {
        return Err(AdaptiveError::DatasetTooSmall { rows: n });
    }
    Ok(split_with(&mut ChaCha8Rng::seed_from_u64(cfg.seed), n, cfg.train_fraction))
}

/// Deterministic full-batch gradient descent. A step that raises the
/// training loss is undone and the learning rate halved, so the recorded
/// training RMSE never increases.
pub fn train(dataset: &Dataset, cfg: &TrainingConfig) -> Result<(MlpModel, TrainingReport), AdaptiveError> {
    cfg.validate()?;
    let n = dataset.len();
    if n < MIN_DATASET_ROWS {
        return Err(AdaptiveError::DatasetTooSmall { rows: n });
    }
    let rows = dataset.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = split_with(&mut rng, n, cfg.train_fraction);

    let targets: Vec<f64> = train_idx.iter().map(|&i| rows[i].target).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / targets.len() as f64;
    let std = var.sqrt();
    let output_scale = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };

    let mut model = MlpModel::zeros(cfg.hidden);
    model.input_norm = Normalization { mean: 0.5 * (INPUT_BAND.0 + INPUT_BAND.1), scale: 0.5 * (INPUT_BAND.1 - INPUT_BAND.0) };
    model.output_norm = Normalization { mean, scale: output_scale };
    for j in 0..cfg.hidden {
        model.w1[j] = rng.gen_range(-0.5..=0.5);
        model.b1[j] = rng.gen_range(-0.5..=0.5);
    }

    let train_batch = Batch::new(&model, rows, &train_idx);
    let val_batch = Batch::new(&model, rows, &val_idx);

    let mut lr = cfg.learning_rate;
    let mut loss = train_batch.loss(&model);
    if !loss.is_finite() {
        return Err(AdaptiveError::Diverged { epoch: 0 });
    }
    let scale = model.output_norm.scale;
    let record = |epoch: usize, loss: f64, m: &MlpModel| EpochRecord {
        epoch,
        train_rmse: (2.0 * loss).sqrt() * scale,
        val_rmse: val_batch.rmse_ohm(m),
    };
    let mut curve = vec![record(0, loss, &model)];
    let mut stop = StopReason::MaxEpochs;
    let mut params = model.parameters();
    let mut trial = model.clone();
    let mut grad = vec![0.0; params.len()];
    let mut stepped = params.clone();

    for epoch in 1..=cfg.max_epochs {
        if curve.last().unwrap().val_rmse <= cfg.target_rmse {
            stop = StopReason::TargetReached;
            break;
        }
        train_batch.mean_gradient(&model, &mut grad);
        stepped.iter_mut().zip(params.iter().zip(&grad)).for_each(|(s, (p, g))| *s = p - lr * g);
        trial.set_parameters(&stepped);
        let new_loss = train_batch.loss(&trial);
        if !new_loss.is_finite() {
            return Err(AdaptiveError::Diverged { epoch });
        }
        if new_loss <= loss {
            std::mem::swap(&mut params, &mut stepped);
            model.set_parameters(&params);
            loss = new_loss;
        } else {
            lr *= 0.5;
        }
        curve.push(record(epoch, loss, &model));
    }
    if stop == StopReason::MaxEpochs && curve.last().unwrap().val_rmse <= cfg.target_rmse {
        stop = StopReason::TargetReached;
    }
    let report = TrainingReport { curve, train_indices: train_idx, val_indices: val_idx, stop, final_learning_rate: lr };
    Ok((model, report))
}

/// RMSE (Ω) and largest absolute error (Ω) of `model` over `rows`.
pub fn evaluate(model: &MlpModel, rows: &[DatasetRow]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let errs: Vec<f64> = rows.iter().map(|r| mlp_forward(model, r.wind_speed) - r.target).collect();
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let max = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    (rmse, max)
}

/// Line data the update needs beyond the static settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveContext {
    pub z_ab: Impedance,
    pub remote_z1s: Vec<Impedance>,
    pub static_settings: ZoneSettings,
    pub k_mode: KMode,
}

impl AdaptiveContext {
    pub fn for_network(model: &NetworkModel, k_mode: KMode) -> Result<Self, AdaptiveError> {
        let (_, min_z) = min_remote_line_z1(model, model.junction()).map_err(RelayError::from)?;
        Ok(AdaptiveContext {
            z_ab: model.protected_line().z1(),
            remote_z1s: vec![min_z],
            static_settings: ZoneSettings::for_network(model)?,
            k_mode,
        })
    }

    fn static_reach(&self) -> Result<Impedance, AdaptiveError> {
        Ok(zone2_static(self.z_ab, &self.remote_z1s)?)
    }
}

/// What the relay knows about the farm at update time.
#[derive(Debug, Clone, Copy)]
pub enum WindInput<'a> {
    Telemetry { i_remote: Phasor, i_relay: Phasor },
    Speed { speed: f64, model: &'a MlpModel, farm: &'a WindFarm },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateBranch {
    /// Farm offline: static reach.
    Offline,
    /// Reach from measured K_Remote.
    Telemetry { k: Complex64 },
    /// Reach magnitude from the regressor, static angle.
    Regressor { speed: f64 },
    /// Speed outside [cut_in, cut_out): the farm is idle, static reach.
    IdleSpeed { speed: f64 },
    /// |K_Remote| outside its sanity band: static reach, flag raised.
    KOutOfRange { k: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveUpdate {
    pub settings: ZoneSettings,
    pub branch: UpdateBranch,
}

impl AdaptiveUpdate {
    /// True when implausible telemetry forced the static fallback.
    pub fn fallback_flag(&self) -> bool {
        matches!(self.branch, UpdateBranch::KOutOfRange { .. })
    }
}

/// One pass of the online update: zone 2 follows the farm, zones 1 and 3
/// stay static.
pub fn adaptive_update(farm_online: bool, input: &WindInput, ctx: &AdaptiveContext) -> Result<AdaptiveUpdate, AdaptiveError> {
    let base = ctx.static_settings;
    let static_reach = ctx.static_reach()?;
    let done = |reach: Impedance, branch| -> Result<AdaptiveUpdate, AdaptiveError> {
        Ok(AdaptiveUpdate { settings: base.with_zone2(reach)?, branch })
    };
    if !farm_online {
        return done(static_reach, UpdateBranch::Offline);
    }
    match *input {
        WindInput::Telemetry { i_remote, i_relay } => {
            let k = infeed_factor(i_remote, i_relay)?;
            match zone2_adaptive(ctx.z_ab, &ctx.remote_z1s, ctx.k_mode.apply(k)) {
                Ok(reach) => done(reach, UpdateBranch::Telemetry { k }),
                Err(RelayError::KOutOfRange { .. }) => done(static_reach, UpdateBranch::KOutOfRange { k }),
                Err(e) => Err(e.into()),
            }
        }
        WindInput::Speed { speed, model, farm } => {
            if !(speed >= farm.cut_in && speed < farm.cut_out) {
                return done(static_reach, UpdateBranch::IdleSpeed { speed });
            }
            let magnitude = mlp_forward(model, speed);
            done(Complex64::from_polar(magnitude, static_reach.arg()), UpdateBranch::Regressor { speed })
        }
    }
}

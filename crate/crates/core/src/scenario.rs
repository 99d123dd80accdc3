//! Domain types shared by every other module: radar constants, array
//! geometry, placement constraints, target parameters and whole scenarios,
//! plus the polar/Cartesian conversions and the JSON scenario format.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A position in the surveillance plane, in meters.
pub type Point = Vector2<f64>;

/// Errors raised while converting coordinates or ingesting scenario files.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("target at the array origin has no direction of arrival")]
    ZeroRange,
    #[error("range {range:.3} m exceeds the configured coverage of {max_range:.3} m")]
    OutOfCoverage { range: f64, max_range: f64 },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid scenario: {}", list_violations(.0))]
    Invalid(Vec<Violation>),
}

fn list_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Global radar constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Range-bin width (m).
    pub bin_width: f64,
    pub snapshots: u32,
    /// Per-component variance of the target reflection coefficient.
    pub scatter_var: f64,
    /// Per-component variance of the receiver noise.
    pub noise_var: f64,
    /// Transmit power per transmitter (W); length must match the transmit count.
    pub powers: Vec<f64>,
    /// Maximum coverage range (m).
    pub max_range: f64,
    /// Keep the spill-only bin in front of the first occupied cell.
    pub include_bin0: bool,
}

impl RadarConfig {
    /// Default simulation constants with unit power on `transmitters` antennas.
    pub fn standard(transmitters: usize) -> Self {
        Self {
            wavelength: 0.3,
            bin_width: 30.0,
            snapshots: 128,
            scatter_var: 1e-4,
            noise_var: 1.0,
            powers: vec![1.0; transmitters],
            max_range: 5000.0,
            include_bin0: true,
        }
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayMode {
    /// Every physical antenna both transmits and receives.
    Transceiver,
    /// Disjoint transmit and receive antennas.
    Separate,
}

/// Transmit and receive antenna positions.
///
/// In transceiver mode `tx` and `rx` hold the same list; use
/// [`ArrayGeometry::antennas`] / [`ArrayGeometry::with_antennas`] to work
/// with the physical antennas without caring about the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub mode: ArrayMode,
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
}

impl ArrayGeometry {
    pub fn transceiver(positions: Vec<Point>) -> Self {
        Self {
            mode: ArrayMode::Transceiver,
            tx: positions.clone(),
            rx: positions,
        }
    }

    pub fn separate(tx: Vec<Point>, rx: Vec<Point>) -> Self {
        Self {
            mode: ArrayMode::Separate,
            tx,
            rx,
        }
    }

    /// Number of transmitters `M`.
    pub fn m(&self) -> usize {
        self.tx.len()
    }

    /// Number of receivers `N`.
    pub fn n(&self) -> usize {
        self.rx.len()
    }

    /// Physical antennas: the shared list in transceiver mode, transmitters
    /// followed by receivers otherwise.
    pub fn antennas(&self) -> Vec<Point> {
        match self.mode {
            ArrayMode::Transceiver => self.tx.clone(),
            ArrayMode::Separate => self.tx.iter().chain(self.rx.iter()).copied().collect(),
        }
    }

    pub fn antenna_count(&self) -> usize {
        match self.mode {
            ArrayMode::Transceiver => self.tx.len(),
            ArrayMode::Separate => self.tx.len() + self.rx.len(),
        }
    }

    /// Rebuild a geometry of the same shape from a physical antenna list laid
    /// out as in [`ArrayGeometry::antennas`].
    pub fn with_antennas(&self, antennas: &[Point]) -> Self {
        assert_eq!(antennas.len(), self.antenna_count(), "antenna count mismatch");
        match self.mode {
            ArrayMode::Transceiver => Self::transceiver(antennas.to_vec()),
            ArrayMode::Separate => {
                let (tx, rx) = antennas.split_at(self.tx.len());
                Self::separate(tx.to_vec(), rx.to_vec())
            }
        }
    }

    /// Physical antenna index of transmitter `m` and receiver `n`.
    pub fn pair_antennas(&self, n: usize, m: usize) -> (usize, usize) {
        match self.mode {
            ArrayMode::Transceiver => (m, n),
            ArrayMode::Separate => (m, self.tx.len() + n),
        }
    }

    /// Difference vector `s_tm − s_rn` for receiver `n` and transmitter `m`.
    pub fn pair_difference(&self, n: usize, m: usize) -> Point {
        self.tx[m] - self.rx[n]
    }

    /// Joint centroid sum `Σ s_t + Σ s_r`.
    pub fn centroid_sum(&self) -> Point {
        self.tx.iter().chain(self.rx.iter()).fold(Point::zeros(), |a, s| a + s)
    }

    /// Shift every antenna so that the joint centroid sum vanishes.
    pub fn centered(&self) -> Self {
        let total = (self.tx.len() + self.rx.len()) as f64;
        let shift = self.centroid_sum() / total;
        let ants: Vec<Point> = self.antennas().iter().map(|s| s - shift).collect();
        self.with_antennas(&ants)
    }

    /// Translate every antenna by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        let ants: Vec<Point> = self.antennas().iter().map(|s| s + offset).collect();
        self.with_antennas(&ants)
    }
}

/// Distance bounds for one transmit-receive pair (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBound {
    /// Receiver index.
    pub n: usize,
    /// Transmitter index.
    pub m: usize,
    pub d: f64,
    pub e: f64,
}

/// Inter-antenna distance bounds `d ≤ ‖s_tm − s_rn‖ ≤ e`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConstraints {
    /// Uniform lower bound (m).
    pub d: f64,
    /// Uniform upper bound (m).
    pub e: f64,
    /// Per-pair overrides of the uniform bounds.
    pub pairs: Vec<PairBound>,
    /// Whether `validate_scenario` checks the geometry against the rings.
    pub binding: bool,
}

impl PlacementConstraints {
    pub fn uniform(d: f64, e: f64) -> Self {
        Self {
            d,
            e,
            pairs: Vec::new(),
            binding: false,
        }
    }

    /// Defaults used throughout the experiments: `d = λ`, `e = 2λ`.
    pub fn for_wavelength(wavelength: f64) -> Self {
        Self::uniform(wavelength, 2.0 * wavelength)
    }

    /// Bounds for receiver `n`, transmitter `m`, or `None` when the pair is
    /// not constrained (self pairs in transceiver mode).
    pub fn bounds(&self, mode: ArrayMode, n: usize, m: usize) -> Option<(f64, f64)> {
        if mode == ArrayMode::Transceiver && n == m {
            return None;
        }
        let over = self.pairs.iter().find(|p| p.n == n && p.m == m);
        Some(over.map_or((self.d, self.e), |p| (p.d, p.e)))
    }

    /// Every constrained ordered pair `(n, m, d, e)` for the given shape.
    pub fn constrained_pairs(&self, mode: ArrayMode, m_count: usize, n_count: usize) -> Vec<PairBound> {
        let mut out = Vec::new();
        for m in 0..m_count {
            for n in 0..n_count {
                if let Some((d, e)) = self.bounds(mode, n, m) {
                    out.push(PairBound { n, m, d, e });
                }
            }
        }
        out
    }

    /// Largest ring violation of `geom` (0 when feasible).
    pub fn max_violation(&self, geom: &ArrayGeometry) -> f64 {
        self.constrained_pairs(geom.mode, geom.m(), geom.n())
            .iter()
            .map(|p| {
                let dist = geom.pair_difference(p.n, p.m).norm();
                (p.d - dist).max(dist - p.e).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Parameter vector `Θ = (θ, β, ξ̄, ζ̄)` of one target together with its
/// absolute range cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams {
    /// Absolute range cell, starting at 1.
    pub cell: u32,
    /// Direction of arrival (rad), in `(−π, π]`.
    pub theta: f64,
    /// Fractional radial position inside the cell, in `[0, 1]`.
    pub beta: f64,
    /// Mean real part of the reflection coefficient.
    pub xi: f64,
    /// Mean imaginary part of the reflection coefficient.
    pub zeta: f64,
}

impl TargetParams {
    /// Target at Cartesian position `xy` with mean amplitude `xi + j·zeta`.
    pub fn from_cartesian(xy: Point, xi: f64, zeta: f64, radar: &RadarConfig) -> Result<Self, ScenarioError> {
        let polar = params_from_cartesian(xy, radar)?;
        Ok(Self {
            cell: polar.cell,
            theta: polar.theta,
            beta: polar.beta,
            xi,
            zeta,
        })
    }

    pub fn range(&self, radar: &RadarConfig) -> f64 {
        (self.beta + f64::from(self.cell) - 1.0) * radar.bin_width
    }

    pub fn position(&self, radar: &RadarConfig) -> Point {
        cartesian_from_params(self, radar)
    }

    pub fn amplitude_sq(&self) -> f64 {
        self.xi * self.xi + self.zeta * self.zeta
    }
}

/// Range-cell decomposition of a Cartesian position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub cell: u32,
    pub theta: f64,
    pub beta: f64,
    pub range: f64,
}

/// Map a Cartesian target position onto `(cell, θ, β, r)`.
///
/// Positions exactly on a cell edge belong to the inner cell with `β = 1`.
pub fn params_from_cartesian(xy: Point, radar: &RadarConfig) -> Result<Polar, ScenarioError> {
    let range = xy.norm();
    if range == 0.0 {
        return Err(ScenarioError::ZeroRange);
    }
    if range > radar.max_range {
        return Err(ScenarioError::OutOfCoverage {
            range,
            max_range: radar.max_range,
        });
    }
    let scaled = range / radar.bin_width;
    let cell = scaled.ceil().max(1.0);
    let beta = scaled - (cell - 1.0);
    Ok(Polar {
        cell: cell as u32,
        theta: wrap_angle(xy.y.atan2(xy.x)),
        beta,
        range,
    })
}

/// Inverse of [`params_from_cartesian`].
pub fn cartesian_from_params(p: &TargetParams, radar: &RadarConfig) -> Point {
    let r = p.range(radar);
    Point::new(r * p.theta.cos(), r * p.theta.sin())
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w == -PI {
        w = PI;
    }
    w
}

/// Radar, array, constraints and the target set.
///
/// Targets are kept sorted by cell (stable), which fixes the stacking order
/// of every parameter and state vector: cell-major, then target index.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radar: RadarConfig,
    pub array: ArrayGeometry,
    pub constraints: PlacementConstraints,
    targets: Vec<TargetParams>,
}

impl Scenario {
    pub fn new(
        radar: RadarConfig,
        array: ArrayGeometry,
        constraints: PlacementConstraints,
        mut targets: Vec<TargetParams>,
    ) -> Self {
        targets.sort_by_key(|t| t.cell);
        Self {
            radar,
            array,
            constraints,
            targets,
        }
    }

    pub fn targets(&self) -> &[TargetParams] {
        &self.targets
    }

    pub fn with_targets(&self, targets: Vec<TargetParams>) -> Self {
        Self::new(self.radar.clone(), self.array.clone(), self.constraints.clone(), targets)
    }

    pub fn with_array(&self, array: ArrayGeometry) -> Self {
        let mut s = self.clone();
        s.array = array;
        s
    }

    /// Number of paths `MN`.
    pub fn paths(&self) -> usize {
        self.array.m() * self.array.n()
    }

    /// Cell just before the first occupied one (`c*`); 0 when there are no targets.
    pub fn cell_offset(&self) -> u32 {
        self.targets.iter().map(|t| t.cell).min().map_or(0, |c| c - 1)
    }

    /// Number of consecutive cells `C` spanned by the targets.
    pub fn cell_span(&self) -> usize {
        match (self.targets.first(), self.targets.last()) {
            (Some(a), Some(b)) => (b.cell - a.cell + 1) as usize,
            _ => 0,
        }
    }

    /// Cell of target `t` relative to `c*`, in `1..=C`.
    pub fn relative_cell(&self, t: usize) -> usize {
        (self.targets[t].cell - self.cell_offset()) as usize
    }

    /// Targets per relative cell, `n_1..n_C`.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cell_span()];
        for t in 0..self.targets.len() {
            counts[self.relative_cell(t) - 1] += 1;
        }
        counts
    }

    /// First matched-filter bin kept in the measurement vector.
    pub fn first_bin(&self) -> usize {
        if self.radar.include_bin0 {
            0
        } else {
            1
        }
    }

    /// Number of bins carried by the measurement vector.
    pub fn bin_count(&self) -> usize {
        if self.targets.is_empty() {
            return 0;
        }
        self.cell_span() + 1 - self.first_bin()
    }
}

/// A broken invariant reported by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveWavelength,
    NonPositiveBinWidth,
    ZeroSnapshots,
    NegativeScatterVariance,
    NonPositiveNoiseVariance,
    PowerCount { expected: usize, found: usize },
    NonPositivePower { index: usize },
    EmptyArray,
    ModeMismatch,
    NonFiniteGeometry,
    BadBounds { n: usize, m: usize },
    RingViolated { n: usize, m: usize, distance: f64 },
    RatioOutOfRange { target: usize },
    AngleOutOfRange { target: usize },
    ZeroCell { target: usize },
    NonFiniteAmplitude { target: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NonPositiveWavelength => write!(f, "wavelength must be positive"),
            NonPositiveBinWidth => write!(f, "bin width must be positive"),
            ZeroSnapshots => write!(f, "snapshot count must be at least 1"),
            NegativeScatterVariance => write!(f, "scatter variance must be non-negative"),
            NonPositiveNoiseVariance => write!(f, "noise variance must be positive"),
            PowerCount { expected, found } => {
                write!(f, "expected {expected} transmit powers, found {found}")
            }
            NonPositivePower { index } => write!(f, "power of transmitter {index} must be positive"),
            EmptyArray => write!(f, "array needs at least one transmitter and one receiver"),
            ModeMismatch => write!(f, "transceiver mode requires identical tx and rx lists"),
            NonFiniteGeometry => write!(f, "antenna positions must be finite"),
            BadBounds { n, m } => write!(f, "pair (n={n}, m={m}) needs 0 < d < e"),
            RingViolated { n, m, distance } => {
                write!(f, "pair (n={n}, m={m}) distance {distance:.6} m outside its ring")
            }
            RatioOutOfRange { target } => write!(f, "target {target}: beta outside [0, 1]"),
            AngleOutOfRange { target } => write!(f, "target {target}: theta outside (-pi, pi]"),
            ZeroCell { target } => write!(f, "target {target}: cells start at 1"),
            NonFiniteAmplitude { target } => write!(f, "target {target}: amplitude must be finite"),
        }
    }
}

/// Check every type invariant; an empty list means the scenario is usable.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let r = &s.radar;
    if !(r.wavelength > 0.0) {
        out.push(Violation::NonPositiveWavelength);
    }
    if !(r.bin_width > 0.0) {
        out.push(Violation::NonPositiveBinWidth);
    }
    if r.snapshots == 0 {
        out.push(Violation::ZeroSnapshots);
    }
    if !(r.scatter_var >= 0.0) {
        out.push(Violation::NegativeScatterVariance);
    }
    if !(r.noise_var > 0.0) {
        out.push(Violation::NonPositiveNoiseVariance);
    }
    if r.powers.len() != s.array.m() {
        out.push(Violation::PowerCount {
            expected: s.array.m(),
            found: r.powers.len(),
        });
    }
    for (index, p) in r.powers.iter().enumerate() {
        if !(*p > 0.0) {
            out.push(Violation::NonPositivePower { index });
        }
    }

    let a = &s.array;
    if a.tx.is_empty() || a.rx.is_empty() {
        out.push(Violation::EmptyArray);
    }
    if a.mode == ArrayMode::Transceiver && a.tx != a.rx {
        out.push(Violation::ModeMismatch);
    }
    if a.tx.iter().chain(a.rx.iter()).any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        out.push(Violation::NonFiniteGeometry);
    }

    let c = &s.constraints;
    for p in c.constrained_pairs(a.mode, a.m(), a.n()) {
        if !(p.d > 0.0 && p.d < p.e) {
            out.push(Violation::BadBounds { n: p.n, m: p.m });
        } else if c.binding && p.m < a.m() && p.n < a.n() {
            let distance = a.pair_difference(p.n, p.m).norm();
            if distance < p.d - 1e-9 || distance > p.e + 1e-9 {
                out.push(Violation::RingViolated { n: p.n, m: p.m, distance });
            }
        }
    }

    for (i, t) in s.targets().iter().enumerate() {
        if !(0.0..=1.0).contains(&t.beta) {
            out.push(Violation::RatioOutOfRange { target: i });
        }
        if !(t.theta > -PI && t.theta <= PI) {
            out.push(Violation::AngleOutOfRange { target: i });
        }
        if t.cell == 0 {
            out.push(Violation::ZeroCell { target: i });
        }
        if !t.xi.is_finite() || !t.zeta.is_finite() {
            out.push(Violation::NonFiniteAmplitude { target: i });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON scenario format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<RadarDoc>,
    pub array: ArrayDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsDoc>,
    #[serde(default)]
    pub targets: Vec<TargetDoc>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_bin_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers_w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_bin0: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDoc {
    pub mode: ArrayMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsDoc {
    pub d_m: f64,
    pub e_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<bool>,
}

/// Per-pair bounds; `n` (receiver) and `m` (transmitter) are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDoc {
    pub n: usize,
    pub m: usize,
    pub d_m: f64,
    pub e_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetDoc {
    Cartesian(CartesianTargetDoc),
    Params(ParamTargetDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianTargetDoc {
    pub x_m: f64,
    pub y_m: f64,
    pub xi: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamTargetDoc {
    pub cell: u32,
    pub theta_rad: f64,
    pub beta: f64,
    pub xi: f64,
    pub zeta: f64,
}

fn points(v: &[[f64; 2]]) -> Vec<Point> {
    v.iter().map(|p| Point::new(p[0], p[1])).collect()
}

fn pairs_of(v: &[Point]) -> Vec<[f64; 2]> {
    v.iter().map(|p| [p.x, p.y]).collect()
}

/// Parse a scenario document. Omitted radar fields take the default
/// simulation constants; omitted constraints default to `d = λ`, `e = 2λ`.
pub fn load_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        let message = inner.to_string();
        if inner.is_data() && message.starts_with("missing field") {
            ScenarioError::Schema(format!("{message} at `{field}`"))
        } else {
            ScenarioError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message,
            }
        }
    })?;
    scenario_from_doc(doc)
}

/// Convert a parsed document into a validated [`Scenario`].
pub fn scenario_from_doc(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    let array = match (doc.array.mode, &doc.array.tx, &doc.array.rx) {
        (ArrayMode::Transceiver, Some(tx), None) | (ArrayMode::Transceiver, None, Some(tx)) => {
            ArrayGeometry::transceiver(points(tx))
        }
        (_, Some(tx), Some(rx)) => ArrayGeometry {
            mode: doc.array.mode,
            tx: points(tx),
            rx: points(rx),
        },
        (ArrayMode::Separate, _, _) => {
            return Err(ScenarioError::Schema(
                "separate arrays need both `array.tx` and `array.rx`".into(),
            ))
        }
        (ArrayMode::Transceiver, None, None) => {
            return Err(ScenarioError::Schema("missing field `tx` at `array`".into()))
        }
    };

    let rd = doc.radar.unwrap_or_default();
    let mut radar = RadarConfig::standard(array.m());
    if let Some(v) = rd.lambda_m {
        radar.wavelength = v;
    }
    if let Some(v) = rd.r_bin_m {
        radar.bin_width = v;
    }
    if let Some(v) = rd.snapshots {
        radar.snapshots = v;
    }
    if let Some(v) = rd.sigma2_alpha {
        radar.scatter_var = v;
    }
    if let Some(v) = rd.sigma2_w {
        radar.noise_var = v;
    }
    if let Some(v) = rd.powers_w {
        radar.powers = v;
    }
    if let Some(v) = rd.r_max_m {
        radar.max_range = v;
    }
    if let Some(v) = rd.include_bin0 {
        radar.include_bin0 = v;
    }

    let constraints = match doc.constraints {
        None => PlacementConstraints::for_wavelength(radar.wavelength),
        Some(c) => {
            let mut pairs = Vec::with_capacity(c.pairs.len());
            for p in c.pairs {
                if p.n == 0 || p.m == 0 {
                    return Err(ScenarioError::Schema(
                        "constraint pair indices `n` and `m` are 1-based".into(),
                    ));
                }
                pairs.push(PairBound {
                    n: p.n - 1,
                    m: p.m - 1,
                    d: p.d_m,
                    e: p.e_m,
                });
            }
            PlacementConstraints {
                d: c.d_m,
                e: c.e_m,
                pairs,
                binding: c.binding.unwrap_or(false),
            }
        }
    };

    let mut targets = Vec::with_capacity(doc.targets.len());
    for t in doc.targets {
        targets.push(match t {
            TargetDoc::Cartesian(c) => {
                TargetParams::from_cartesian(Point::new(c.x_m, c.y_m), c.xi, c.zeta, &radar)?
            }
            TargetDoc::Params(p) => TargetParams {
                cell: p.cell,
                theta: p.theta_rad,
                beta: p.beta,
                xi: p.xi,
                zeta: p.zeta,
            },
        });
    }

    let scenario = Scenario::new(radar, array, constraints, targets);
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(violations))
    }
}

/// Serialize a scenario back into the document format, every default made
/// explicit. Targets are written in parameter form.
pub fn scenario_to_doc(s: &Scenario) -> ScenarioDoc {
    let r = &s.radar;
    let array = match s.array.mode {
        ArrayMode::Transceiver => ArrayDoc {
            mode: ArrayMode::Transceiver,
            tx: Some(pairs_of(&s.array.tx)),
            rx: None,
        },
        ArrayMode::Separate => ArrayDoc {
            mode: ArrayMode::Separate,
            tx: Some(pairs_of(&s.array.tx)),
            rx: Some(pairs_of(&s.array.rx)),
        },
    };
    ScenarioDoc {
        radar: Some(RadarDoc {
            lambda_m: Some(r.wavelength),
            r_bin_m: Some(r.bin_width),
            snapshots: Some(r.snapshots),
            sigma2_alpha: Some(r.scatter_var),
            sigma2_w: Some(r.noise_var),
            powers_w: Some(r.powers.clone()),
            r_max_m: Some(r.max_range),
            include_bin0: Some(r.include_bin0),
        }),
        array,
        constraints: Some(ConstraintsDoc {
            d_m: s.constraints.d,
            e_m: s.constraints.e,
            pairs: s
                .constraints
                .pairs
                .iter()
                .map(|p| PairDoc {
                    n: p.n + 1,
                    m: p.m + 1,
                    d_m: p.d,
                    e_m: p.e,
                })
                .collect(),
            binding: Some(s.constraints.binding),
        }),
        targets: s
            .targets()
            .iter()
            .map(|t| {
                TargetDoc::Params(ParamTargetDoc {
                    cell: t.cell,
                    theta_rad: t.theta,
                    beta: t.beta,
                    xi: t.xi,
                    zeta: t.zeta,
                })
            })
            .collect(),
    }
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&scenario_to_doc(s)).expect("scenario serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radar() -> RadarConfig {
        RadarConfig::standard(2)
    }

    #[test]
    fn outer_cell_edge_has_unit_ratio() {
        for c in 1..5u32 {
            let p = params_from_cartesian(Point::new(30.0 * f64::from(c), 0.0), &radar()).unwrap();
            assert_eq!(p.cell, c);
            assert!((p.beta - 1.0).abs() < 1e-12);
            assert_eq!(p.theta, 0.0);
        }
    }

    #[test]
    fn inner_cell_edge_ratio_tends_to_zero() {
        let p = params_from_cartesian(Point::new(60.0 + 1e-9, 0.0), &radar()).unwrap();
        assert_eq!(p.cell, 3);
        assert!(p.beta < 1e-9);
    }

    #[test]
    fn reference_target_coordinates() {
        let p = params_from_cartesian(Point::new(410.0, -710.0), &radar()).unwrap();
        assert!((p.range - 819.878_04).abs() < 1e-5);
        assert_eq!(p.cell, 28);
        assert!((p.beta - 0.329_268).abs() < 1e-6);
        assert!((p.beta - 0.33).abs() < 5e-3);
        assert!((p.theta + PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn zero_range_and_coverage_errors() {
        assert!(matches!(
            params_from_cartesian(Point::zeros(), &radar()),
            Err(ScenarioError::ZeroRange)
        ));
        assert!(matches!(
            params_from_cartesian(Point::new(6000.0, 0.0), &radar()),
            Err(ScenarioError::OutOfCoverage { .. })
        ));
    }

    #[test]
    fn params_to_cartesian_examples() {
        let r = radar();
        let t = |cell, theta, beta| TargetParams {
            cell,
            theta,
            beta,
            xi: 1.0,
            zeta: 0.0,
        };
        let a = cartesian_from_params(&t(1, 0.0, 1.0), &r);
        assert!((a - Point::new(30.0, 0.0)).norm() < 1e-12);
        let b = cartesian_from_params(&t(28, -PI / 3.0, 0.3313), &r);
        assert!((b - Point::new(409.9695, -710.0880)).norm() < 1e-3);
        let c = cartesian_from_params(&t(2, PI / 2.0, 0.5), &r);
        assert!((c - Point::new(0.0, 45.0)).norm() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    fn standard_scenario() -> Scenario {
        let r = radar();
        let t = TargetParams::from_cartesian(Point::new(410.0, -710.0), 3.0, 3.0, &r).unwrap();
        Scenario::new(
            r,
            ArrayGeometry::transceiver(vec![Point::new(-0.3, 0.0), Point::new(0.3, 0.0)]),
            PlacementConstraints::for_wavelength(0.3),
            vec![t],
        )
    }

    #[test]
    fn validation_examples() {
        let s = standard_scenario();
        assert!(validate_scenario(&s).is_empty());

        let mut bad = s.clone();
        bad.targets[0].beta = 1.5;
        assert_eq!(validate_scenario(&bad), vec![Violation::RatioOutOfRange { target: 0 }]);

        let mut mixed = s.clone();
        mixed.array.rx[0] = Point::new(0.0, 1.0);
        assert_eq!(validate_scenario(&mixed), vec![Violation::ModeMismatch]);
    }

    #[test]
    fn binding_rings_are_checked() {
        let mut s = standard_scenario();
        s.constraints.binding = true;
        assert!(validate_scenario(&s).is_empty());
        s.array = ArrayGeometry::transceiver(vec![Point::new(-0.1, 0.0), Point::new(0.1, 0.0)]);
        assert!(matches!(validate_scenario(&s)[0], Violation::RingViolated { .. }));
    }

    #[test]
    fn cells_are_normalized() {
        let r = radar();
        let mk = |cell| TargetParams {
            cell,
            theta: 0.1,
            beta: 0.5,
            xi: 1.0,
            zeta: 1.0,
        };
        let s = Scenario::new(
            r,
            ArrayGeometry::transceiver(vec![Point::zeros()]),
            PlacementConstraints::for_wavelength(0.3),
            vec![mk(30), mk(28), mk(28)],
        );
        assert_eq!(s.cell_offset(), 27);
        assert_eq!(s.cell_span(), 3);
        assert_eq!(s.cell_counts(), vec![2, 0, 1]);
        assert_eq!(s.relative_cell(2), 3);
        assert_eq!(s.bin_count(), 4);
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let doc = r#"{
            "array": {"mode": "transceiver", "tx": [[-0.3, 0.0], [0.3, 0.0]]},
            "targets": [{"x_m": 410, "y_m": -710, "xi": 3, "zeta": 3}]
        }"#;
        let s = load_scenario(doc).unwrap();
        assert_eq!(s.array.m(), 2);
        assert_eq!(s.array.n(), 2);
        assert_eq!(s.radar, RadarConfig::standard(2));
        assert_eq!(s.targets()[0].cell, 28);
        assert_eq!(s.constraints.d, 0.3);
        assert_eq!(s.constraints.e, 0.6);
    }

    #[test]
    fn malformed_field_is_named() {
        let doc = r#"{
            "radar": {"lambda_m": "abc"},
            "array": {"mode": "transceiver", "tx": [[0.0, 0.0]]}
        }"#;
        match load_scenario(doc) {
            Err(ScenarioError::Parse { field, line, .. }) => {
                assert_eq!(field, "radar.lambda_m");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_unknown_fields() {
        let missing = r#"{"targets": []}"#;
        assert!(matches!(load_scenario(missing), Err(ScenarioError::Schema(_))));
        let unknown = r#"{"array": {"mode": "transceiver", "tx": [[0,0]]}, "extra": 1}"#;
        assert!(matches!(load_scenario(unknown), Err(ScenarioError::Parse { .. })));
        let sep = r#"{"array": {"mode": "separate", "tx": [[0,0]]}}"#;
        assert!(matches!(load_scenario(sep), Err(ScenarioError::Schema(_))));
    }

    #[test]
    fn transceiver_document_with_different_lists_is_rejected() {
        let doc = r#"{"array": {"mode": "transceiver", "tx": [[0,0]], "rx": [[1,0]]}}"#;
        match load_scenario(doc) {
            Err(ScenarioError::Invalid(v)) => assert_eq!(v, vec![Violation::ModeMismatch]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn document_round_trip() {
        let s = standard_scenario();
        let back = load_scenario(&scenario_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn pair_overrides_and_self_pairs() {
        let mut c = PlacementConstraints::uniform(0.3, 0.6);
        c.pairs.push(PairBound { n: 1, m: 0, d: 0.2, e: 0.4 });
        assert_eq!(c.bounds(ArrayMode::Transceiver, 0, 0), None);
        assert_eq!(c.bounds(ArrayMode::Separate, 0, 0), Some((0.3, 0.6)));
        assert_eq!(c.bounds(ArrayMode::Transceiver, 1, 0), Some((0.2, 0.4)));
        assert_eq!(c.constrained_pairs(ArrayMode::Transceiver, 4, 4).len(), 12);
        assert_eq!(c.constrained_pairs(ArrayMode::Separate, 2, 3).len(), 6);
    }
}

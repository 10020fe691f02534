//! Per-unit network model: buses, branches, generators and loads, plus the
//! validation pass and nodal admittance assembly.
//!
//! The JSON form uses the field names of the structs below and rejects
//! unknown keys. Branch limits may be `null`, meaning unlimited.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

pub const DEFAULT_BASE_MVA: f64 = 100.0;
pub const DEFAULT_POWER_FACTOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum VoltageLevel {
    Kv400,
    Kv132,
    Kv33,
    Kv11,
}

impl VoltageLevel {
    /// Highest voltage first.
    pub const ALL: [VoltageLevel; 4] = [Self::Kv400, Self::Kv132, Self::Kv33, Self::Kv11];

    pub fn kv(self) -> u32 {
        match self {
            Self::Kv400 => 400,
            Self::Kv132 => 132,
            Self::Kv33 => 33,
            Self::Kv11 => 11,
        }
    }
}

impl TryFrom<u32> for VoltageLevel {
    type Error = String;
    fn try_from(kv: u32) -> Result<Self, String> {
        match kv {
            400 => Ok(Self::Kv400),
            132 => Ok(Self::Kv132),
            33 => Ok(Self::Kv33),
            11 => Ok(Self::Kv11),
            other => Err(format!("voltage level {other} kV is not one of 400, 132, 33, 11")),
        }
    }
}

impl From<VoltageLevel> for u32 {
    fn from(v: VoltageLevel) -> u32 {
        v.kv()
    }
}

impl fmt::Display for VoltageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} kV", self.kv())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusRole {
    #[serde(rename = "slack")]
    Slack,
    #[serde(rename = "generator")]
    Generator,
    #[serde(rename = "load-only")]
    LoadOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    pub name: String,
    pub voltage_level: VoltageLevel,
    pub role: BusRole,
    pub region_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    pub b_shunt: f64,
    pub tap: f64,
    /// MW limit on from→to flow, measured at the from end.
    #[serde(with = "limit_mw")]
    pub forward_limit_mw: f64,
    /// MW limit on to→from flow, measured at the from end.
    #[serde(with = "limit_mw")]
    pub reverse_limit_mw: f64,
    pub is_transformer: bool,
}

impl Branch {
    pub fn line(from_bus: u32, to_bus: u32, r: f64, x: f64, b_shunt: f64, limit_mw: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            r,
            x,
            b_shunt,
            tap: 1.0,
            forward_limit_mw: limit_mw,
            reverse_limit_mw: limit_mw,
            is_transformer: false,
        }
    }

    pub fn transformer(
        from_bus: u32,
        to_bus: u32,
        r: f64,
        x: f64,
        forward_limit_mw: f64,
        reverse_limit_mw: f64,
    ) -> Self {
        Self {
            from_bus,
            to_bus,
            r,
            x,
            b_shunt: 0.0,
            tap: 1.0,
            forward_limit_mw,
            reverse_limit_mw,
            is_transformer: true,
        }
    }
}

mod limit_mw {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Ocgt,
    Ccgt,
    Wind,
    Pv,
    Biomass,
    Grid,
}

impl Fuel {
    pub const ALL: [Fuel; 6] = [
        Self::Ocgt,
        Self::Ccgt,
        Self::Wind,
        Self::Pv,
        Self::Biomass,
        Self::Grid,
    ];

    /// Zero-marginal-cost embedded generation that a non-firm connection
    /// may curtail.
    pub fn is_renewable(self) -> bool {
        matches!(self, Self::Wind | Self::Pv | Self::Biomass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ocgt => "ocgt",
            Self::Ccgt => "ccgt",
            Self::Wind => "wind",
            Self::Pv => "pv",
            Self::Biomass => "biomass",
            Self::Grid => "grid",
        }
    }
}

/// Either a fixed £/MWh offer or the market index price of the timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalCost {
    Fixed(f64),
    GridPriced,
}

const GRID_PRICED: &str = "grid-priced";

impl MarginalCost {
    pub fn resolve(self, mip_gbp_mwh: f64) -> f64 {
        match self {
            Self::Fixed(c) => c,
            Self::GridPriced => mip_gbp_mwh,
        }
    }
}

impl Serialize for MarginalCost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Fixed(c) => s.serialize_f64(*c),
            Self::GridPriced => s.serialize_str(GRID_PRICED),
        }
    }
}

impl<'de> Deserialize<'de> for MarginalCost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Self::Fixed(c)),
            Raw::Tag(t) if t == GRID_PRICED => Ok(Self::GridPriced),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "marginal cost must be a number or \"{GRID_PRICED}\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: u32,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub marginal_cost_gbp_mwh: MarginalCost,
    pub fuel: Fuel,
    pub profile_driven: bool,
}

impl Generator {
    pub fn new(bus: u32, fuel: Fuel, p_max_mw: f64, cost: f64) -> Self {
        Self {
            bus,
            p_min_mw: 0.0,
            p_max_mw,
            marginal_cost_gbp_mwh: MarginalCost::Fixed(cost),
            fuel,
            profile_driven: matches!(fuel, Fuel::Wind | Fuel::Pv),
        }
    }

    /// Boundary unit that imports or exports up to `rating_mw` at the MIP.
    pub fn grid(bus: u32, rating_mw: f64) -> Self {
        Self {
            bus,
            p_min_mw: -rating_mw,
            p_max_mw: rating_mw,
            marginal_cost_gbp_mwh: MarginalCost::GridPriced,
            fuel: Fuel::Grid,
            profile_driven: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub bus: u32,
    pub p_peak_mw: f64,
    pub power_factor: f64,
}

impl Load {
    /// Reactive demand per MW drawn, lagging.
    pub fn q_per_p(&self) -> f64 {
        let pf = self.power_factor;
        (1.0 - pf * pf).max(0.0).sqrt() / pf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Element {
    Network,
    Bus(u32),
    Branch(usize),
    Generator(usize),
    Load(usize),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Network => write!(f, "network"),
            Self::Bus(id) => write!(f, "bus {id}"),
            Self::Branch(k) => write!(f, "branch {k}"),
            Self::Generator(g) => write!(f, "generator {g}"),
            Self::Load(l) => write!(f, "load {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub element: Element,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return write!(f, "pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("disconnected: the network has no branches")]
    Disconnected,
    #[error("branch {branch} has zero impedance")]
    ZeroImpedance { branch: usize },
    #[error("unknown bus {0}")]
    UnknownBus(u32),
    #[error("reading network file {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing network JSON")]
    Json(#[from] serde_json::Error),
}

impl Network {
    pub fn from_json_str(s: &str) -> Result<Self, NetError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_index_map(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.role == BusRole::Slack)
    }

    pub fn mw_to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    pub fn pu_to_mw(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    /// Bus indices grouped by voltage level, in bus order.
    pub fn buses_by_level(&self) -> BTreeMap<VoltageLevel, Vec<usize>> {
        let mut out: BTreeMap<VoltageLevel, Vec<usize>> = BTreeMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            out.entry(b.voltage_level).or_default().push(i);
        }
        out
    }

    /// Bus indices cut off from the slack when branch `k` is removed. Empty
    /// when `k` lies on a loop.
    pub fn downstream_of(&self, k: usize) -> Vec<usize> {
        let idx = self.bus_index_map();
        let seen = self.reachable_from_slack(&idx, Some(k));
        (0..self.buses.len()).filter(|&i| !seen[i]).collect()
    }

    fn reachable_from_slack(&self, idx: &HashMap<u32, usize>, skip: Option<usize>) -> Vec<bool> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for (k, br) in self.branches.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            if let (Some(&f), Some(&t)) = (idx.get(&br.from_bus), idx.get(&br.to_bus)) {
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        let mut seen = vec![false; n];
        if let Some(s) = self.slack_index() {
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        seen
    }

    /// Checks every structural invariant. Pure: repeated calls return equal
    /// reports.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let mut push = |element, message: String| v.push(Violation { element, message });

        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            push(Element::Network, format!("base_mva {} must be positive", self.base_mva));
        }

        let mut idx: HashMap<u32, usize> = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if idx.insert(b.id, i).is_some() {
                push(Element::Bus(b.id), format!("duplicate bus id {}", b.id));
            }
        }
        let slack_count = self.buses.iter().filter(|b| b.role == BusRole::Slack).count();
        if slack_count != 1 {
            push(Element::Network, format!("slack count {slack_count} ≠ 1"));
        }

        for (k, br) in self.branches.iter().enumerate() {
            for end in [br.from_bus, br.to_bus] {
                if !idx.contains_key(&end) {
                    push(Element::Branch(k), format!("unknown bus {end}"));
                }
            }
            if br.from_bus == br.to_bus {
                push(Element::Branch(k), "branch connects a bus to itself".into());
            }
            if br.x == 0.0 || !br.x.is_finite() {
                push(Element::Branch(k), format!("reactance x = {} must be non-zero", br.x));
            }
            if !(br.r >= 0.0 && br.r.is_finite()) {
                push(Element::Branch(k), format!("resistance r = {} must be ≥ 0", br.r));
            }
            if !(br.tap > 0.0 && br.tap.is_finite()) {
                push(Element::Branch(k), format!("tap {} must be positive", br.tap));
            }
            if !br.b_shunt.is_finite() {
                push(Element::Branch(k), "line charging must be finite".into());
            }
            if !(br.forward_limit_mw > 0.0) || !(br.reverse_limit_mw > 0.0) {
                push(Element::Branch(k), "flow limits must be > 0".into());
            }
            if br.forward_limit_mw != br.reverse_limit_mw && !br.is_transformer {
                push(
                    Element::Branch(k),
                    "asymmetric flow limits are only allowed on transformers".into(),
                );
            }
        }

        let mut non_grid_pmax = 0.0;
        for (g, gen) in self.generators.iter().enumerate() {
            if !idx.contains_key(&gen.bus) {
                push(Element::Generator(g), format!("unknown bus {}", gen.bus));
            }
            if !(gen.p_min_mw <= gen.p_max_mw) {
                push(
                    Element::Generator(g),
                    format!("p_min {} exceeds p_max {}", gen.p_min_mw, gen.p_max_mw),
                );
            }
            if gen.p_min_mw < 0.0 && gen.fuel != Fuel::Grid {
                push(
                    Element::Generator(g),
                    "only grid units may have negative p_min".into(),
                );
            }
            if matches!(gen.fuel, Fuel::Wind | Fuel::Pv) && !gen.profile_driven {
                push(
                    Element::Generator(g),
                    format!("{} units must be profile driven", gen.fuel.as_str()),
                );
            }
            let grid_priced = gen.marginal_cost_gbp_mwh == MarginalCost::GridPriced;
            if (gen.fuel == Fuel::Grid) != grid_priced {
                push(
                    Element::Generator(g),
                    "grid units and only grid units are grid-priced".into(),
                );
            }
            if let MarginalCost::Fixed(c) = gen.marginal_cost_gbp_mwh {
                if !c.is_finite() {
                    push(Element::Generator(g), "marginal cost must be finite".into());
                }
            }
            if gen.fuel != Fuel::Grid {
                non_grid_pmax += gen.p_max_mw;
            }
        }

        let mut peak = 0.0;
        for (l, load) in self.loads.iter().enumerate() {
            if !idx.contains_key(&load.bus) {
                push(Element::Load(l), format!("unknown bus {}", load.bus));
            }
            if !(load.p_peak_mw >= 0.0) {
                push(Element::Load(l), format!("p_peak {} must be ≥ 0", load.p_peak_mw));
            }
            if !(load.power_factor > 0.0 && load.power_factor <= 1.0) {
                push(
                    Element::Load(l),
                    format!("power factor {} outside (0, 1]", load.power_factor),
                );
            }
            peak += load.p_peak_mw;
        }
        if !(non_grid_pmax.is_finite() && non_grid_pmax > 0.0) {
            push(
                Element::Network,
                "total non-grid generation capacity must be finite and positive".into(),
            );
        }
        if !(peak.is_finite() && peak > 0.0) {
            push(Element::Network, "total peak demand must be finite and positive".into());
        }

        if slack_count == 1 {
            let seen = self.reachable_from_slack(&idx, None);
            for (i, b) in self.buses.iter().enumerate() {
                if !seen[i] {
                    push(Element::Bus(b.id), format!("bus {} is not reachable from the slack", b.id));
                }
            }
        }

        ValidationReport { violations: v }
    }

    /// Copy with every branch resistance set to zero.
    pub fn lossless(&self) -> Self {
        let mut net = self.clone();
        for br in &mut net.branches {
            br.r = 0.0;
        }
        net
    }

    /// Copy with every branch flow limit removed.
    pub fn unconstrained(&self) -> Self {
        let mut net = self.clone();
        for br in &mut net.branches {
            br.forward_limit_mw = f64::INFINITY;
            br.reverse_limit_mw = f64::INFINITY;
        }
        net
    }

    pub fn ensure_valid(&self) -> Result<(), NetError> {
        let report = self.validate();
        if report.is_pass() {
            Ok(())
        } else {
            Err(NetError::Invalid(report))
        }
    }
}

/// Dense complex nodal admittance matrix in per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNodalMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexNodalMatrix<T> {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + v;
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Two-port admittances `(y_ff, y_ft, y_tf, y_tt)` of a branch, with the
/// off-nominal tap on the from side.
pub fn branch_admittance<T: Scalar>(br: &Branch) -> (Complex<T>, Complex<T>, Complex<T>, Complex<T>) {
    let z = Complex::new(T::of(br.r), T::of(br.x));
    let ys = Complex::new(T::one(), T::zero()) / z;
    let half_b = Complex::new(T::zero(), T::of(br.b_shunt * 0.5));
    let tap = T::of(br.tap);
    let y_tt = ys + half_b;
    let y_ff = y_tt / (tap * tap);
    let y_ft = -ys / tap;
    (y_ff, y_ft, y_ft, y_tt)
}

/// Assembles the nodal admittance matrix in bus order.
pub fn build_admittance<T: Scalar>(net: &Network) -> Result<ComplexNodalMatrix<T>, NetError> {
    if net.branches.is_empty() {
        return Err(NetError::Disconnected);
    }
    let idx = net.bus_index_map();
    let mut y = ComplexNodalMatrix::zeros(net.buses.len());
    for (k, br) in net.branches.iter().enumerate() {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(NetError::ZeroImpedance { branch: k });
        }
        let f = *idx.get(&br.from_bus).ok_or(NetError::UnknownBus(br.from_bus))?;
        let t = *idx.get(&br.to_bus).ok_or(NetError::UnknownBus(br.to_bus))?;
        let (y_ff, y_ft, y_tf, y_tt) = branch_admittance::<T>(br);
        y.add(f, f, y_ff);
        y.add(f, t, y_ft);
        y.add(t, f, y_tf);
        y.add(t, t, y_tt);
    }
    Ok(y)
}

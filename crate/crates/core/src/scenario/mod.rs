//! Scenario files, the reference case study, and CSV output.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! [behavior]
//! gamma = 0.5
//!
//! [network]
//! complete = true          # or: edges = [["t1", "s1"], ["t2", "s1"]]
//!
//! [[targets]]
//! id = "t1"
//! loss = 12.0
//! attack = { family = "exponential", baseline = 1.0 }
//! demand_lower = 0.0       # optional, default 0
//! demand_upper = inf       # optional, default inf
//!
//! [[sources]]
//! id = "s1"
//! supply_upper = 10.0
//! supply_lower = 0.0       # optional, default 0
//! tau = 0.25               # optional, default 0
//! utility_slope = 1.0      # optional, default 1
//! utility_slopes = { t1 = 2.0 }   # optional per-target overrides
//!
//! [solver]
//! mode = "op_b"            # op_a | op_b
//! [solver.centralized]     # optional overrides
//! [solver.admm]            # optional overrides
//! ```

mod csv;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::admm::AdmmConfig;
use crate::centralized::{ProblemMode, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{
    AttackProbabilityModel, BehavioralModel, Edge, LinearUtility, SourceSpec, TargetSpec, TransportNetwork,
};

pub use csv::{
    read_sweep_csv, write_sweep_csv, write_trace_csv, write_trace_records, SweepAxis, SweepResult, SweepSample,
};

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub network: TransportNetwork,
    pub behavior: BehavioralModel,
    pub mode: ProblemMode,
    pub centralized: SolverConfig,
    pub admm: AdmmConfig,
}

impl ScenarioFile {
    pub fn new(network: TransportNetwork, behavior: BehavioralModel) -> Self {
        Self {
            network,
            behavior,
            mode: ProblemMode::OpB,
            centralized: SolverConfig::default(),
            admm: AdmmConfig::default(),
        }
    }
}

/// The reference two-source, five-target network.
///
/// Every edge exists, attack probabilities are `e^{-t-1}`, utility slopes are
/// 1, `τ = 0.25`, targets are uncapped and `γ = 0.5`.
pub fn build_case_study() -> (TransportNetwork, BehavioralModel) {
    let model = AttackProbabilityModel::Exponential { baseline: 1.0 };
    let targets = [12.0, 9.0, 5.0, 3.0, 2.0]
        .iter()
        .enumerate()
        .map(|(i, &u)| TargetSpec::new(format!("t{}", i + 1), u, model))
        .collect();
    let sources = [10.0, 4.0]
        .iter()
        .enumerate()
        .map(|(i, &q)| SourceSpec::new(format!("s{}", i + 1), q).with_tau(0.25))
        .collect();
    let network = TransportNetwork::complete(targets, sources).expect("case study is a valid network");
    (network, BehavioralModel::new(0.5).expect("0.5 is a valid gamma"))
}

pub fn case_study_scenario() -> ScenarioFile {
    let (network, behavior) = build_case_study();
    ScenarioFile::new(network, behavior)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

/// Parses and validates a scenario, reporting every semantic violation with
/// its line number.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| format!("line {}: ", line_of(text, s.start)))
            .unwrap_or_default();
        Error::Parse(vec![format!("{at}{}", e.message().trim_end())])
    })?;
    Checker {
        text,
        diags: Vec::new(),
    }
    .scenario(raw)
}

/// Canonical TOML form; `parse_scenario(&to_toml(s))` reproduces `s`.
pub fn to_toml(scenario: &ScenarioFile) -> String {
    let net = &scenario.network;
    let mut out = String::new();
    let _ = writeln!(out, "[behavior]\ngamma = {}\n", num(scenario.behavior.gamma()));

    out.push_str("[network]\n");
    if net.is_complete() {
        out.push_str("complete = true\n");
    } else {
        out.push_str("edges = [\n");
        for e in net.edges() {
            let _ = writeln!(
                out,
                "    [{}, {}],",
                quote(&net.targets()[e.target].id),
                quote(&net.sources()[e.source].id)
            );
        }
        out.push_str("]\n");
    }

    for t in net.targets() {
        let (family, baseline) = match t.prob_model {
            AttackProbabilityModel::Exponential { baseline } => ("exponential", baseline),
            AttackProbabilityModel::Reciprocal { baseline } => ("reciprocal", baseline),
        };
        let _ = writeln!(
            out,
            "\n[[targets]]\nid = {}\nloss = {}",
            quote(&t.id),
            num(t.loss_value)
        );
        let _ = writeln!(
            out,
            "attack = {{ family = \"{family}\", baseline = {} }}",
            num(baseline)
        );
        let _ = writeln!(
            out,
            "demand_lower = {}\ndemand_upper = {}",
            num(t.demand_lower),
            num(t.demand_upper)
        );
    }

    for s in net.sources() {
        let _ = writeln!(out, "\n[[sources]]\nid = {}", quote(&s.id));
        let _ = writeln!(
            out,
            "supply_lower = {}\nsupply_upper = {}",
            num(s.supply_lower),
            num(s.supply_upper)
        );
        let _ = writeln!(
            out,
            "tau = {}\nutility_slope = {}",
            num(s.weight_tau),
            num(s.utility.default_slope)
        );
        if !s.utility.per_target.is_empty() {
            let pairs: Vec<String> = s
                .utility
                .per_target
                .iter()
                .map(|(k, v)| format!("{} = {}", quote(k), num(*v)))
                .collect();
            let _ = writeln!(out, "utility_slopes = {{ {} }}", pairs.join(", "));
        }
    }

    let mode = match scenario.mode {
        ProblemMode::OpA => "op_a",
        ProblemMode::OpB => "op_b",
    };
    let c = &scenario.centralized;
    let a = &scenario.admm;
    let _ = writeln!(out, "\n[solver]\nmode = \"{mode}\"");
    let _ = writeln!(
        out,
        "\n[solver.centralized]\nstep_size = {}\nmax_iterations = {}\ngradient_tolerance = {}\nobjective_tolerance = {}",
        num(c.step_size),
        c.max_iterations,
        num(c.gradient_tolerance),
        num(c.objective_tolerance)
    );
    let _ = writeln!(
        out,
        "\n[solver.admm]\neta = {}\nmax_iterations = {}\nprimal_tolerance = {}\ndual_tolerance = {}",
        num(a.eta),
        a.max_iterations,
        num(a.primal_tolerance),
        num(a.dual_tolerance)
    );
    out
}

// Debug formatting of f64 is the shortest exact representation and always a
// valid TOML float (`12.0`, `1e-7`, `inf`).
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

fn line_of(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

/// A TOML integer or float.
#[derive(Debug, Clone, Copy)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    behavior: RawBehavior,
    network: Spanned<RawNetwork>,
    targets: Spanned<Vec<Spanned<RawTarget>>>,
    sources: Spanned<Vec<Spanned<RawSource>>>,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBehavior {
    gamma: Spanned<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    complete: Option<bool>,
    edges: Option<Vec<Spanned<(String, String)>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    id: Spanned<String>,
    loss: Spanned<Num>,
    attack: Spanned<RawAttack>,
    demand_lower: Option<Spanned<Num>>,
    demand_upper: Option<Spanned<Num>>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum Family {
    Exponential,
    Reciprocal,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    family: Family,
    baseline: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    id: Spanned<String>,
    supply_upper: Spanned<Num>,
    supply_lower: Option<Spanned<Num>>,
    tau: Option<Spanned<Num>>,
    utility_slope: Option<Spanned<Num>>,
    #[serde(default)]
    utility_slopes: BTreeMap<String, Spanned<Num>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    mode: Option<RawMode>,
    centralized: Option<Spanned<RawCentralized>>,
    admm: Option<Spanned<RawAdmm>>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    OpA,
    OpB,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCentralized {
    step_size: Option<Num>,
    max_iterations: Option<usize>,
    gradient_tolerance: Option<Num>,
    objective_tolerance: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmm {
    eta: Option<Num>,
    max_iterations: Option<usize>,
    primal_tolerance: Option<Num>,
    dual_tolerance: Option<Num>,
}

struct Checker<'a> {
    text: &'a str,
    diags: Vec<String>,
}

impl Checker<'_> {
    fn report(&mut self, span: Range<usize>, msg: impl std::fmt::Display) {
        let line = line_of(self.text, span.start);
        self.diags.push(format!("line {line}: {msg}"));
    }

    /// Reads an optional number, reporting it unless `ok` holds.
    fn field(
        &mut self,
        value: Option<&Spanned<Num>>,
        default: f64,
        name: &str,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> f64 {
        let Some(v) = value else { return default };
        let x = v.get_ref().0;
        if !ok(x) {
            self.report(v.span(), format!("{name} = {x} is outside {range}"));
        }
        x
    }

    fn scenario(mut self, raw: RawScenario) -> Result<ScenarioFile> {
        let gamma = self.field(
            Some(&raw.behavior.gamma),
            1.0,
            "behavior.gamma",
            |g| g > 0.0 && g <= 1.0,
            "(0, 1]",
        );

        let target_span = raw.targets.span();
        let targets: Vec<(TargetSpec, Range<usize>)> = raw
            .targets
            .into_inner()
            .into_iter()
            .map(|t| {
                let span = t.span();
                (self.target(t.into_inner()), span)
            })
            .collect();
        let source_span = raw.sources.span();
        let sources: Vec<(SourceSpec, Range<usize>)> = raw
            .sources
            .into_inner()
            .into_iter()
            .map(|s| {
                let span = s.span();
                (self.source(s.into_inner()), span)
            })
            .collect();
        if targets.is_empty() {
            self.report(target_span, "at least one target is required");
        }
        if sources.is_empty() {
            self.report(source_span, "at least one source is required");
        }
        let target_ids = self.index(targets.iter().map(|(t, s)| (t.id.as_str(), s.clone())), "target");
        let source_ids = self.index(sources.iter().map(|(t, s)| (t.id.as_str(), s.clone())), "source");

        for (s, span) in &sources {
            for key in s.utility.per_target.keys() {
                if !target_ids.contains_key(key.as_str()) {
                    self.report(
                        span.clone(),
                        format!("source {}: utility slope for undeclared target {key}", s.id),
                    );
                }
            }
        }

        let edges = self.edges(raw.network, &target_ids, &source_ids);
        let mut touched_t = BTreeSet::new();
        let mut touched_s = BTreeSet::new();
        for e in &edges {
            touched_t.insert(e.target);
            touched_s.insert(e.source);
        }
        if !edges.is_empty() {
            for (x, (t, span)) in targets.iter().enumerate() {
                if !touched_t.contains(&x) {
                    self.report(span.clone(), format!("target {} has no incident edge", t.id));
                }
            }
            for (y, (s, span)) in sources.iter().enumerate() {
                if !touched_s.contains(&y) {
                    self.report(span.clone(), format!("source {} has no incident edge", s.id));
                }
            }
        }

        let mode = match raw.solver.mode {
            Some(RawMode::OpA) => ProblemMode::OpA,
            Some(RawMode::OpB) | None => ProblemMode::OpB,
        };
        let centralized = raw.solver.centralized.map_or(SolverConfig::default(), |c| {
            let span = c.span();
            let c = c.into_inner();
            let d = SolverConfig::default();
            let cfg = SolverConfig {
                step_size: c.step_size.map_or(d.step_size, |v| v.0),
                max_iterations: c.max_iterations.unwrap_or(d.max_iterations),
                gradient_tolerance: c.gradient_tolerance.map_or(d.gradient_tolerance, |v| v.0),
                objective_tolerance: c.objective_tolerance.map_or(d.objective_tolerance, |v| v.0),
            };
            if cfg.validate().is_err() {
                self.report(span, "solver.centralized: values must be positive and finite");
            }
            cfg
        });
        let admm = raw.solver.admm.map_or(AdmmConfig::default(), |a| {
            let span = a.span();
            let a = a.into_inner();
            let d = AdmmConfig::default();
            let cfg = AdmmConfig {
                eta: a.eta.map_or(d.eta, |v| v.0),
                max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
                primal_tolerance: a.primal_tolerance.map_or(d.primal_tolerance, |v| v.0),
                dual_tolerance: a.dual_tolerance.map_or(d.dual_tolerance, |v| v.0),
            };
            if cfg.validate().is_err() {
                self.report(span, "solver.admm: values must be positive and finite");
            }
            cfg
        });

        if !self.diags.is_empty() {
            return Err(Error::Parse(self.diags));
        }
        let network = TransportNetwork::new(
            targets.into_iter().map(|(t, _)| t).collect(),
            sources.into_iter().map(|(s, _)| s).collect(),
            edges,
        )
        .map_err(|e| Error::Parse(vec![e.to_string()]))?;
        let behavior = BehavioralModel::new(gamma).map_err(|e| Error::Parse(vec![e.to_string()]))?;
        Ok(ScenarioFile {
            network,
            behavior,
            mode,
            centralized,
            admm,
        })
    }

    fn target(&mut self, t: RawTarget) -> TargetSpec {
        let id = t.id.get_ref().clone();
        let loss = self.field(
            Some(&t.loss),
            1.0,
            &format!("target {id}: loss"),
            |u| u > 0.0 && u.is_finite(),
            "(0, inf)",
        );
        let baseline = t.attack.get_ref().baseline.0;
        let prob_model = match t.attack.get_ref().family {
            Family::Exponential => AttackProbabilityModel::Exponential { baseline },
            Family::Reciprocal => AttackProbabilityModel::Reciprocal { baseline },
        };
        if let Err(e) = prob_model.validate() {
            self.report(t.attack.span(), format!("target {id}: attack: {e}"));
        }
        let lower = self.field(
            t.demand_lower.as_ref(),
            0.0,
            &format!("target {id}: demand_lower"),
            |v| v >= 0.0 && v.is_finite(),
            "[0, inf)",
        );
        let upper = self.field(
            t.demand_upper.as_ref(),
            f64::INFINITY,
            &format!("target {id}: demand_upper"),
            |v| v > 0.0,
            "(0, inf]",
        );
        if lower > upper {
            let span = t.demand_lower.map_or(t.id.span(), |s| s.span());
            self.report(
                span,
                format!("target {id}: demand_lower {lower} exceeds demand_upper {upper}"),
            );
        }
        TargetSpec::new(id, loss, prob_model).with_demand(lower, upper)
    }

    fn source(&mut self, s: RawSource) -> SourceSpec {
        let id = s.id.get_ref().clone();
        let upper = self.field(
            Some(&s.supply_upper),
            1.0,
            &format!("source {id}: supply_upper"),
            |v| v > 0.0 && v.is_finite(),
            "(0, inf)",
        );
        let lower = self.field(
            s.supply_lower.as_ref(),
            0.0,
            &format!("source {id}: supply_lower"),
            |v| v >= 0.0 && v.is_finite(),
            "[0, inf)",
        );
        if lower > upper {
            self.report(
                s.supply_lower.as_ref().map_or(s.id.span(), |v| v.span()),
                format!("source {id}: supply_lower {lower} exceeds supply_upper {upper}"),
            );
        }
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let tau = self.field(
            s.tau.as_ref(),
            0.0,
            &format!("source {id}: tau"),
            finite_nonneg,
            "[0, inf)",
        );
        let slope = self.field(
            s.utility_slope.as_ref(),
            1.0,
            &format!("source {id}: utility_slope"),
            f64::is_finite,
            "finite values",
        );
        let mut per_target = BTreeMap::new();
        for (k, v) in &s.utility_slopes {
            let c = self.field(
                Some(v),
                1.0,
                &format!("source {id}: utility_slopes.{k}"),
                f64::is_finite,
                "finite values",
            );
            per_target.insert(k.clone(), c);
        }
        let mut spec = SourceSpec::new(id, upper).with_tau(tau).with_supply_lower(lower);
        spec.utility = LinearUtility {
            default_slope: slope,
            per_target,
        };
        spec
    }

    fn index<'n>(
        &mut self,
        ids: impl Iterator<Item = (&'n str, Range<usize>)>,
        kind: &str,
    ) -> BTreeMap<&'n str, usize> {
        let mut map = BTreeMap::new();
        for (i, (id, span)) in ids.enumerate() {
            if map.insert(id, i).is_some() {
                self.report(span, format!("duplicate {kind} id {id}"));
            }
        }
        map
    }

    fn edges(
        &mut self,
        network: Spanned<RawNetwork>,
        targets: &BTreeMap<&str, usize>,
        sources: &BTreeMap<&str, usize>,
    ) -> Vec<Edge> {
        let span = network.span();
        let network = network.into_inner();
        match (network.complete, network.edges) {
            (Some(true), None) => {
                let (n, m) = (targets.len(), sources.len());
                (0..n)
                    .flat_map(|x| (0..m).map(move |y| Edge { target: x, source: y }))
                    .collect()
            }
            (Some(true), Some(_)) => {
                self.report(span, "network: give either complete = true or an edge list, not both");
                Vec::new()
            }
            (_, None) => {
                self.report(span, "network: an edge list is required unless complete = true");
                Vec::new()
            }
            (_, Some(list)) => {
                let mut seen = BTreeSet::new();
                let mut edges = Vec::new();
                for item in list {
                    let span = item.span();
                    let (t, s) = item.into_inner();
                    let x = targets.get(t.as_str()).copied();
                    let y = sources.get(s.as_str()).copied();
                    if x.is_none() {
                        self.report(
                            span.clone(),
                            format!("edge ({t}, {s}) references undeclared target {t}"),
                        );
                    }
                    if y.is_none() {
                        self.report(
                            span.clone(),
                            format!("edge ({t}, {s}) references undeclared source {s}"),
                        );
                    }
                    if let (Some(x), Some(y)) = (x, y) {
                        let e = Edge { target: x, source: y };
                        if seen.insert(e) {
                            edges.push(e);
                        } else {
                            self.report(span, format!("duplicate edge ({t}, {s})"));
                        }
                    }
                }
                if edges.is_empty() && self.diags.is_empty() {
                    self.report(span, "network: edge list is empty");
                }
                edges
            }
        }
    }
}

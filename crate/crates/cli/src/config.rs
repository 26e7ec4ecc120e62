//! Experiment configuration: JSON schema, validation, and resolution into
//! core types.
//!
//! A config names one experiment, the discipline(s) and service law(s) it
//! runs, and either a direct arrival rate (`lambda`) or a heavy-traffic
//! operating point (`scaling` with `r` or `r_list` and `beta`). The seed is
//! mandatory: there is no wall-clock fallback, so every run is reproducible
//! from its config file alone.

use serde::Deserialize;
use std::fmt;
use std::path::PathBuf;
use symq_core::disciplines::{validate_table, Discipline, Extension};
use symq_core::rbm::RbmParams;
use symq_core::scaling::TimeScaling;
use symq_core::service_dist::ServiceDistribution;

/// Problems found while validating a config; field-level, human-readable.
#[derive(Debug, Default)]
pub struct ConfigReport {
    pub problems: Vec<String>,
}

impl ConfigReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.problems.push(msg.into());
    }
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, p) in self.problems.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "config error: {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Stationary law: geometric check at a fixed load, or the scaled law
    /// against the unit exponential over an `r_list`.
    Stationary,
    /// Stationary pmfs across service laws with equal means.
    Insensitivity,
    /// Fixed-time marginal pmfs across disciplines (plus optional two-time
    /// joint samples when `t2` is set).
    TransientMarginal,
    /// Rescaled sample paths, time compressed by `r^2`.
    DiffusionScale,
    /// Rescaled sample paths, time compressed by `c_r`.
    HeavyTailScale,
    /// Queue length against converted workload at a fixed rescaled time.
    Collapse,
    /// Rescaled queue marginal against the reflected-Brownian transition
    /// law.
    RbmCompare,
    /// Busy-cycle maximum tail curve.
    CycleTails,
    /// Monte Carlo RBM marginal against its own closed-form CDF.
    RbmSelftest,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Insensitivity => "insensitivity",
            ExperimentKind::TransientMarginal => "transient-marginal",
            ExperimentKind::DiffusionScale => "diffusion-scale",
            ExperimentKind::HeavyTailScale => "heavy-tail-scale",
            ExperimentKind::Collapse => "collapse",
            ExperimentKind::RbmCompare => "rbm-compare",
            ExperimentKind::CycleTails => "cycle-tails",
            ExperimentKind::RbmSelftest => "rbm-selftest",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DisciplineSpec {
    Ps,
    Lcfs,
    Table {
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        extension: Option<ExtensionSpec>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionSpec {
    Repeat,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceSpec {
    Exponential {
        mean: f64,
    },
    Deterministic {
        mean: f64,
    },
    Hyperexp {
        probs: Vec<f64>,
        means: Vec<f64>,
        #[serde(default)]
        mean: Option<f64>,
    },
    Erlang {
        stages: usize,
        mean: f64,
    },
    Pareto {
        alpha: f64,
        #[serde(default)]
        xmin: Option<f64>,
        #[serde(default)]
        mean: Option<f64>,
    },
    Paretolog {
        alpha: f64,
        #[serde(default)]
        xmin: Option<f64>,
        #[serde(default)]
        mean: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeSpec {
    Diffusion,
    HeavyTail,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub r_list: Option<Vec<f64>>,
    pub beta: f64,
    #[serde(default)]
    pub regime: Option<RegimeSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbmSpec {
    pub mu: f64,
    pub sigma2: f64,
}

/// The raw JSON schema. Unknown fields are rejected so typos surface
/// instead of silently defaulting.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub discipline: Option<DisciplineSpec>,
    #[serde(default)]
    pub disciplines: Option<Vec<DisciplineSpec>>,
    /// Duplicate the first discipline as an independent control arm.
    #[serde(default)]
    pub control: Option<bool>,
    #[serde(default)]
    pub service: Option<ServiceSpec>,
    #[serde(default)]
    pub services: Option<Vec<ServiceSpec>>,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub t2: Option<f64>,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub cycles: Option<usize>,
    #[serde(default)]
    pub replications: Option<usize>,
    /// Stationary observations drawn per arm for pmf comparison tests.
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub substeps: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub x_max: Option<usize>,
    #[serde(default)]
    pub rbm: Option<RbmSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub event_log: Option<bool>,
}

/// How the arrival rate is specified.
#[derive(Debug, Clone)]
pub enum Load {
    Lambda(f64),
    Scaling {
        r_list: Vec<f64>,
        beta: f64,
        regime: TimeScaling,
    },
}

/// A validated, fully typed experiment ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    pub disciplines: Vec<(String, Discipline)>,
    pub services: Vec<(String, ServiceDistribution)>,
    pub load: Load,
    pub t: f64,
    pub t2: Option<f64>,
    pub grid_step: f64,
    pub cycles: usize,
    pub replications: usize,
    pub draws: usize,
    pub paths: usize,
    pub substeps: usize,
    pub k_max: usize,
    pub x_max: Option<usize>,
    pub rbm: Option<RbmParams>,
    pub seed: u64,
    pub out: PathBuf,
    pub event_log: bool,
    /// The config as it will be embedded in every output header: original
    /// JSON with the resolved seed and without the output path.
    pub embedded: serde_json::Value,
}

impl Resolved {
    pub fn service(&self) -> &ServiceDistribution {
        &self.services[0].1
    }

    pub fn discipline(&self) -> &Discipline {
        &self.disciplines[0].1
    }
}

fn build_discipline(spec: &DisciplineSpec, report: &mut ConfigReport) -> Option<Discipline> {
    match spec {
        DisciplineSpec::Ps => Some(Discipline::ps()),
        DisciplineSpec::Lcfs => Some(Discipline::lcfs()),
        DisciplineSpec::Table { rows, extension } => {
            let raw = validate_table(rows);
            if !raw.is_ok() {
                report.push(format!("invalid discipline table: {raw}"));
                return None;
            }
            let ext = match extension.unwrap_or(ExtensionSpec::Repeat) {
                ExtensionSpec::Repeat => Extension::RepeatLastRow,
                ExtensionSpec::Uniform => Extension::Uniform,
            };
            match Discipline::table(rows.clone(), ext) {
                Ok(d) => Some(d),
                Err(e) => {
                    report.push(format!("invalid discipline table: {e}"));
                    None
                }
            }
        }
    }
}

fn build_service(spec: &ServiceSpec, report: &mut ConfigReport) -> Option<ServiceDistribution> {
    let built = match spec {
        ServiceSpec::Exponential { mean } => ServiceDistribution::exponential(*mean),
        ServiceSpec::Deterministic { mean } => ServiceDistribution::deterministic(*mean),
        ServiceSpec::Hyperexp { probs, means, mean } => match mean {
            Some(m) => ServiceDistribution::hyper_exp_with_mean(probs.clone(), means.clone(), *m),
            None => ServiceDistribution::hyper_exp(probs.clone(), means.clone()),
        },
        ServiceSpec::Erlang { stages, mean } => ServiceDistribution::erlang(*stages, *mean),
        ServiceSpec::Pareto { alpha, xmin, mean } => match (xmin, mean) {
            (Some(x), None) => ServiceDistribution::pareto(*alpha, *x),
            (None, Some(m)) => ServiceDistribution::pareto_from_mean(*alpha, *m),
            _ => {
                report.push("pareto needs exactly one of xmin or mean".to_string());
                return None;
            }
        },
        ServiceSpec::Paretolog { alpha, xmin, mean } => match (xmin, mean) {
            (Some(x), None) => ServiceDistribution::pareto_log(*alpha, *x),
            (None, Some(m)) => ServiceDistribution::pareto_log_from_mean(*alpha, *m),
            _ => {
                report.push("paretolog needs exactly one of xmin or mean".to_string());
                return None;
            }
        },
    };
    match built {
        Ok(s) => Some(s),
        Err(e) => {
            report.push(format!("invalid service distribution: {e}"));
            None
        }
    }
}

/// Labels arms, making duplicates unambiguous.
fn label_arms<T>(items: Vec<(String, T)>) -> Vec<(String, T)> {
    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    items
        .into_iter()
        .map(|(base, item)| {
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            let label = if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            };
            (label, item)
        })
        .collect()
}

/// Validates `raw` and resolves it into typed form. `seed_override` comes
/// from `--seed`; the seed must arrive from one of the two places.
pub fn resolve(
    raw: &RawConfig,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<Resolved, ConfigReport> {
    let mut report = ConfigReport::default();
    let kind = raw.experiment;

    let seed = match seed_override.or(raw.seed) {
        Some(s) => s,
        None => {
            report.push("seed required (set \"seed\" in the config or pass --seed)");
            0
        }
    };

    // Disciplines.
    let mut disciplines: Vec<(String, Discipline)> = Vec::new();
    if let Some(list) = &raw.disciplines {
        for spec in list {
            if let Some(d) = build_discipline(spec, &mut report) {
                disciplines.push((d.label(), d));
            }
        }
    }
    if let Some(spec) = &raw.discipline {
        if raw.disciplines.is_some() {
            report.push("give either \"discipline\" or \"disciplines\", not both");
        } else if let Some(d) = build_discipline(spec, &mut report) {
            disciplines.push((d.label(), d));
        }
    }
    if raw.control.unwrap_or(false) {
        if let Some((label, d)) = disciplines.first().cloned() {
            disciplines.push((format!("{label}-control"), d));
        }
    }
    let disciplines = label_arms(disciplines);

    // Services.
    let mut services: Vec<(String, ServiceDistribution)> = Vec::new();
    if let Some(list) = &raw.services {
        for spec in list {
            if let Some(s) = build_service(spec, &mut report) {
                services.push((s.label(), s));
            }
        }
    }
    if let Some(spec) = &raw.service {
        if raw.services.is_some() {
            report.push("give either \"service\" or \"services\", not both");
        } else if let Some(s) = build_service(spec, &mut report) {
            services.push((s.label(), s));
        }
    }
    let services = label_arms(services);

    // Load specification.
    let load = match (&raw.scaling, raw.lambda) {
        (Some(_), Some(_)) => {
            report.push("give exactly one of \"scaling\" or \"lambda\", not both");
            None
        }
        (Some(sc), None) => {
            let r_list = match (&sc.r, &sc.r_list) {
                (Some(r), None) => vec![*r],
                (None, Some(list)) if !list.is_empty() => list.clone(),
                (Some(_), Some(_)) => {
                    report.push("scaling takes either \"r\" or \"r_list\", not both");
                    vec![]
                }
                _ => {
                    report.push("scaling needs \"r\" or a nonempty \"r_list\"");
                    vec![]
                }
            };
            for &r in &r_list {
                if !(r > 0.0) {
                    report.push(format!("scaling r must be positive, got {r}"));
                }
            }
            let regime = match sc.regime.unwrap_or(match kind {
                ExperimentKind::HeavyTailScale => RegimeSpec::HeavyTail,
                _ => RegimeSpec::Diffusion,
            }) {
                RegimeSpec::Diffusion => TimeScaling::Diffusion,
                RegimeSpec::HeavyTail => TimeScaling::HeavyTail,
            };
            Some(Load::Scaling {
                r_list,
                beta: sc.beta,
                regime,
            })
        }
        (None, Some(l)) => {
            if !(l > 0.0) {
                report.push(format!("lambda must be positive, got {l}"));
            }
            Some(Load::Lambda(l))
        }
        (None, None) => {
            if kind != ExperimentKind::RbmSelftest {
                report.push("give exactly one of \"scaling\" or \"lambda\"");
            }
            // The RBM self-test can run from explicit rbm parameters alone.
            Some(Load::Lambda(f64::NAN))
        }
    };

    // Per-experiment requirements.
    let needs_service = !matches!(kind, ExperimentKind::RbmSelftest) || raw.rbm.is_none();
    if services.is_empty() && needs_service {
        report.push("a \"service\" (or \"services\") block is required");
    }
    let needs_discipline = !matches!(kind, ExperimentKind::RbmSelftest);
    if disciplines.is_empty() && needs_discipline {
        report.push("a \"discipline\" (or \"disciplines\") block is required");
    }

    match kind {
        ExperimentKind::TransientMarginal => {
            if disciplines.len() < 2 {
                report.push(
                    "transient-marginal compares disciplines: list at least two \
                     (or set \"control\": true)",
                );
            }
            if raw.t.is_none() {
                report.push("transient-marginal needs \"t\" (rescaled observation time)");
            }
        }
        ExperimentKind::Insensitivity => {
            if services.len() < 2 {
                report.push("insensitivity compares service laws: list at least two");
            }
            let means: Vec<f64> = services.iter().map(|(_, s)| s.mean()).collect();
            if let (Some(first), true) = (means.first(), means.len() >= 2) {
                if means.iter().any(|m| (m - first).abs() > 1e-9 * first.abs()) {
                    report.push(format!(
                        "insensitivity needs equal service means, got {means:?}"
                    ));
                }
            }
        }
        ExperimentKind::Collapse | ExperimentKind::RbmCompare => {
            for (label, s) in &services {
                if !s.second_moment().is_finite() {
                    report.push(format!(
                        "{} needs a finite service second moment; \"{label}\" is heavy-tailed",
                        kind.as_str()
                    ));
                }
            }
            if matches!(kind, ExperimentKind::Collapse) && raw.t.is_none() {
                report.push("collapse needs \"t\" (rescaled observation time)");
            }
        }
        ExperimentKind::RbmSelftest
            if raw.rbm.is_none() && (services.is_empty() || raw.scaling.is_none()) =>
        {
            report.push(
                "rbm-selftest needs either an \"rbm\" block or a service plus scaling \
                 to derive parameters from",
            );
        }
        _ => {}
    }

    // Heavy-tail scaling needs a regularly varying tail with index in (1, 2).
    let heavy_regime = matches!(
        &load,
        Some(Load::Scaling {
            regime: TimeScaling::HeavyTail,
            ..
        })
    );
    if heavy_regime || kind == ExperimentKind::HeavyTailScale {
        for (label, s) in &services {
            if !s.is_heavy_tailed() {
                match s.tail_index() {
                    Some(alpha) => report.push(format!(
                        "heavy-tail scaling requires alpha in (1,2), got alpha = {alpha} \
                         for \"{label}\""
                    )),
                    None => report.push(format!(
                        "heavy-tail scaling requires a pareto or paretolog service, \
                         got \"{label}\""
                    )),
                }
            }
        }
    }

    // Stability where the experiment estimates stationary quantities.
    let needs_stationarity = matches!(
        kind,
        ExperimentKind::Stationary | ExperimentKind::Insensitivity | ExperimentKind::CycleTails
    );
    if needs_stationarity {
        if let (Some(load), Some((_, s))) = (&load, services.first()) {
            match load {
                Load::Lambda(l) if l.is_finite() => {
                    let rho = l * s.mean();
                    if rho >= 1.0 {
                        report.push(format!(
                            "unstable configuration: rho = lambda * mean = {rho} >= 1"
                        ));
                    }
                }
                Load::Scaling { r_list, beta, .. } => {
                    if *beta <= 0.0 {
                        report.push(format!(
                            "stationary estimation needs beta > 0, got beta = {beta} \
                             (rho_r >= 1)"
                        ));
                    }
                    for &r in r_list {
                        if *beta > r {
                            report.push(format!(
                                "beta = {beta} exceeds r = {r}: negative arrival rate"
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
    }

    if let Some(t) = raw.t {
        if !(t > 0.0) {
            report.push(format!("t must be positive, got {t}"));
        }
    }
    if let (Some(t), Some(t2)) = (raw.t, raw.t2) {
        if !(t2 > t) {
            report.push(format!("t2 must exceed t, got t = {t}, t2 = {t2}"));
        }
    }
    if let Some(step) = raw.grid_step {
        if !(step > 0.0) {
            report.push(format!("grid_step must be positive, got {step}"));
        }
    }
    for (name, v) in [
        ("cycles", raw.cycles),
        ("replications", raw.replications),
        ("draws", raw.draws),
        ("paths", raw.paths),
        ("substeps", raw.substeps),
    ] {
        if v == Some(0) {
            report.push(format!("{name} must be positive"));
        }
    }

    let rbm = match &raw.rbm {
        Some(spec) => match RbmParams::new(spec.mu, spec.sigma2) {
            Ok(p) => Some(p),
            Err(e) => {
                report.push(format!("invalid rbm block: {e}"));
                None
            }
        },
        None => None,
    };

    if !report.is_ok() {
        return Err(report);
    }

    // Embed the config with the resolved seed and without the output path,
    // so identical runs produce identical headers regardless of where they
    // write.
    let mut embedded = serde_json::to_value(RawConfigEcho(raw)).expect("config reserializes");
    if let serde_json::Value::Object(map) = &mut embedded {
        map.remove("out");
        map.insert("seed".to_string(), serde_json::json!(seed));
    }

    Ok(Resolved {
        experiment: kind,
        disciplines,
        services,
        load: load.expect("validated"),
        t: raw.t.unwrap_or(match kind {
            ExperimentKind::DiffusionScale | ExperimentKind::HeavyTailScale => 2.0,
            _ => 1.0,
        }),
        t2: raw.t2,
        grid_step: raw.grid_step.unwrap_or(match kind {
            // The self-test refines each grid interval by `substeps`, so a
            // coarse observation grid suffices there.
            ExperimentKind::RbmSelftest => 0.1,
            _ => 0.01,
        }),
        cycles: raw.cycles.unwrap_or(100_000),
        replications: raw.replications.unwrap_or(10_000),
        draws: raw.draws.unwrap_or(10_000),
        paths: raw.paths.unwrap_or(100_000),
        substeps: raw.substeps.unwrap_or(1_000),
        k_max: raw.k_max.unwrap_or(6),
        x_max: raw.x_max,
        rbm,
        seed,
        out: out_override
            .or_else(|| raw.out.clone())
            .unwrap_or_else(|| PathBuf::from("symq-out")),
        event_log: raw.event_log.unwrap_or(false),
        embedded,
    })
}

/// Round-trips the raw config back to JSON for the output headers.
struct RawConfigEcho<'a>(&'a RawConfig);

impl serde::Serialize for RawConfigEcho<'_> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let raw = self.0;
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("experiment", raw.experiment.as_str())?;
        if let Some(v) = &raw.discipline {
            map.serialize_entry("discipline", &spec_json(v))?;
        }
        if let Some(v) = &raw.disciplines {
            let vals: Vec<serde_json::Value> = v.iter().map(spec_json).collect();
            map.serialize_entry("disciplines", &vals)?;
        }
        if let Some(v) = raw.control {
            map.serialize_entry("control", &v)?;
        }
        if let Some(v) = &raw.service {
            map.serialize_entry("service", &service_json(v))?;
        }
        if let Some(v) = &raw.services {
            let vals: Vec<serde_json::Value> = v.iter().map(service_json).collect();
            map.serialize_entry("services", &vals)?;
        }
        if let Some(v) = &raw.scaling {
            let mut obj = serde_json::Map::new();
            if let Some(r) = v.r {
                obj.insert("r".into(), serde_json::json!(r));
            }
            if let Some(list) = &v.r_list {
                obj.insert("r_list".into(), serde_json::json!(list));
            }
            obj.insert("beta".into(), serde_json::json!(v.beta));
            if let Some(reg) = v.regime {
                obj.insert(
                    "regime".into(),
                    serde_json::json!(match reg {
                        RegimeSpec::Diffusion => "diffusion",
                        RegimeSpec::HeavyTail => "heavy-tail",
                    }),
                );
            }
            map.serialize_entry("scaling", &serde_json::Value::Object(obj))?;
        }
        for (key, v) in [
            ("lambda", raw.lambda),
            ("t", raw.t),
            ("t2", raw.t2),
            ("grid_step", raw.grid_step),
        ] {
            if let Some(v) = v {
                map.serialize_entry(key, &v)?;
            }
        }
        for (key, v) in [
            ("cycles", raw.cycles),
            ("replications", raw.replications),
            ("draws", raw.draws),
            ("paths", raw.paths),
            ("substeps", raw.substeps),
            ("k_max", raw.k_max),
            ("x_max", raw.x_max),
        ] {
            if let Some(v) = v {
                map.serialize_entry(key, &v)?;
            }
        }
        if let Some(v) = &raw.rbm {
            map.serialize_entry("rbm", &serde_json::json!({"mu": v.mu, "sigma2": v.sigma2}))?;
        }
        if let Some(v) = raw.seed {
            map.serialize_entry("seed", &v)?;
        }
        if let Some(v) = raw.event_log {
            map.serialize_entry("event_log", &v)?;
        }
        map.end()
    }
}

fn spec_json(spec: &DisciplineSpec) -> serde_json::Value {
    match spec {
        DisciplineSpec::Ps => serde_json::json!({"kind": "ps"}),
        DisciplineSpec::Lcfs => serde_json::json!({"kind": "lcfs"}),
        DisciplineSpec::Table { rows, extension } => {
            let mut obj = serde_json::Map::new();
            obj.insert("kind".into(), "table".into());
            obj.insert("rows".into(), serde_json::json!(rows));
            if let Some(e) = extension {
                obj.insert(
                    "extension".into(),
                    serde_json::json!(match e {
                        ExtensionSpec::Repeat => "repeat",
                        ExtensionSpec::Uniform => "uniform",
                    }),
                );
            }
            serde_json::Value::Object(obj)
        }
    }
}

fn service_json(spec: &ServiceSpec) -> serde_json::Value {
    match spec {
        ServiceSpec::Exponential { mean } => {
            serde_json::json!({"kind": "exponential", "mean": mean})
        }
        ServiceSpec::Deterministic { mean } => {
            serde_json::json!({"kind": "deterministic", "mean": mean})
        }
        ServiceSpec::Hyperexp { probs, means, mean } => {
            let mut obj = serde_json::Map::new();
            obj.insert("kind".into(), "hyperexp".into());
            obj.insert("probs".into(), serde_json::json!(probs));
            obj.insert("means".into(), serde_json::json!(means));
            if let Some(m) = mean {
                obj.insert("mean".into(), serde_json::json!(m));
            }
            serde_json::Value::Object(obj)
        }
        ServiceSpec::Erlang { stages, mean } => {
            serde_json::json!({"kind": "erlang", "stages": stages, "mean": mean})
        }
        ServiceSpec::Pareto { alpha, xmin, mean } => {
            let mut obj = serde_json::Map::new();
            obj.insert("kind".into(), "pareto".into());
            obj.insert("alpha".into(), serde_json::json!(alpha));
            if let Some(x) = xmin {
                obj.insert("xmin".into(), serde_json::json!(x));
            }
            if let Some(m) = mean {
                obj.insert("mean".into(), serde_json::json!(m));
            }
            serde_json::Value::Object(obj)
        }
        ServiceSpec::Paretolog { alpha, xmin, mean } => {
            let mut obj = serde_json::Map::new();
            obj.insert("kind".into(), "paretolog".into());
            obj.insert("alpha".into(), serde_json::json!(alpha));
            if let Some(x) = xmin {
                obj.insert("xmin".into(), serde_json::json!(x));
            }
            if let Some(m) = mean {
                obj.insert("mean".into(), serde_json::json!(m));
            }
            serde_json::Value::Object(obj)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RawConfig {
        serde_json::from_str(json).expect("valid json")
    }

    #[test]
    fn minimal_stationary_config_resolves() {
        let raw = parse(
            r#"{"experiment":"stationary","discipline":{"kind":"ps"},
                "service":{"kind":"exponential","mean":1.0},
                "lambda":0.7,"seed":1}"#,
        );
        let r = resolve(&raw, None, None).unwrap();
        assert_eq!(r.experiment, ExperimentKind::Stationary);
        assert_eq!(r.seed, 1);
        assert_eq!(r.cycles, 100_000);
    }

    #[test]
    fn missing_seed_is_reported() {
        let raw = parse(
            r#"{"experiment":"stationary","discipline":{"kind":"ps"},
                "service":{"kind":"exponential","mean":1.0},"lambda":0.7}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(report.problems.iter().any(|p| p.contains("seed required")));
        // A --seed override satisfies the requirement.
        assert!(resolve(&raw, Some(9), None).is_ok());
    }

    #[test]
    fn scaling_and_lambda_are_mutually_exclusive() {
        let raw = parse(
            r#"{"experiment":"stationary","discipline":{"kind":"ps"},
                "service":{"kind":"exponential","mean":1.0},
                "lambda":0.7,"scaling":{"r":10.0,"beta":1.0},"seed":1}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(report.problems.iter().any(|p| p.contains("exactly one")));
    }

    #[test]
    fn negative_table_weight_is_located() {
        let raw = parse(
            r#"{"experiment":"stationary",
                "discipline":{"kind":"table","rows":[[1.0],[-1.0,2.0]]},
                "service":{"kind":"exponential","mean":1.0},"lambda":0.7,"seed":1}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(
            report.problems.iter().any(|p| p.contains("n=2, i=1")),
            "{report}"
        );
    }

    #[test]
    fn heavy_tail_scaling_rejects_light_tails() {
        let raw = parse(
            r#"{"experiment":"heavy-tail-scale","discipline":{"kind":"ps"},
                "service":{"kind":"pareto","alpha":2.5,"xmin":1.0},
                "scaling":{"r":10.0,"beta":1.0},"seed":1}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(
            report
                .problems
                .iter()
                .any(|p| p.contains("alpha in (1,2)")),
            "{report}"
        );
    }

    #[test]
    fn unstable_load_names_rho() {
        let raw = parse(
            r#"{"experiment":"stationary","discipline":{"kind":"ps"},
                "service":{"kind":"exponential","mean":2.0},"lambda":0.7,"seed":1}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(
            report.problems.iter().any(|p| p.contains("rho")),
            "{report}"
        );
    }

    #[test]
    fn insensitivity_requires_equal_means() {
        let raw = parse(
            r#"{"experiment":"insensitivity","discipline":{"kind":"ps"},
                "services":[{"kind":"exponential","mean":1.0},
                            {"kind":"deterministic","mean":2.0}],
                "lambda":0.7,"seed":1}"#,
        );
        let report = resolve(&raw, None, None).unwrap_err();
        assert!(
            report.problems.iter().any(|p| p.contains("equal service means")),
            "{report}"
        );
    }

    #[test]
    fn control_arm_is_labeled() {
        let raw = parse(
            r#"{"experiment":"transient-marginal",
                "disciplines":[{"kind":"ps"},{"kind":"lcfs"}],"control":true,
                "service":{"kind":"exponential","mean":1.0},
                "scaling":{"r":5.0,"beta":1.0},"t":0.5,"seed":1}"#,
       );
        let r = resolve(&raw, None, None).unwrap();
        let labels: Vec<&str> = r.disciplines.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, vec!["ps", "lcfs", "ps-control"]);
    }

    #[test]
    fn embedded_config_strips_out_and_pins_seed() {
        let raw = parse(
            r#"{"experiment":"stationary","discipline":{"kind":"ps"},
                "service":{"kind":"exponential","mean":1.0},
                "lambda":0.7,"out":"/tmp/somewhere"}"#,
        );
        let r = resolve(&raw, Some(42), None).unwrap();
        assert!(r.embedded.get("out").is_none());
        assert_eq!(r.embedded.get("seed").unwrap(), 42);
    }

    #[test]
    fn unknown_fields_fail_parsing() {
        let err = serde_json::from_str::<RawConfig>(
            r#"{"experiment":"stationary","sevice":{"kind":"exponential","mean":1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sevice"));
    }

    #[test]
    fn rbm_selftest_accepts_explicit_parameters() {
        let raw = parse(
            r#"{"experiment":"rbm-selftest","rbm":{"mu":-1.0,"sigma2":2.0},
                "paths":100,"substeps":10,"seed":3}"#,
        );
        let r = resolve(&raw, None, None).unwrap();
        assert!(r.rbm.is_some());
    }
}

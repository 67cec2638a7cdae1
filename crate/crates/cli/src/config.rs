//! Run configuration files.
//!
//! ```toml
//! [equation]
//! omega = 1.0
//! beta = 1.0
//! gamma = 1.0
//!
//! [grid]
//! x_min = -50.0
//! x_max = 50.0
//! n = 512
//!
//! [time]
//! t_end = 1.0
//! dt = 5e-4
//! scheme = "strang"
//!
//! [initial]
//! kind = "sech"
//! ```
//!
//! Every key outside the known set is rejected, and all problems are
//! collected before reporting, each with its line number.

use std::fmt;
use std::ops::Range;

use hons_core::experiments::{ExperimentConfig, InitialCondition, InitialKind, RunScheme, ROUGH_SLOPE};
use hons_core::integrators::{step_count, BOUNDARY_GUARD};
use hons_core::weights::WeightSpec;
use hons_core::{EquationParams, Grid};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

pub const DEFAULT_PRECISION: usize = 12;
pub const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// A validated configuration plus the output settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub output_path: String,
    pub precision: usize,
    /// Refinement levels of the convergence study.
    pub levels: usize,
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.experiment;
        let p = &e.params;
        let ic = &e.initial;
        writeln!(
            f,
            "equation: omega = {}, beta = {}, gamma = {}, delta = {}, epsilon = {}",
            p.dispersion, p.third_order, p.cubic, p.steepening, p.conj_steepening
        )?;
        writeln!(
            f,
            "grid: [{}, {}), n = {}, dx = {}, guard = {}",
            e.grid.x_min(),
            e.grid.x_max(),
            e.grid.n(),
            e.grid.dx(),
            e.edge_guard.map_or("off".to_string(), |g| g.to_string())
        )?;
        writeln!(
            f,
            "time: t_end = {}, dt = {}, scheme = {}, stride = {}, levels = {}",
            e.t_end,
            e.dt,
            e.scheme.name(),
            e.stride,
            self.levels
        )?;
        writeln!(
            f,
            "initial: {} amplitude = {}, width = {}, phase_c = {}, L = {}, slope = {}, seed = {}",
            ic.kind.name(),
            ic.amplitude,
            ic.width,
            ic.phase_c,
            ic.decay,
            ic.slope,
            ic.seed
        )?;
        for w in &e.weights {
            writeln!(f, "weight: sigma = {}, i = {}, k = {}", w.sigma, w.i, w.k)?;
        }
        write!(f, "output: {} (precision {})", self.output_path, self.precision)
    }
}

struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    fn line(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }
}

struct Collector {
    lines: LineIndex,
    errors: Vec<ConfigError>,
}

impl Collector {
    fn push(&mut self, span: &Range<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: self.lines.line(span.start),
            message: message.into(),
        });
    }
}

type Value<'i> = Spanned<DeValue<'i>>;

/// One `[section]` of the file, possibly absent.
struct Section<'t, 'i> {
    name: &'static str,
    table: Option<&'t DeTable<'i>>,
    span: Range<usize>,
}

impl<'t, 'i> Section<'t, 'i> {
    fn check_keys(&self, allowed: &[&str], c: &mut Collector) {
        let Some(table) = self.table else { return };
        for key in table.keys() {
            if !allowed.contains(&key.get_ref().as_ref()) {
                c.push(
                    &key.span(),
                    format!(
                        "unknown key '{}' in [{}] (allowed: {})",
                        key.get_ref(),
                        self.name,
                        allowed.join(", ")
                    ),
                );
            }
        }
    }

    fn get(&self, key: &str) -> Option<&'t Value<'i>> {
        self.table?.get(key)
    }

    fn required(&self, key: &str, c: &mut Collector) -> Option<&'t Value<'i>> {
        let v = self.get(key);
        if v.is_none() {
            c.push(&self.span, format!("missing required key '{key}' in [{}]", self.name));
        }
        v
    }

    fn float(&self, key: &str, default: Option<f64>, c: &mut Collector) -> Option<f64> {
        let v = match default {
            Some(d) => match self.get(key) {
                Some(v) => v,
                None => return Some(d),
            },
            None => self.required(key, c)?,
        };
        let parsed = match v.get_ref() {
            DeValue::Float(f) => f.as_str().parse::<f64>().ok(),
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix())
                .ok()
                .filter(|n| n.unsigned_abs() <= 1 << 53)
                .map(|n| n as f64),
            _ => None,
        };
        match parsed {
            Some(f) if f.is_finite() => Some(f),
            _ => {
                c.push(&v.span(), format!("[{}] {key} must be a finite number", self.name));
                None
            }
        }
    }

    fn integer(&self, key: &str, default: Option<u64>, c: &mut Collector) -> Option<u64> {
        let v = match default {
            Some(d) => match self.get(key) {
                Some(v) => v,
                None => return Some(d),
            },
            None => self.required(key, c)?,
        };
        let parsed = match v.get_ref() {
            DeValue::Integer(i) => u64::from_str_radix(i.as_str(), i.radix()).ok(),
            _ => None,
        };
        if parsed.is_none() {
            c.push(
                &v.span(),
                format!("[{}] {key} must be a non-negative integer", self.name),
            );
        }
        parsed
    }

    fn string(&self, key: &str, default: Option<&str>, c: &mut Collector) -> Option<(String, Range<usize>)> {
        let v = match default {
            Some(d) => match self.get(key) {
                Some(v) => v,
                None => return Some((d.to_string(), self.span.clone())),
            },
            None => self.required(key, c)?,
        };
        match v.get_ref().as_str() {
            Some(s) => Some((s.to_string(), v.span())),
            None => {
                c.push(&v.span(), format!("[{}] {key} must be a string", self.name));
                None
            }
        }
    }

    fn value_span(&self, key: &str) -> Range<usize> {
        self.get(key).map_or(self.span.clone(), |v| v.span())
    }
}

fn section<'t, 'i>(root: &'t DeTable<'i>, name: &'static str, required: bool, c: &mut Collector) -> Section<'t, 'i> {
    match root.get(name) {
        Some(v) => match v.get_ref().as_table() {
            Some(t) => Section {
                name,
                table: Some(t),
                span: v.span(),
            },
            None => {
                c.push(&v.span(), format!("[{name}] must be a table"));
                Section {
                    name,
                    table: None,
                    span: v.span(),
                }
            }
        },
        None => {
            if required {
                c.push(&(0..0), format!("missing required section [{name}]"));
            }
            Section {
                name,
                table: None,
                span: 0..0,
            }
        }
    }
}

const SECTIONS: [&str; 7] = [
    "equation",
    "grid",
    "time",
    "initial",
    "weights",
    "output",
    "convergence",
];

pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let mut c = Collector {
        lines: LineIndex::new(text),
        errors: Vec::new(),
    };
    let root = match DeTable::parse(text) {
        Ok(t) => t,
        Err(e) => {
            let span = e.span().unwrap_or(0..0);
            c.push(&span, e.message().to_string());
            return Err(c.errors);
        }
    };
    let root = root.get_ref();
    for key in root.keys() {
        if !SECTIONS.contains(&key.get_ref().as_ref()) {
            c.push(
                &key.span(),
                format!("unknown section '{}' (allowed: {})", key.get_ref(), SECTIONS.join(", ")),
            );
        }
    }

    let eq = section(root, "equation", true, &mut c);
    eq.check_keys(&["omega", "beta", "gamma", "delta", "epsilon"], &mut c);
    let omega = eq.float("omega", None, &mut c);
    let beta = eq.float("beta", None, &mut c);
    let gamma = eq.float("gamma", None, &mut c);
    let delta = eq.float("delta", Some(0.0), &mut c);
    let epsilon = eq.float("epsilon", Some(0.0), &mut c);
    if beta == Some(0.0) {
        c.push(
            &eq.value_span("beta"),
            "beta must be nonzero (the third-order term defines the equation)",
        );
    }
    let params = match (omega, beta, gamma, delta, epsilon) {
        (Some(w), Some(b), Some(g), Some(d), Some(e)) if b != 0.0 => EquationParams::new(w, b, g, d, e).ok(),
        _ => None,
    };

    let gr = section(root, "grid", true, &mut c);
    gr.check_keys(&["x_min", "x_max", "n", "edge_guard"], &mut c);
    let x_min = gr.float("x_min", None, &mut c);
    let x_max = gr.float("x_max", None, &mut c);
    let n = gr.integer("n", None, &mut c);
    let guard = gr.float("edge_guard", Some(BOUNDARY_GUARD), &mut c);
    if matches!(guard, Some(g) if g < 0.0) {
        c.push(
            &gr.value_span("edge_guard"),
            "edge_guard must be >= 0 (0 disables the guard)",
        );
    }
    let grid = match (x_min, x_max, n) {
        (Some(a), Some(b), Some(n)) => match Grid::new(a, b, n as usize) {
            Ok(g) => Some(g),
            Err(e) => {
                let span = match e {
                    hons_core::Error::GridSize(_) => gr.value_span("n"),
                    _ => gr.value_span("x_max"),
                };
                c.push(&span, format!("invalid grid: {e}"));
                None
            }
        },
        _ => None,
    };

    let tm = section(root, "time", true, &mut c);
    tm.check_keys(&["t_end", "dt", "scheme", "stride"], &mut c);
    let t_end = tm.float("t_end", None, &mut c);
    let dt = tm.float("dt", None, &mut c);
    let scheme = tm
        .string("scheme", None, &mut c)
        .and_then(|(s, span)| match s.parse::<RunScheme>() {
            Ok(s) => Some(s),
            Err(e) => {
                c.push(&span, e.to_string());
                None
            }
        });
    let stride = tm.integer("stride", Some(1), &mut c);
    if stride == Some(0) {
        c.push(&tm.value_span("stride"), "stride must be at least 1");
    }
    if let (Some(t), Some(d)) = (t_end, dt) {
        if let Err(e) = step_count(t, d) {
            c.push(&tm.value_span("dt"), e.to_string());
        }
    }

    let ini = section(root, "initial", true, &mut c);
    ini.check_keys(&["kind", "amplitude", "width", "phase_c", "L", "slope", "seed"], &mut c);
    let kind = ini
        .string("kind", None, &mut c)
        .and_then(|(s, span)| match s.parse::<InitialKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                c.push(&span, e.to_string());
                None
            }
        });
    let amplitude = ini.float("amplitude", Some(1.0), &mut c);
    let width = ini.float("width", Some(1.0), &mut c);
    if matches!(width, Some(w) if w <= 0.0) {
        c.push(&ini.value_span("width"), "width must be positive");
    }
    let phase_c = ini.float("phase_c", Some(0.0), &mut c);
    let decay = ini.integer("L", Some(2), &mut c);
    if matches!(decay, Some(l) if l > u32::MAX as u64) {
        c.push(&ini.value_span("L"), "L is too large");
    }
    let slope = ini.float("slope", Some(ROUGH_SLOPE), &mut c);
    let seed = ini.integer("seed", Some(0), &mut c);

    let weights = parse_weights(root, &mut c);

    let out = section(root, "output", false, &mut c);
    out.check_keys(&["path", "precision"], &mut c);
    let output_path = out.string("path", Some("."), &mut c).map(|s| s.0);
    let precision = out.integer("precision", Some(DEFAULT_PRECISION as u64), &mut c);
    if matches!(precision, Some(p) if !(1..=17).contains(&p)) {
        c.push(
            &out.value_span("precision"),
            "precision must be between 1 and 17 significant digits",
        );
    }

    let conv = section(root, "convergence", false, &mut c);
    conv.check_keys(&["levels"], &mut c);
    let levels = conv.integer("levels", Some(DEFAULT_LEVELS as u64), &mut c);
    if matches!(levels, Some(l) if !(3..=12).contains(&l)) {
        c.push(&conv.value_span("levels"), "levels must be between 3 and 12");
    }

    if !c.errors.is_empty() {
        c.errors.sort_by_key(|e| e.line);
        return Err(c.errors);
    }
    let (
        Some(params),
        Some(grid),
        Some(t_end),
        Some(dt),
        Some(scheme),
        Some(stride),
        Some(kind),
        Some(amplitude),
        Some(width),
        Some(phase_c),
        Some(decay),
        Some(slope),
        Some(seed),
        Some(weights),
        Some(guard),
        Some(output_path),
        Some(precision),
        Some(levels),
    ) = (
        params,
        grid,
        t_end,
        dt,
        scheme,
        stride,
        kind,
        amplitude,
        width,
        phase_c,
        decay,
        slope,
        seed,
        weights,
        guard,
        output_path,
        precision,
        levels,
    )
    else {
        return Err(vec![ConfigError {
            line: 1,
            message: "configuration is incomplete".into(),
        }]);
    };
    Ok(RunConfig {
        experiment: ExperimentConfig {
            params,
            grid,
            initial: InitialCondition {
                kind,
                amplitude,
                width,
                phase_c,
                decay: decay as u32,
                slope,
                seed,
            },
            t_end,
            dt,
            scheme,
            stride: stride as usize,
            weights,
            edge_guard: (guard > 0.0).then_some(guard),
        },
        output_path,
        precision: precision as usize,
        levels: levels as usize,
    })
}

fn parse_weights(root: &DeTable<'_>, c: &mut Collector) -> Option<Vec<WeightSpec>> {
    let Some(v) = root.get("weights") else {
        return Some(Vec::new());
    };
    let entries: Vec<&Value<'_>> = match v.get_ref() {
        DeValue::Array(items) => items.iter().collect(),
        DeValue::Table(_) => vec![v],
        _ => {
            c.push(&v.span(), "[weights] must be a table or an array of tables");
            return None;
        }
    };
    let mut out = Vec::new();
    let mut ok = true;
    for entry in entries {
        let Some(table) = entry.get_ref().as_table() else {
            c.push(&entry.span(), "each [[weights]] entry must be a table");
            ok = false;
            continue;
        };
        let s = Section {
            name: "weights",
            table: Some(table),
            span: entry.span(),
        };
        s.check_keys(&["sigma", "i", "k"], c);
        let sigma = s.float("sigma", None, c);
        let i = s.integer("i", None, c);
        let k = s.integer("k", Some(0), c);
        match (sigma, i, k) {
            (Some(sigma), Some(i), Some(k)) if i <= u32::MAX as u64 && k <= u32::MAX as u64 => {
                match WeightSpec::new(sigma, i as u32, k as u32) {
                    Ok(w) => out.push(w),
                    Err(e) => {
                        c.push(&s.value_span("sigma"), e.to_string());
                        ok = false;
                    }
                }
            }
            _ => ok = false,
        }
    }
    ok.then_some(out)
}

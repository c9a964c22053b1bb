//! Run configuration.
//!
//! A configuration is a TOML document with the flat sections `[grid]`,
//! `[params]`, `[integrator]`, `[initial]` and `[output]`:
//!
//! ```toml
//! [grid]
//! dim = 2
//! points = 32           # per axis, or a list
//! extents = 1.0         # optional, per axis or a list
//! dealias_pad = 2       # optional
//! modes = 32            # optional Galerkin band, defaults to `points`
//!
//! [params]              # either beta1..beta5 or lambda_r, lambda_e, chi
//! beta1 = 1.0           #   (plus beta2..beta5) with optional gamma
//! beta2 = 0.01
//! beta3 = 1.0
//! beta4 = 1.0
//! beta5 = 0.1
//! reduced = false       # optional: allow beta2..beta5 = 0
//!
//! [integrator]
//! scheme = "ETDRK2"     # or "IMEX-CNAB2", "IMEX-Euler"
//! dt = 1e-3
//! t_end = 1.0
//! blowup_threshold = 1e6
//!
//! [initial]
//! kind = "random_band"  # constant | eigenmode | random_band | file
//! decay = 4.0
//! amplitude = 0.5
//! seed = 7
//! normalize_linf = 1.0  # optional
//!
//! [output]
//! dir = "out"
//! cadence = 10          # ledger row every k steps
//! snapshot_cadence = 0  # 0 disables snapshots
//! ```
//!
//! Every problem found is reported, each prefixed with `section.key`.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::galerkin::{LLBarParams, ModeBand, PhysicalInputs};
use crate::grid::{GridSpec, DEFAULT_DEALIAS_PAD};
use crate::integrator::{IntegratorPolicy, Scheme, DEFAULT_BLOWUP_THRESHOLD};

const SECTIONS: [&str; 5] = ["grid", "params", "integrator", "initial", "output"];

#[derive(Clone, Debug, PartialEq)]
pub enum InitialKind {
    Constant([f64; 3]),
    /// `amplitude * direction / |direction| * e_k`.
    Eigenmode {
        k: Vec<usize>,
        amplitude: f64,
        direction: [f64; 3],
    },
    /// Gaussian coefficients scaled by `amplitude * (1 + lambda)^(-decay/2)`.
    RandomBand {
        decay: f64,
        amplitude: f64,
    },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialKind,
    /// Rescale so the sup norm over the dealiasing grid equals this value.
    pub normalize_linf: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub cadence: usize,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_cadence: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub band: ModeBand,
    pub params: LLBarParams,
    pub policy: IntegratorPolicy,
    pub initial: InitialSpec,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.initial.seed
    }
}

/// Reads and validates the configuration at `path`; relative file paths in
/// it are resolved against the file's directory.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_with(&text, overrides)?;
    if let Some(base) = path.parent() {
        if let InitialKind::File(p) = &mut cfg.initial.kind {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parses `text` after applying `section.key=value` overrides; values are
/// read as TOML, falling back to a plain string.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut issues = Vec::new();
    for o in overrides {
        if let Err(msg) = apply_override(&mut table, o) {
            issues.push(msg);
        }
    }
    let mut r = Reader { issues };
    let cfg = r.config(&table);
    match cfg {
        Some(cfg) if r.issues.is_empty() => Ok(cfg),
        _ => Err(Error::Config(r.issues)),
    }
}

fn apply_override(table: &mut Table, o: &str) -> std::result::Result<(), String> {
    let (key, value) = o
        .split_once('=')
        .ok_or_else(|| format!("override {o:?} is not of the form section.key=value"))?;
    let (section, key) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| format!("override key {key:?} is not of the form section.key"))?;
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(key.to_string(), parsed);
            Ok(())
        }
        _ => Err(format!("override section {section:?} is not a table")),
    }
}

struct Reader {
    issues: Vec<String>,
}

/// Accessor for one section that remembers which keys were consumed.
struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    used: Vec<&'static str>,
}

impl Reader {
    fn issue(&mut self, s: &Section, key: &str, msg: impl std::fmt::Display) {
        self.issues.push(format!("{}.{key}: {msg}", s.name));
    }

    fn section<'a>(&mut self, root: &'a Table, name: &'static str, required: bool) -> Option<Section<'a>> {
        static EMPTY: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
        match root.get(name) {
            Some(Value::Table(t)) => Some(Section {
                name,
                table: t,
                used: vec![],
            }),
            Some(_) => {
                self.issues.push(format!("[{name}]: expected a section"));
                None
            }
            None if required => {
                self.issues.push(format!("[{name}]: missing section"));
                None
            }
            None => Some(Section {
                name,
                table: EMPTY.get_or_init(Table::new),
                used: vec![],
            }),
        }
    }

    fn finish(&mut self, s: Section) {
        for key in s.table.keys() {
            if !s.used.contains(&key.as_str()) {
                self.issues.push(format!("{}.{key}: unknown key", s.name));
            }
        }
    }

    fn float(&mut self, s: &mut Section, key: &'static str) -> Option<f64> {
        s.used.push(key);
        match s.table.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.issue(s, key, format!("expected a number, got {other}"));
                None
            }
        }
    }

    fn int(&mut self, s: &mut Section, key: &'static str) -> Option<i64> {
        s.used.push(key);
        match s.table.get(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.issue(s, key, format!("expected an integer, got {other}"));
                None
            }
        }
    }

    fn count(&mut self, s: &mut Section, key: &'static str) -> Option<usize> {
        let v = self.int(s, key)?;
        if v < 0 {
            self.issue(s, key, format!("must be nonnegative, got {v}"));
            return None;
        }
        Some(v as usize)
    }

    fn string(&mut self, s: &mut Section, key: &'static str) -> Option<String> {
        s.used.push(key);
        match s.table.get(key)? {
            Value::String(x) => Some(x.clone()),
            other => {
                self.issue(s, key, format!("expected a string, got {other}"));
                None
            }
        }
    }

    fn boolean(&mut self, s: &mut Section, key: &'static str) -> Option<bool> {
        s.used.push(key);
        match s.table.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.issue(s, key, format!("expected true or false, got {other}"));
                None
            }
        }
    }

    /// A scalar broadcast to `dim` entries, or a list of exactly `dim`.
    fn per_axis<V: Copy>(
        &mut self,
        s: &mut Section,
        key: &'static str,
        dim: usize,
        conv: fn(&Value) -> Option<V>,
    ) -> Option<Vec<V>> {
        s.used.push(key);
        let v = s.table.get(key)?;
        if let Some(x) = conv(v) {
            return Some(vec![x; dim]);
        }
        let parsed: Option<Vec<V>> = match v {
            Value::Array(a) => a.iter().map(conv).collect(),
            _ => None,
        };
        match parsed {
            Some(list) if list.len() == dim => Some(list),
            Some(list) => {
                self.issue(s, key, format!("expected {dim} entries, got {}", list.len()));
                None
            }
            None => {
                self.issue(s, key, format!("expected a value or a list of {dim}, got {v}"));
                None
            }
        }
    }

    fn config(&mut self, root: &Table) -> Option<RunConfig> {
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                self.issues.push(format!("[{key}]: unknown section"));
            }
        }
        let grid = self.grid(root);
        let params = self.params(root);
        let policy = self.integrator(root);
        let initial = grid.as_ref().and_then(|(g, _)| self.initial(root, g));
        let output = self.output(root);
        let (grid, band) = grid?;
        Some(RunConfig {
            grid,
            band,
            params: params?,
            policy: policy?,
            initial: initial?,
            output: output?,
        })
    }

    fn grid(&mut self, root: &Table) -> Option<(GridSpec, ModeBand)> {
        let mut s = self.section(root, "grid", true)?;
        let as_count = |v: &Value| v.as_integer().filter(|i| *i > 0).map(|i| i as usize);
        let as_float = |v: &Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
        let dim = self.count(&mut s, "dim");
        let result = match dim {
            Some(d @ 1..=3) => {
                let points = self.per_axis(&mut s, "points", d, as_count);
                if points.is_none() && !s.table.contains_key("points") {
                    self.issue(&s, "points", "missing");
                }
                let extents = if s.table.contains_key("extents") {
                    self.per_axis(&mut s, "extents", d, as_float)
                } else {
                    Some(vec![1.0; d])
                };
                let pad = match self.count(&mut s, "dealias_pad") {
                    Some(p) => Some(p),
                    None if s.table.contains_key("dealias_pad") => None,
                    None => Some(DEFAULT_DEALIAS_PAD),
                };
                let modes = if s.table.contains_key("modes") {
                    self.per_axis(&mut s, "modes", d, as_count)
                } else {
                    s.used.push("modes");
                    points.clone()
                };
                match (points, extents, pad, modes) {
                    (Some(points), Some(extents), Some(pad), Some(modes)) => {
                        match GridSpec::new(extents, points, pad) {
                            Ok(g) => match ModeBand::new(modes, &g) {
                                Ok(b) => Some((g, b)),
                                Err(e) => {
                                    self.issue(&s, "modes", e);
                                    None
                                }
                            },
                            Err(e) => {
                                self.issue(&s, "points", e);
                                None
                            }
                        }
                    }
                    _ => None,
                }
            }
            Some(d) => {
                self.issue(&s, "dim", format!("must be 1, 2 or 3, got {d}"));
                None
            }
            None => {
                if !s.table.contains_key("dim") {
                    self.issue(&s, "dim", "missing");
                }
                for k in ["points", "extents", "dealias_pad", "modes"] {
                    s.used.push(k);
                }
                None
            }
        };
        self.finish(s);
        result
    }

    fn params(&mut self, root: &Table) -> Option<LLBarParams> {
        let mut s = self.section(root, "params", true)?;
        let reduced = self.boolean(&mut s, "reduced").unwrap_or(false);
        let has_beta1 = s.table.contains_key("beta1");
        let physical_keys = ["lambda_r", "lambda_e", "chi"];
        let has_physical = physical_keys.iter().any(|k| s.table.contains_key(*k));
        let mut betas = [None; 5];
        for (i, key) in ["beta1", "beta2", "beta3", "beta4", "beta5"].into_iter().enumerate() {
            betas[i] = self.float(&mut s, key);
        }
        let lr = self.float(&mut s, "lambda_r");
        let le = self.float(&mut s, "lambda_e");
        let chi = self.float(&mut s, "chi");
        let gamma = self.float(&mut s, "gamma");
        let mut ok = true;
        if has_beta1 == has_physical {
            self.issue(
                &s,
                "beta1",
                "provide exactly one of beta1 or the physical inputs (lambda_r, lambda_e, chi)",
            );
            ok = false;
        }
        for (i, b) in betas.iter().enumerate().skip(1) {
            if b.is_none() && !s.table.contains_key(&format!("beta{}", i + 1)) {
                self.issue(&s, &format!("beta{}", i + 1), "missing");
                ok = false;
            }
        }
        let beta1 = if has_physical && !has_beta1 {
            let mut missing = false;
            for (k, v) in physical_keys.iter().zip([lr, le, chi]) {
                if v.is_none() {
                    self.issue(&s, k, "missing (physical inputs need lambda_r, lambda_e and chi)");
                    missing = true;
                }
            }
            if missing {
                None
            } else {
                match crate::galerkin::derive_beta1(lr?, le?, chi?) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        self.issue(&s, "chi", e);
                        None
                    }
                }
            }
        } else {
            betas[0]
        };
        let result = if ok {
            match (beta1, betas[1], betas[2], betas[3], betas[4]) {
                (Some(b1), Some(b2), Some(b3), Some(b4), Some(b5)) => {
                    let built = if reduced {
                        LLBarParams::reduced(b1, b2, b3, b4, b5)
                    } else {
                        LLBarParams::new(b1, b2, b3, b4, b5)
                    };
                    let built = built.and_then(|mut p| {
                        if has_physical {
                            p.physical = Some(PhysicalInputs {
                                lambda_r: lr.unwrap_or_default(),
                                lambda_e: le.unwrap_or_default(),
                                chi: chi.unwrap_or(1.0),
                                gamma,
                            });
                            if !reduced {
                                p.validate()?;
                            }
                        }
                        Ok(p)
                    });
                    match built {
                        Ok(p) => Some(p),
                        Err(e) => {
                            self.issues.push(format!("params: {e}"));
                            None
                        }
                    }
                }
                _ => None,
            }
        } else {
            None
        };
        self.finish(s);
        result
    }

    fn integrator(&mut self, root: &Table) -> Option<IntegratorPolicy> {
        let mut s = self.section(root, "integrator", true)?;
        let scheme = match self.string(&mut s, "scheme") {
            Some(name) => match name.parse::<Scheme>() {
                Ok(sc) => Some(sc),
                Err(e) => {
                    self.issue(&s, "scheme", e);
                    None
                }
            },
            None if s.table.contains_key("scheme") => None,
            None => Some(Scheme::Etdrk2),
        };
        let dt = self.float(&mut s, "dt");
        let t_end = self.float(&mut s, "t_end");
        for (key, v) in [("dt", dt), ("t_end", t_end)] {
            if v.is_none() && !s.table.contains_key(key) {
                self.issue(&s, key, "missing");
            }
        }
        let threshold = self
            .float(&mut s, "blowup_threshold")
            .unwrap_or(DEFAULT_BLOWUP_THRESHOLD);
        let max_steps = self.count(&mut s, "max_steps");
        let result = match (scheme, dt, t_end) {
            (Some(scheme), Some(dt), Some(t_end)) => {
                let built = IntegratorPolicy::new(scheme, dt, t_end).and_then(|mut p| {
                    p.blowup_threshold = threshold;
                    if let Some(m) = max_steps {
                        p.max_steps = m;
                    }
                    if !(threshold > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "blowup_threshold must be positive, got {threshold}"
                        )));
                    }
                    p.step_count()?;
                    Ok(p)
                });
                match built {
                    Ok(p) => Some(p),
                    Err(e) => {
                        self.issues.push(format!("integrator: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };
        self.finish(s);
        result
    }

    fn initial(&mut self, root: &Table, grid: &GridSpec) -> Option<InitialSpec> {
        let mut s = self.section(root, "initial", true)?;
        let seed = self.int(&mut s, "seed").map(|x| x as u64).unwrap_or(0);
        let normalize_linf = self.float(&mut s, "normalize_linf");
        if let Some(n) = normalize_linf {
            if !(n > 0.0 && n.is_finite()) {
                self.issue(&s, "normalize_linf", format!("must be positive, got {n}"));
            }
        }
        let vec3 = |r: &mut Self, s: &mut Section, key: &'static str| -> Option<[f64; 3]> {
            let v = r.per_axis(s, key, 3, |v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))?;
            Some([v[0], v[1], v[2]])
        };
        let kind = match self.string(&mut s, "kind").as_deref() {
            Some("constant") => vec3(self, &mut s, "value").map(InitialKind::Constant).or_else(|| {
                if !s.table.contains_key("value") {
                    self.issue(&s, "value", "missing");
                }
                None
            }),
            Some("eigenmode") => {
                let k = self.per_axis(&mut s, "k", grid.dim(), |v| {
                    v.as_integer().filter(|i| *i >= 0).map(|i| i as usize)
                });
                let amplitude = self.float(&mut s, "amplitude").unwrap_or(1.0);
                let direction = if s.table.contains_key("direction") {
                    vec3(self, &mut s, "direction")
                } else {
                    s.used.push("direction");
                    Some([1.0, 0.0, 0.0])
                };
                if let Some(d) = direction {
                    if d.iter().all(|x| *x == 0.0) {
                        self.issue(&s, "direction", "must be nonzero");
                    }
                }
                if k.is_none() && !s.table.contains_key("k") {
                    self.issue(&s, "k", "missing");
                }
                match (k, direction) {
                    (Some(k), Some(direction)) => Some(InitialKind::Eigenmode {
                        k,
                        amplitude,
                        direction,
                    }),
                    _ => None,
                }
            }
            Some("random_band") => {
                let decay = self.float(&mut s, "decay").unwrap_or(2.0);
                let amplitude = self.float(&mut s, "amplitude").unwrap_or(1.0);
                if !(decay >= 0.0) {
                    self.issue(&s, "decay", format!("must be nonnegative, got {decay}"));
                }
                Some(InitialKind::RandomBand { decay, amplitude })
            }
            Some("file") => match self.string(&mut s, "path") {
                Some(p) => Some(InitialKind::File(PathBuf::from(p))),
                None => {
                    if !s.table.contains_key("path") {
                        self.issue(&s, "path", "missing");
                    }
                    None
                }
            },
            Some(other) => {
                self.issue(
                    &s,
                    "kind",
                    format!("unknown kind {other:?} (constant, eigenmode, random_band or file)"),
                );
                None
            }
            None => {
                if !s.table.contains_key("kind") {
                    self.issue(&s, "kind", "missing");
                }
                None
            }
        };
        self.finish(s);
        Some(InitialSpec {
            kind: kind?,
            normalize_linf,
            seed,
        })
    }

    fn output(&mut self, root: &Table) -> Option<OutputSpec> {
        let mut s = self.section(root, "output", false)?;
        let dir = self.string(&mut s, "dir").unwrap_or_else(|| ".".into());
        let cadence = self.count(&mut s, "cadence").unwrap_or(1);
        if cadence == 0 {
            self.issue(&s, "cadence", "must be at least 1");
        }
        let snapshot_cadence = self.count(&mut s, "snapshot_cadence").unwrap_or(0);
        self.finish(s);
        Some(OutputSpec {
            dir: PathBuf::from(dir),
            cadence: cadence.max(1),
            snapshot_cadence,
        })
    }
}

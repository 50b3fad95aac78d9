//! Run configuration: a flat, sectioned key-value text format.
//!
//! ```text
//! # comments start with '#'
//! [model]
//! m = 1.0
//! a = 1.0
//! b1 = 2.0
//! b2 = 0.25
//! J = 0.5
//! d = 3
//! beta = 4.0
//!
//! [lattice]
//! extents = 3, 3, 3
//! boundary = plus
//! ```
//!
//! Keys may also be written with their section as a dotted prefix
//! (`chain.seed = 7`) outside any section. The seven `model` keys are
//! required; every other key has a default. Unknown keys, malformed values
//! and repeated keys are rejected with the key path and line number.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::loops::{default_clamp, default_slices, BoundaryCondition, LatticeBox};
use crate::params::{OscillatorParams, PotentialMode};
use crate::sampler::{slice_of_time, ChainSettings, ProposalMix, TestFunction};
use crate::spectral::SpectralOptions;
use crate::stats::fnv1a64;

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["m", "a", "b1", "b2", "J", "d", "beta", "harmonic"]),
    ("grid", &["points", "half_width", "levels"]),
    ("lattice", &["extents", "boundary", "clamp", "slices"]),
    (
        "chain",
        &["sweeps", "burn_in", "thinning", "seed", "stream", "mix", "nudge_scale", "chains"],
    ),
    (
        "run",
        &[
            "mass_min",
            "mass_max",
            "mass_points",
            "theta_nodes",
            "site",
            "sites",
            "times",
            "functions",
        ],
    ),
];

const REQUIRED: &[&str] = &["model.m", "model.a", "model.b1", "model.b2", "model.J", "model.d", "model.beta"];

fn is_known(path: &str) -> bool {
    path.split_once('.')
        .is_some_and(|(s, k)| KEYS.iter().any(|(sec, keys)| *sec == s && keys.contains(&k)))
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// 0 for values set outside a file.
    line: usize,
}

/// Raw key-value pairs, checked against the grammar but not yet typed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    entries: BTreeMap<String, Entry>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDocument::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .ok_or_else(|| Error::config(format!("line {line}"), format!("malformed section header `{content}`")))?;
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::config(name, format!("line {line}: unknown section")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {line}"), format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = match &section {
                Some(s) => format!("{s}.{key}"),
                None => key.to_string(),
            };
            if !is_known(&path) {
                return Err(Error::config(path, format!("line {line}: unknown key")));
            }
            if value.is_empty() {
                return Err(Error::config(path, format!("line {line}: missing value")));
            }
            if let Some(first) = doc.entries.get(&path) {
                return Err(Error::config(
                    path,
                    format!("line {line}: duplicate key, first set on line {}", first.line),
                ));
            }
            doc.entries.insert(
                path,
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(doc)
    }

    /// Sets or replaces a value (command-line overrides).
    pub fn set(&mut self, path: &str, value: &str) -> Result<()> {
        if !is_known(path) {
            return Err(Error::config(path, "unknown key"));
        }
        self.entries.insert(
            path.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.entries.get(path).map(|e| e.value.as_str())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    fn field<T>(&self, path: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Option<T>> {
        match self.entries.get(path) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).ok_or_else(|| {
                let at = if e.line > 0 { format!("line {}: ", e.line) } else { String::new() };
                Error::config(path, format!("{at}expected {expected}, got `{}`", e.value))
            }),
        }
    }

    fn required<T>(&self, path: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<T> {
        self.field(path, parse, expected)?
            .ok_or_else(|| Error::config(path, "missing required key"))
    }
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn integer(s: &str) -> Option<u64> {
    s.parse().ok()
}

fn size(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn boolean(s: &str) -> Option<bool> {
    s.parse().ok()
}

fn auto_or<T>(parse: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Option<T>> {
    move |s| if s == "auto" { Some(None) } else { parse(s).map(Some) }
}

fn list<T>(parse: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Vec<T>> {
    move |s| s.split(',').map(|x| parse(x.trim())).collect()
}

/// Length of `run.sites` (1 when absent), used to size default lists.
fn run_sites_len(doc: &ConfigDocument) -> Result<usize> {
    Ok(doc.field("run.sites", list(size), "a list of integers")?.map_or(1, |s| s.len()))
}

fn join<T>(items: &[T], show: impl Fn(&T) -> String) -> String {
    items.iter().map(show).collect::<Vec<_>>().join(", ")
}

/// Options of the commands that go beyond model, grid, lattice and chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Mass window of the rigidity scan.
    pub mass_min: f64,
    pub mass_max: f64,
    pub mass_points: usize,
    /// Per-axis nodes of the coarse tensor grid for theta(d).
    pub theta_nodes: usize,
    /// Site of the order-parameter estimate.
    pub site: usize,
    /// Sites, imaginary times and test functions of a Matsubara product.
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    pub functions: Vec<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mass_min: 1e-3,
            mass_max: 1e-2,
            mass_points: 12,
            theta_nodes: 64,
            site: 0,
            sites: vec![0],
            times: vec![0.0],
            functions: vec!["clip:5.0".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeOptions {
    pub extents: Vec<usize>,
    pub boundary: BoundaryCondition,
    pub slices: usize,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: OscillatorParams,
    pub grid: SpectralOptions,
    pub lattice: LatticeOptions,
    pub chain: ChainSettings,
    /// Independent chains run in parallel by the sampling commands.
    pub chains: usize,
    pub run: RunOptions,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(&ConfigDocument::parse(text)?)
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self> {
        for key in REQUIRED {
            if !doc.contains(key) {
                return Err(Error::config(*key, "missing required key"));
            }
        }
        let mut model = OscillatorParams {
            m: doc.required("model.m", number, "a number")?,
            a: doc.required("model.a", number, "a number")?,
            b1: doc.required("model.b1", number, "a number")?,
            b2: doc.required("model.b2", number, "a number")?,
            j: doc.required("model.J", number, "a number")?,
            d: doc.required("model.d", size, "a positive integer")?,
            beta: doc.required("model.beta", number, "a number")?,
            mode: PotentialMode::Anharmonic,
        };
        if doc.field("model.harmonic", boolean, "true or false")?.unwrap_or(false) {
            model = model.harmonic();
        }
        model.validate()?;

        let defaults = SpectralOptions::default();
        let grid = SpectralOptions {
            points: doc.field("grid.points", size, "an integer")?.unwrap_or(defaults.points),
            half_width: doc
                .field("grid.half_width", auto_or(number), "a number or auto")?
                .unwrap_or(None),
            levels: doc.field("grid.levels", size, "an integer")?.unwrap_or(defaults.levels),
        };
        if grid.points < 3 {
            return Err(Error::config("grid.points", "need at least 3 interior points"));
        }
        if grid.levels < 2 || grid.levels > grid.points {
            return Err(Error::config("grid.levels", "need between 2 and grid.points levels"));
        }
        if let Some(w) = grid.half_width {
            if !(w > 0.0) {
                return Err(Error::config("grid.half_width", "must be positive"));
            }
        }

        let extents = doc
            .field("lattice.extents", list(size), "a comma-separated list of integers")?
            .unwrap_or_else(|| vec![4; model.d]);
        if extents.len() != model.d {
            return Err(Error::config(
                "lattice.extents",
                format!("{} extents given for dimension d = {}", extents.len(), model.d),
            ));
        }
        let volume = LatticeBox::new(extents.clone()).map_err(|e| Error::config("lattice.extents", e.to_string()))?;
        let clamp = doc.field("lattice.clamp", auto_or(number), "a number or auto")?.unwrap_or(None);
        let boundary = match doc.get("lattice.boundary").unwrap_or("free") {
            "free" => BoundaryCondition::Free,
            kind @ ("plus" | "minus") => {
                let c = match clamp {
                    Some(c) => c,
                    None => default_clamp(&model)?,
                };
                if kind == "plus" {
                    BoundaryCondition::PlusClamped(c)
                } else {
                    BoundaryCondition::MinusClamped(c)
                }
            }
            other => {
                return Err(Error::config(
                    "lattice.boundary",
                    format!("expected free, plus or minus, got `{other}`"),
                ))
            }
        };
        boundary.validate()?;
        let slices = doc
            .field("lattice.slices", auto_or(size), "an integer or auto")?
            .unwrap_or(None)
            .unwrap_or_else(|| default_slices(&model));
        if slices < 2 {
            return Err(Error::config("lattice.slices", "need at least 2 slices"));
        }

        let cd = ChainSettings::default();
        let mix = match doc.field("chain.mix", list(number), "three comma-separated numbers")? {
            None => cd.mix,
            Some(v) if v.len() == 3 => ProposalMix {
                redraw: v[0],
                nudge: v[1],
                flip: v[2],
            },
            Some(_) => return Err(Error::config("chain.mix", "expected three probabilities: redraw, nudge, flip")),
        };
        let chain = ChainSettings {
            sweeps: doc.field("chain.sweeps", integer, "an integer")?.unwrap_or(cd.sweeps),
            burn_in: doc.field("chain.burn_in", integer, "an integer")?.unwrap_or(cd.burn_in),
            thinning: doc.field("chain.thinning", integer, "an integer")?.unwrap_or(cd.thinning),
            seed: doc.field("chain.seed", integer, "an integer")?.unwrap_or(cd.seed),
            stream: doc.field("chain.stream", integer, "an integer")?.unwrap_or(cd.stream),
            mix,
            nudge_scale: doc.field("chain.nudge_scale", number, "a number")?.unwrap_or(cd.nudge_scale),
        };
        chain.validate()?;
        let chains = doc.field("chain.chains", size, "an integer")?.unwrap_or(1);
        if chains == 0 {
            return Err(Error::config("chain.chains", "must be positive"));
        }

        let rd = RunOptions::default();
        let functions = match doc.field("run.functions", list(|s| TestFunction::parse(s).ok()), "test functions (one, identity, clip:L)")? {
            Some(f) => f.iter().map(TestFunction::name).collect(),
            None => vec![TestFunction::default_clip(&model).name(); run_sites_len(doc)?],
        };
        let run = RunOptions {
            mass_min: doc.field("run.mass_min", number, "a number")?.unwrap_or(rd.mass_min),
            mass_max: doc.field("run.mass_max", number, "a number")?.unwrap_or(rd.mass_max),
            mass_points: doc.field("run.mass_points", size, "an integer")?.unwrap_or(rd.mass_points),
            theta_nodes: doc.field("run.theta_nodes", size, "an integer")?.unwrap_or(rd.theta_nodes),
            site: doc.field("run.site", size, "an integer")?.unwrap_or(rd.site),
            sites: doc.field("run.sites", list(size), "a list of integers")?.unwrap_or(rd.sites),
            times: doc
                .field("run.times", list(number), "a list of numbers")?
                .unwrap_or_else(|| vec![0.0; run_sites_len(doc).unwrap_or(1)]),
            functions,
        };
        if !(run.mass_min > 0.0 && run.mass_max > run.mass_min) {
            return Err(Error::config("run.mass_max", "need 0 < mass_min < mass_max"));
        }
        if run.mass_points < 2 {
            return Err(Error::config("run.mass_points", "need at least 2 masses"));
        }
        if run.theta_nodes < 4 || run.theta_nodes % 2 != 0 {
            return Err(Error::config("run.theta_nodes", "need an even node count of at least 4"));
        }
        if run.site >= volume.sites() {
            return Err(Error::config("run.site", format!("box has only {} sites", volume.sites())));
        }
        if run.sites.len() != run.times.len() || run.sites.len() != run.functions.len() {
            return Err(Error::config("run.sites", "run.sites, run.times and run.functions must have equal length"));
        }
        if let Some(s) = run.sites.iter().find(|&&s| s >= volume.sites()) {
            return Err(Error::config("run.sites", format!("site {s} outside a box of {} sites", volume.sites())));
        }
        for &t in &run.times {
            slice_of_time(model.beta, slices, t).map_err(|e| Error::config("run.times", e.to_string()))?;
        }

        Ok(RunConfig {
            model,
            grid,
            lattice: LatticeOptions {
                extents,
                boundary,
                slices,
            },
            chain,
            chains,
            run,
        })
    }

    pub fn volume(&self) -> LatticeBox {
        LatticeBox::new(self.lattice.extents.clone()).expect("validated at parse time")
    }

    /// Every key in canonical order with its effective value.
    pub fn entries(&self) -> Vec<(String, String)> {
        let f = |v: f64| format!("{v:?}");
        let m = &self.model;
        let c = &self.chain;
        let r = &self.run;
        let clamp = match self.lattice.boundary {
            BoundaryCondition::Free => "auto".to_string(),
            BoundaryCondition::PlusClamped(v) | BoundaryCondition::MinusClamped(v) => f(v),
        };
        let rows = [
            ("model.m", f(m.m)),
            ("model.a", f(m.a)),
            ("model.b1", f(m.b1)),
            ("model.b2", f(m.b2)),
            ("model.J", f(m.j)),
            ("model.d", m.d.to_string()),
            ("model.beta", f(m.beta)),
            ("model.harmonic", m.is_harmonic().to_string()),
            ("grid.points", self.grid.points.to_string()),
            ("grid.half_width", self.grid.half_width.map_or("auto".into(), f)),
            ("grid.levels", self.grid.levels.to_string()),
            ("lattice.extents", join(&self.lattice.extents, usize::to_string)),
            ("lattice.boundary", self.lattice.boundary.name().to_string()),
            ("lattice.clamp", clamp),
            ("lattice.slices", self.lattice.slices.to_string()),
            ("chain.sweeps", c.sweeps.to_string()),
            ("chain.burn_in", c.burn_in.to_string()),
            ("chain.thinning", c.thinning.to_string()),
            ("chain.seed", c.seed.to_string()),
            ("chain.stream", c.stream.to_string()),
            ("chain.mix", join(&[c.mix.redraw, c.mix.nudge, c.mix.flip], |v| f(*v))),
            ("chain.nudge_scale", f(c.nudge_scale)),
            ("chain.chains", self.chains.to_string()),
            ("run.mass_min", f(r.mass_min)),
            ("run.mass_max", f(r.mass_max)),
            ("run.mass_points", r.mass_points.to_string()),
            ("run.theta_nodes", r.theta_nodes.to_string()),
            ("run.site", r.site.to_string()),
            ("run.sites", join(&r.sites, usize::to_string)),
            ("run.times", join(&r.times, |v| f(*v))),
            ("run.functions", r.functions.join(", ")),
        ];
        rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Canonical text: every section, every key, defaults made explicit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = String::new();
        for (path, value) in self.entries() {
            let (section, key) = path.split_once('.').expect("dotted key");
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section.to_string();
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// FNV-1a 64 of the canonical text, as 16 hex digits.
    pub fn digest(&self) -> String {
        format!("{:016x}", fnv1a64(self.to_text().as_bytes()))
    }

    /// `key = value` lines for every key the document left to its default.
    pub fn defaults_applied(&self, doc: &ConfigDocument) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| !doc.contains(k))
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }
}

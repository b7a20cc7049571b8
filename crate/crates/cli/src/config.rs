//! Run configuration: a TOML document (grammar in `docs/config.md`) plus
//! `--set key=value` overrides, validated in one pass so that every problem is
//! reported together with the line it comes from.

use bloch_plasmon::drude::{DesignOptions, DrudeParams, SweepAxis};
use bloch_plasmon::geometry::{BoundaryCurve, Shape};
use bloch_plasmon::potentials::{check_source, SourceDipole};
use bloch_plasmon::quasi_green::{Backend, QuasiMomentum, SummationConfig};
use bloch_plasmon::resonance::{MaterialParams, SolvePath, SolverOptions, DEFAULT_ETA0};
use num_complex::Complex64 as C64;
use std::fmt;
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Solve,
    Sweep,
    Design,
    Verify,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug)]
pub struct ValidationError(pub Vec<Issue>);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for i in &self.0 {
            writeln!(f, "  {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Permeability {
    Direct(C64),
    Drude(DrudeParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Materials {
    pub eps_m: f64,
    pub mu_m: f64,
    pub eps_c: C64,
    pub mu_c: Permeability,
}

impl Materials {
    pub fn at(&self, omega: f64) -> bloch_plasmon::Result<MaterialParams> {
        let mu_c = match self.mu_c {
            Permeability::Direct(m) => m,
            Permeability::Drude(p) => bloch_plasmon::drude::drude_mu(&p, omega),
        };
        MaterialParams::new(self.eps_m, self.mu_m, self.eps_c, mu_c)
    }

    pub fn drude(&self) -> Option<DrudeParams> {
        match self.mu_c {
            Permeability::Drude(p) => Some(p),
            Permeability::Direct(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeParameter {
    Tau,
    Filling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignConfig {
    pub mode: usize,
    pub free: FreeParameter,
    pub options: DesignOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub mode: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub grid_spacing: f64,
    pub field_spacing: f64,
    pub max_discrepancy: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub alpha: QuasiMomentum,
    pub n: usize,
    pub curve: BoundaryCurve,
    pub summation: SummationConfig,
    pub omega: Option<f64>,
    pub eta0: f64,
    pub solver: SolverOptions,
    pub materials: Option<Materials>,
    pub source: Option<SourceDipole>,
    pub output: OutputConfig,
    pub design: Option<DesignConfig>,
    pub sweep: Option<SweepConfig>,
}

/// Line of `path` (dotted) in the TOML source: the key line inside its table,
/// or the table header itself.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let (table, key) = match path.rfind('.') {
        Some(i) => (&path[..i], &path[i + 1..]),
        None => ("", path),
    };
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == path {
                return Some(i + 1);
            }
            if current == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

/// Parses `key=value` with `value` in TOML syntax, falling back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| format!("override '{assignment}' is not key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|p| p.trim().is_empty()) {
        return Err(format!("override '{assignment}' has an empty key"));
    }
    let value = match format!("v = {}", raw.trim()).parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| format!("override '{key}': '{p}' is not a table"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

struct Reader<'a> {
    root: &'a Table,
    source: &'a str,
    overridden: &'a [String],
    issues: Vec<Issue>,
}

impl<'a> Reader<'a> {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        let line = if self.overridden.iter().any(|k| k == key || key.starts_with(&format!("{k}."))) {
            None
        } else {
            locate(self.source, key)
        };
        let key = if line.is_none() && self.overridden.iter().any(|k| k == key) { format!("--set {key}") } else { key.to_string() };
        self.issues.push(Issue { line, key, message: message.into() });
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        let mut node = self.root;
        let parts: Vec<&str> = key.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            node = node.get(*p)?.as_table()?;
        }
        node.get(parts[parts.len() - 1])
    }

    fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    fn float_of(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        match Self::float_of(v) {
            Some(x) if x.is_finite() => Some(x),
            Some(_) => {
                self.issue(key, "must be finite");
                None
            }
            None => {
                self.issue(key, format!("expected a number, found {}", v.type_str()));
                None
            }
        }
    }

    fn f64_req(&mut self, key: &str) -> Option<f64> {
        if !self.has(key) {
            self.issue(key, "missing required number");
            return None;
        }
        self.f64_opt(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Option<f64> {
        if self.has(key) {
            self.f64_opt(key)
        } else {
            Some(default)
        }
    }

    fn positive(&mut self, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.issue(key, format!("must be positive (got {x})"));
                None
            }
            None => None,
        }
    }

    fn positive_or(&mut self, key: &str, default: f64) -> Option<f64> {
        let v = self.f64_or(key, default);
        self.positive(key, v)
    }

    fn positive_req(&mut self, key: &str) -> Option<f64> {
        let v = self.f64_req(key);
        self.positive(key, v)
    }

    fn usize_opt(&mut self, key: &str) -> Option<usize> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            v => {
                self.issue(key, format!("expected a non-negative integer, found {}", v.type_str()));
                None
            }
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Option<bool> {
        match self.get(key) {
            None => Some(default),
            Some(Value::Boolean(b)) => Some(*b),
            Some(v) => {
                self.issue(key, format!("expected true or false, found {}", v.type_str()));
                None
            }
        }
    }

    fn str_opt(&mut self, key: &str) -> Option<&'a str> {
        match self.get(key)? {
            Value::String(s) => Some(s.as_str()),
            v => {
                self.issue(key, format!("expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.get(key)?;
        let arr = match v.as_array() {
            Some(a) => a,
            None => {
                self.issue(key, format!("expected an array of numbers, found {}", v.type_str()));
                return None;
            }
        };
        let xs: Option<Vec<f64>> = arr.iter().map(Self::float_of).collect();
        match xs {
            Some(xs) if xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                self.issue(key, "array entries must be finite numbers");
                None
            }
        }
    }

    fn pair(&mut self, key: &str) -> Option<[f64; 2]> {
        let xs = self.floats(key)?;
        if xs.len() != 2 {
            self.issue(key, format!("expected 2 numbers, found {}", xs.len()));
            return None;
        }
        Some([xs[0], xs[1]])
    }

    fn pair_req(&mut self, key: &str) -> Option<[f64; 2]> {
        if !self.has(key) {
            self.issue(key, "missing required [x, y] pair");
            return None;
        }
        self.pair(key)
    }

    /// `[re, im]` or a plain real number.
    fn complex_req(&mut self, key: &str) -> Option<C64> {
        match self.get(key) {
            None => {
                self.issue(key, "missing required complex value ([re, im] or a number)");
                None
            }
            Some(Value::Array(_)) => self.pair(key).map(|p| C64::new(p[0], p[1])),
            Some(_) => self.f64_opt(key).map(|x| C64::new(x, 0.0)),
        }
    }

    fn section(&mut self, key: &str) -> bool {
        match self.get(key) {
            Some(Value::Table(_)) => true,
            Some(v) => {
                self.issue(key, format!("expected a table, found {}", v.type_str()));
                false
            }
            None => false,
        }
    }

    fn unknown_keys(&mut self, table: &str, allowed: &[&str]) {
        let keys: Vec<String> = match if table.is_empty() { Some(self.root) } else { self.get(table).and_then(Value::as_table) } {
            Some(t) => t.keys().cloned().collect(),
            None => return,
        };
        for k in keys {
            if !allowed.contains(&k.as_str()) {
                let path = if table.is_empty() { k.clone() } else { format!("{table}.{k}") };
                self.issue(&path, format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }
}

impl RunConfig {
    /// Parses and validates; `overrides` are `key=value` strings applied first.
    pub fn parse(source: &str, overrides: &[String], command: Command) -> Result<Self, ValidationError> {
        let mut table: Table = source.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| source[..s.start.min(source.len())].lines().count().max(1));
            ValidationError(vec![Issue { line, key: "syntax".into(), message: e.message().to_string() }])
        })?;
        let mut issues = Vec::new();
        let mut keys = Vec::new();
        for o in overrides {
            match apply_override(&mut table, o) {
                Ok(()) => keys.push(o.split_once('=').map(|(k, _)| k.trim().to_string()).unwrap_or_default()),
                Err(m) => issues.push(Issue { line: None, key: "--set".into(), message: m }),
            }
        }
        let mut r = Reader { root: &table, source, overridden: &keys, issues };
        let cfg = Self::read(&mut r, command);
        match cfg {
            Some(c) if r.issues.is_empty() => Ok(c),
            _ => {
                if r.issues.is_empty() {
                    r.issues.push(Issue { line: None, key: "config".into(), message: "incomplete configuration".into() });
                }
                Err(ValidationError(r.issues))
            }
        }
    }

    fn read(r: &mut Reader, command: Command) -> Option<Self> {
        r.unknown_keys("", &["alpha", "geometry", "materials", "source", "solver", "output", "design", "sweep"]);
        let alpha = r.pair_req("alpha").and_then(|a| match QuasiMomentum::new(a[0], a[1]) {
            Ok(q) => Some(q),
            Err(e) => {
                r.issue("alpha", e.to_string());
                None
            }
        });

        let geometry = Self::read_geometry(r);
        let (summation, omega, eta0, solver) = Self::read_solver(r, command);
        let output = Self::read_output(r);

        let needs_materials = matches!(command, Command::Solve | Command::Sweep | Command::Design);
        let materials = if needs_materials || r.has("materials") { Self::read_materials(r, needs_materials) } else { None };
        if matches!(command, Command::Sweep | Command::Design) {
            if let Some(m) = &materials {
                if m.drude().is_none() {
                    r.issue("materials.drude", "sweep and design need a [materials.drude] block");
                }
            }
        }
        let source = if needs_materials || r.has("source") { Self::read_source(r, needs_materials) } else { None };
        let design = if command == Command::Design || r.has("design") { Self::read_design(r, command == Command::Design) } else { None };
        let sweep = if command == Command::Sweep || r.has("sweep") { Self::read_sweep(r, command == Command::Sweep) } else { None };

        let (n, curve) = geometry?;
        if let Some(src) = &source {
            if let Err(e) = check_source(&curve, src) {
                r.issue("source.position", e.to_string());
            }
        }
        if needs_materials && omega.is_none() {
            r.issue("solver.omega", "missing required frequency");
        }
        Some(Self {
            alpha: alpha?,
            n,
            curve,
            summation: summation?,
            omega,
            eta0: eta0?,
            solver: solver?,
            materials,
            source,
            output: output?,
            design,
            sweep,
        })
    }

    fn read_geometry(r: &mut Reader) -> Option<(usize, BoundaryCurve)> {
        if !r.section("geometry") {
            r.issue("geometry", "missing required [geometry] table");
            return None;
        }
        r.unknown_keys("geometry", &["shape", "center", "radius", "semi_axes", "amplitude", "lobes", "n"]);
        let kind = match r.str_opt("geometry.shape") {
            Some(s) => Some(s),
            None => {
                if !r.has("geometry.shape") {
                    r.issue("geometry.shape", "missing (circle | ellipse | star)");
                }
                None
            }
        };
        let center = if r.has("geometry.center") { r.pair("geometry.center") } else { Some([0.5, 0.5]) };
        let n = match r.usize_opt("geometry.n") {
            Some(n) => Some(n),
            None if !r.has("geometry.n") => {
                r.issue("geometry.n", "missing node count");
                None
            }
            None => None,
        };
        let shape = match kind? {
            "circle" => Shape::Circle { center: center?, radius: r.f64_req("geometry.radius")? },
            "ellipse" => {
                let semi = r.pair_req("geometry.semi_axes")?;
                Shape::Ellipse { center: center?, semi_axes: semi }
            }
            "star" => {
                let base = r.f64_req("geometry.radius");
                let amp = r.f64_req("geometry.amplitude");
                let lobes = match r.usize_opt("geometry.lobes") {
                    Some(l) => Some(l as u32),
                    None if !r.has("geometry.lobes") => {
                        r.issue("geometry.lobes", "missing lobe count");
                        None
                    }
                    None => None,
                };
                Shape::Star { center: center?, base_radius: base?, amplitude: amp?, lobes: lobes? }
            }
            other => {
                r.issue("geometry.shape", format!("unknown shape '{other}' (circle | ellipse | star)"));
                return None;
            }
        };
        let n = n?;
        match BoundaryCurve::new(shape, n) {
            Ok(c) => Some((n, c)),
            Err(e) => {
                r.issue("geometry", e.to_string());
                None
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn read_solver(r: &mut Reader, command: Command) -> (Option<SummationConfig>, Option<f64>, Option<f64>, Option<SolverOptions>) {
        r.section("solver");
        r.unknown_keys(
            "solver",
            &["omega", "backend", "truncation", "ewald_split", "tolerance", "eta0", "c1", "path", "allow_large_omega", "max_condition"],
        );
        let mut cfg = SummationConfig::default();
        let mut ok = true;
        if let Some(b) = r.str_opt("solver.backend") {
            match b.parse::<Backend>() {
                Ok(b) => cfg.backend = b,
                Err(e) => {
                    r.issue("solver.backend", e.to_string());
                    ok = false;
                }
            }
        }
        if r.has("solver.truncation") {
            match r.usize_opt("solver.truncation") {
                Some(t) => cfg.truncation_radius = t as u32,
                None => ok = false,
            }
        }
        match r.positive_or("solver.ewald_split", cfg.ewald_split) {
            Some(x) => cfg.ewald_split = x,
            None => ok = false,
        }
        match r.f64_or("solver.tolerance", cfg.tolerance) {
            Some(x) => cfg.tolerance = x,
            None => ok = false,
        }
        if ok {
            if let Err(e) = cfg.validate() {
                r.issue("solver", e.to_string());
                ok = false;
            }
        }
        let allow = r.bool_or("solver.allow_large_omega", false);
        let omega = if r.has("solver.omega") {
            let w = r.f64_opt("solver.omega");
            r.positive("solver.omega", w)
        } else {
            None
        };
        let defaults = SolverOptions::default();
        if let (Some(w), Some(false)) = (omega, allow) {
            if w > defaults.quasi_static_limit && command != Command::Spectrum && command != Command::Verify {
                r.issue(
                    "solver.omega",
                    format!("{w} exceeds the quasi-static limit {} (set allow_large_omega = true)", defaults.quasi_static_limit),
                );
            }
        }
        let eta0 = r.positive_or("solver.eta0", DEFAULT_ETA0);
        let c1 = r.positive_or("solver.c1", defaults.c1);
        let max_condition = r.positive_or("solver.max_condition", defaults.max_condition);
        let path = match r.str_opt("solver.path") {
            None if !r.has("solver.path") => Some(SolvePath::Block),
            None => None,
            Some("block") => Some(SolvePath::Block),
            Some("reduced") => Some(SolvePath::Reduced),
            Some(p) => {
                r.issue("solver.path", format!("unknown path '{p}' (block | reduced)"));
                None
            }
        };
        let solver = match (allow, c1, max_condition, path) {
            (Some(allow), Some(c1), Some(max_condition), Some(path)) => {
                Some(SolverOptions { allow_large_omega: allow, c1, max_condition, path, ..defaults })
            }
            _ => None,
        };
        (ok.then_some(cfg), omega, eta0, solver)
    }

    fn read_output(r: &mut Reader) -> Option<OutputConfig> {
        r.section("output");
        r.unknown_keys("output", &["grid_spacing", "field_spacing", "max_discrepancy"]);
        let grid = r.positive_or("output.grid_spacing", 0.005);
        let field = r.positive_or("output.field_spacing", 0.05);
        let disc = r.positive_or("output.max_discrepancy", 0.05);
        Some(OutputConfig { grid_spacing: grid?, field_spacing: field?, max_discrepancy: disc? })
    }

    fn read_materials(r: &mut Reader, required: bool) -> Option<Materials> {
        if !r.section("materials") {
            if required {
                r.issue("materials", "missing required [materials] table");
            }
            return None;
        }
        r.unknown_keys("materials", &["eps_m", "mu_m", "eps_c", "mu_c", "drude"]);
        let eps_m = r.positive_req("materials.eps_m");
        let mu_m = r.positive_req("materials.mu_m");
        let eps_c = r.complex_req("materials.eps_c");
        let mu_c = match (r.has("materials.mu_c"), r.has("materials.drude")) {
            (true, true) => {
                r.issue("materials.drude", "give either mu_c or a [materials.drude] block, not both");
                None
            }
            (false, false) => {
                r.issue("materials.mu_c", "missing (give mu_c = [re, im] or a [materials.drude] block)");
                None
            }
            (true, false) => r.complex_req("materials.mu_c").map(Permeability::Direct),
            (false, true) => {
                r.section("materials.drude");
                r.unknown_keys("materials.drude", &["mu0", "filling", "tau", "omega0"]);
                let mu0 = r.f64_or("materials.drude.mu0", 1.0);
                let f = r.f64_req("materials.drude.filling");
                let tau = r.f64_req("materials.drude.tau");
                let w0 = r.f64_req("materials.drude.omega0");
                match DrudeParams::new(mu0?, f?, tau?, w0?) {
                    Ok(p) => Some(Permeability::Drude(p)),
                    Err(e) => {
                        r.issue("materials.drude", e.to_string());
                        None
                    }
                }
            }
        };
        let m = Materials { eps_m: eps_m?, mu_m: mu_m?, eps_c: eps_c?, mu_c: mu_c? };
        if let Permeability::Direct(mu) = m.mu_c {
            if let Err(e) = MaterialParams::new(m.eps_m, m.mu_m, m.eps_c, mu) {
                r.issue("materials", e.to_string());
                return None;
            }
        }
        Some(m)
    }

    fn read_source(r: &mut Reader, required: bool) -> Option<SourceDipole> {
        if !r.section("source") {
            if required {
                r.issue("source", "missing required [source] table");
            }
            return None;
        }
        r.unknown_keys("source", &["moment", "position"]);
        let moment = r.pair_req("source.moment");
        let position = r.pair_req("source.position");
        Some(SourceDipole { moment: moment?, position: position? })
    }

    fn read_design(r: &mut Reader, required: bool) -> Option<DesignConfig> {
        if !r.section("design") {
            if required {
                r.issue("design", "missing required [design] table");
            }
            return None;
        }
        r.unknown_keys("design", &["mode", "free", "tau_min", "tau_max", "f_min", "f_max", "scan_points", "max_bisections"]);
        let mode = Self::mode(r, "design.mode");
        let free = match r.str_opt("design.free") {
            None if !r.has("design.free") => Some(FreeParameter::Tau),
            None => None,
            Some("tau") => Some(FreeParameter::Tau),
            Some("filling") | Some("F") => Some(FreeParameter::Filling),
            Some(o) => {
                r.issue("design.free", format!("unknown parameter '{o}' (tau | filling)"));
                None
            }
        };
        let d = DesignOptions::default();
        let tmin = r.positive_or("design.tau_min", d.tau_bracket.0);
        let tmax = r.positive_or("design.tau_max", d.tau_bracket.1);
        let fmin = r.positive_or("design.f_min", d.filling_bracket.0);
        let fmax = r.positive_or("design.f_max", d.filling_bracket.1);
        let scan = if r.has("design.scan_points") { r.usize_opt("design.scan_points") } else { Some(d.scan_points) };
        let bis = if r.has("design.max_bisections") { r.usize_opt("design.max_bisections") } else { Some(d.max_bisections) };
        if let (Some(a), Some(b)) = (tmin, tmax) {
            if a >= b {
                r.issue("design.tau_max", format!("empty bracket [{a}, {b}]"));
            }
        }
        if let (Some(a), Some(b)) = (fmin, fmax) {
            if a >= b || b >= 1.0 {
                r.issue("design.f_max", format!("filling bracket [{a}, {b}] must be increasing inside (0, 1)"));
            }
        }
        if scan.is_some_and(|s| s < 2) {
            r.issue("design.scan_points", "need at least 2 scan points");
        }
        Some(DesignConfig {
            mode: mode?,
            free: free?,
            options: DesignOptions {
                tau_bracket: (tmin?, tmax?),
                filling_bracket: (fmin?, fmax?),
                scan_points: scan?,
                max_bisections: bis?,
                ..d
            },
        })
    }

    fn mode(r: &mut Reader, key: &str) -> Option<usize> {
        match r.usize_opt(key) {
            Some(0) => {
                r.issue(key, "mode 0 is the distinguished eigenvalue 1/2 and cannot resonate");
                None
            }
            Some(j) => Some(j),
            None if !r.has(key) => Some(1),
            None => None,
        }
    }

    fn read_sweep(r: &mut Reader, required: bool) -> Option<SweepConfig> {
        if !r.section("sweep") {
            if required {
                r.issue("sweep", "missing required [sweep] table");
            }
            return None;
        }
        r.unknown_keys("sweep", &["axis", "values", "start", "stop", "points", "mode"]);
        let axis = match r.str_opt("sweep.axis") {
            None if !r.has("sweep.axis") => {
                r.issue("sweep.axis", "missing (tau | filling)");
                None
            }
            None => None,
            Some("tau") => Some(SweepAxis::Tau),
            Some("filling") | Some("F") => Some(SweepAxis::Filling),
            Some(o) => {
                r.issue("sweep.axis", format!("unknown axis '{o}' (tau | filling)"));
                None
            }
        };
        let mode = Self::mode(r, "sweep.mode");
        let values = if r.has("sweep.values") {
            if r.has("sweep.start") || r.has("sweep.stop") || r.has("sweep.points") {
                r.issue("sweep.values", "give either values or start/stop/points, not both");
                None
            } else {
                r.floats("sweep.values")
            }
        } else {
            let start = r.positive_req("sweep.start");
            let stop = r.positive_req("sweep.stop");
            let points = match r.usize_opt("sweep.points") {
                Some(p) if p >= 1 => Some(p),
                Some(_) => {
                    r.issue("sweep.points", "need at least one point");
                    None
                }
                None => {
                    if !r.has("sweep.points") {
                        r.issue("sweep.points", "missing point count");
                    }
                    None
                }
            };
            match (start, stop, points) {
                (Some(a), Some(b), Some(1)) => Some(vec![a.min(b)]),
                (Some(a), Some(b), Some(p)) => {
                    Some((0..p).map(|i| a * (b / a).powf(i as f64 / (p - 1) as f64)).collect())
                }
                _ => None,
            }
        };
        if let Some(v) = &values {
            if v.is_empty() || v.iter().any(|&x| x <= 0.0) {
                r.issue("sweep.values", "sweep values must be a non-empty list of positive numbers");
            }
        }
        Some(SweepConfig { axis: axis?, values: values?, mode: mode? })
    }
}

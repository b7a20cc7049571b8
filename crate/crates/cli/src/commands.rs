use crate::config::{FreeParameter, RunConfig};
use crate::verify;
use anyhow::{anyhow, Context};
use bloch_plasmon::drude::{
    design_filling_factor, design_relaxation_rate, design_target, drude_energy, sweep_blowup, BlowupSetup, DesignOptions,
    DesignResult, DrudeParams,
};
use bloch_plasmon::resonance::{
    near_field_energy, resonance_index_set, resonance_report, solve_densities, NearField, Region,
};
use bloch_plasmon::spectrum::{static_spectrum, StaticSpectrum};
use bloch_plasmon::Error;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};

/// How a successful run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// A sweep produced fewer than two points usable for the slope fit.
    InsufficientPoints,
    /// `verify` found failing checks.
    ChecksFailed,
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table held in memory until the command has finished, so failed runs
/// leave no partial output.
pub struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(self.name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
    pub outcome: Outcome,
}

impl Report {
    pub fn write(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.tables.iter().map(|t| t.write(dir)).collect()
    }
}

fn spectrum_of(cfg: &RunConfig) -> bloch_plasmon::Result<StaticSpectrum> {
    static_spectrum(cfg.alpha, &cfg.curve, &cfg.summation)
}

pub fn spectrum(cfg: &RunConfig) -> anyhow::Result<Report> {
    let sp = spectrum_of(cfg)?;
    let d = &sp.decomposition;
    let mut t = Table::new("spectrum.csv", &["j", "lambda", "trusted"]);
    for j in 0..d.len() {
        t.push(vec![j.to_string(), num(d.eigenvalues[j]), (j < d.trusted).to_string()]);
    }
    let summary = vec![
        format!("nodes {}", cfg.n),
        format!("trusted modes {}", d.trusted),
        format!("distinguished mode {} lambda {}", d.phi0_index, num(d.eigenvalues[d.phi0_index])),
        format!("self-adjointness residual {}", num(d.self_adjoint_residual)),
        format!("max imaginary part {}", num(d.max_imag)),
    ];
    Ok(Report { tables: vec![t], summary, outcome: Outcome::Ok })
}

fn region_name(r: Region) -> &'static str {
    r.name()
}

pub fn solve(cfg: &RunConfig) -> anyhow::Result<Report> {
    let omega = cfg.omega.ok_or_else(|| anyhow!("solver.omega is required"))?;
    let mats = cfg.materials.as_ref().ok_or_else(|| anyhow!("[materials] is required"))?;
    let src = cfg.source.ok_or_else(|| anyhow!("[source] is required"))?;
    let m = mats.at(omega)?;
    let (sol, ops) = solve_densities(cfg.alpha, omega, &m, &cfg.curve, &src, &cfg.summation, &cfg.solver)?;
    let field = NearField::new(&sol, &ops, &cfg.curve, &src, &cfg.summation)?;
    let energy = near_field_energy(&sol.phi, &ops.s_c, &ops.kstar_c, &cfg.summation, cfg.output.grid_spacing)?;
    let sp = spectrum_of(cfg)?;
    let d = &sp.decomposition;
    let set = resonance_index_set(d, &m, cfg.eta0)?;
    let report = resonance_report(d, &m)?;

    let mut dens = Table::new("densities.csv", &["node", "x", "y", "phi_re", "phi_im", "psi_re", "psi_im"]);
    for (i, x) in cfg.curve.nodes().iter().enumerate() {
        dens.push(vec![
            i.to_string(),
            num(x[0]),
            num(x[1]),
            num(sol.phi[i].re),
            num(sol.phi[i].im),
            num(sol.psi[i].re),
            num(sol.psi[i].im),
        ]);
    }

    let h = cfg.output.field_spacing;
    let m_pts = (1.0 / h).round().max(1.0) as usize;
    let pts: Vec<[f64; 2]> =
        (0..m_pts * m_pts).map(|i| [((i % m_pts) as f64 + 0.5) / m_pts as f64, ((i / m_pts) as f64 + 0.5) / m_pts as f64]).collect();
    let values: Vec<bloch_plasmon::Result<(C64, Region)>> = pts
        .par_iter()
        .map(|&x| {
            let region = field.region(x);
            match field.value_grad(x) {
                Ok((u, _, r)) => Ok((u, r)),
                Err(Error::Geometry(_)) => field.value_grad_from(x, region).map(|(u, _)| (u, region)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut nf = Table::new("near_field.csv", &["x", "y", "u_re", "u_im", "region"]);
    for (x, v) in pts.iter().zip(values) {
        let (u, r) = v?;
        nf.push(vec![num(x[0]), num(x[1]), num(u.re), num(u.im), region_name(r).to_string()]);
    }

    let mut en = Table::new(
        "energy.csv",
        &[
            "omega",
            "energy",
            "energy_sq",
            "volume_term",
            "boundary_term",
            "grid_energy",
            "discrepancy",
            "residual",
            "condition_s_c",
            "in_regime",
        ],
    );
    en.push(vec![
        num(omega),
        num(energy.energy),
        num(energy.energy_sq),
        num(energy.volume_term),
        num(energy.boundary_term),
        num(energy.grid_energy),
        num(energy.discrepancy),
        num(sol.residual),
        num(sol.condition_s_c),
        sol.in_regime.to_string(),
    ]);

    let mut res = Table::new("resonance.csv", &["j", "lambda", "contrast_gap", "tau_abs", "resonant"]);
    for e in &report {
        res.push(vec![
            e.j.to_string(),
            num(e.lambda_j),
            num(e.contrast_gap),
            num(e.tau_abs),
            set.indices.contains(&e.j).to_string(),
        ]);
    }
    let summary = vec![
        format!("energy {}", num(energy.energy)),
        format!("grid cross-check {} (discrepancy {})", num(energy.grid_energy), num(energy.discrepancy)),
        format!("system residual {}", num(sol.residual)),
        format!("resonant modes {:?} (eta0 {})", set.indices, cfg.eta0),
    ];
    Ok(Report { tables: vec![dens, nf, en, res], summary, outcome: Outcome::Ok })
}

fn blowup_setup(cfg: &RunConfig, mode: usize, design: DesignOptions) -> anyhow::Result<(BlowupSetup, DrudeParams)> {
    let omega = cfg.omega.ok_or_else(|| anyhow!("solver.omega is required"))?;
    let mats = cfg.materials.as_ref().ok_or_else(|| anyhow!("[materials] is required"))?;
    let base = mats.drude().ok_or_else(|| anyhow!("[materials.drude] is required"))?;
    let src = cfg.source.ok_or_else(|| anyhow!("[source] is required"))?;
    let sp = spectrum_of(cfg)?;
    let lambda_j = design_target(&sp.decomposition, mode)?;
    let setup = BlowupSetup {
        alpha: cfg.alpha,
        curve: cfg.curve.clone(),
        cfg: cfg.summation,
        source: src,
        lambda_j,
        eps_m: mats.eps_m,
        mu_m: mats.mu_m,
        eps_c: mats.eps_c,
        omega,
        design,
        solver: cfg.solver,
        grid_spacing: cfg.output.grid_spacing,
        max_discrepancy: cfg.output.max_discrepancy,
    };
    Ok((setup, base))
}

pub fn sweep(cfg: &RunConfig) -> anyhow::Result<Report> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| anyhow!("[sweep] is required"))?;
    let design = cfg.design.as_ref().map(|d| d.options).unwrap_or_default();
    let (setup, base) = blowup_setup(cfg, sw.mode, design)?;
    let table = sweep_blowup(&setup, &base, sw.axis, &sw.values)?;
    let mut t = Table::new(
        "sweep.csv",
        &[
            "value",
            "tau",
            "F",
            "mu_c_re",
            "mu_c_im",
            "sigma",
            "delta",
            "energy",
            "residual",
            "discrepancy",
            "in_regime",
            "included",
            "note",
        ],
    );
    for r in &table.rows {
        t.push(vec![
            num(r.value),
            num(r.tau),
            num(r.filling),
            num(r.mu_c.re),
            num(r.mu_c.im),
            num(r.sigma),
            num(r.delta),
            num(r.energy),
            num(r.residual),
            num(r.discrepancy),
            r.in_regime.to_string(),
            r.included.to_string(),
            r.note.clone().unwrap_or_default(),
        ]);
    }
    let mut summary = vec![
        format!("axis {} mode {} lambda {}", table.axis.name(), sw.mode, num(setup.lambda_j)),
        format!("points {} included {}", table.rows.len(), table.included()),
    ];
    let outcome = match table.slope {
        Some(s) => {
            summary.push(format!("log-log slope of energy vs {} {}", table.axis.name(), num(s)));
            Outcome::Ok
        }
        None if sw.values.len() == 1 => {
            summary.push("single point: no fit".into());
            Outcome::Ok
        }
        None => {
            summary.push("fewer than two valid points: no fit".into());
            Outcome::InsufficientPoints
        }
    };
    Ok(Report { tables: vec![t], summary, outcome })
}

pub fn design(cfg: &RunConfig) -> anyhow::Result<Report> {
    let dc = cfg.design.as_ref().ok_or_else(|| anyhow!("[design] is required"))?;
    let (setup, base) = blowup_setup(cfg, dc.mode, dc.options)?;
    let designed: DesignResult = match dc.free {
        FreeParameter::Tau => design_relaxation_rate(setup.lambda_j, setup.mu_m, &base, setup.omega, &dc.options)?,
        FreeParameter::Filling => design_filling_factor(setup.lambda_j, setup.mu_m, &base, setup.omega, &dc.options)?,
    };
    let with = |v: f64| match dc.free {
        FreeParameter::Tau => designed.params.with_tau(v),
        FreeParameter::Filling => designed.params.with_filling(v),
    };
    let mut t = Table::new("design.csv", &["label", "tau", "F", "energy", "discrepancy", "delta"]);
    let mut energies = Vec::new();
    for (label, v) in [("designed", designed.value), ("detuned_down", designed.value / 10.0), ("detuned_up", designed.value * 10.0)] {
        let p = with(v);
        if p.validate().is_err() {
            continue;
        }
        let s = drude_energy(&setup, &p)?;
        energies.push((label, s.energy.energy));
        t.push(vec![
            label.to_string(),
            num(p.tau),
            num(p.filling),
            num(s.energy.energy),
            num(s.energy.discrepancy),
            num(s.response.delta),
        ]);
    }
    let name = match dc.free {
        FreeParameter::Tau => "tau",
        FreeParameter::Filling => "F",
    };
    let mut summary = vec![
        format!("target mode {} lambda {}", dc.mode, num(setup.lambda_j)),
        format!("designed {name} {}", num(designed.value)),
        format!("resonance residual {} after {} bisections", num(designed.residual), designed.iterations),
    ];
    let on = energies[0].1;
    for (label, e) in &energies[1..] {
        summary.push(format!("energy ratio designed/{label} {}", num(on / e)));
    }
    Ok(Report { tables: vec![t], summary, outcome: Outcome::Ok })
}

pub fn verify(cfg: &RunConfig) -> anyhow::Result<Report> {
    let checks = verify::battery(cfg);
    let mut t = Table::new("verify.csv", &["check", "measured", "threshold", "passed", "note"]);
    let mut summary = Vec::new();
    for c in &checks {
        t.push(vec![c.name.to_string(), num(c.measured), num(c.threshold), c.passed.to_string(), c.note.clone()]);
        summary.push(format!(
            "{} {} measured {} threshold {}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            num(c.measured),
            num(c.threshold),
            if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) }
        ));
    }
    let outcome = if checks.iter().all(|c| c.passed) { Outcome::Ok } else { Outcome::ChecksFailed };
    Ok(Report { tables: vec![t], summary, outcome })
}

/// Process exit code for a library error.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => 4,
        Some(Error::Parameter(_) | Error::Geometry(_) | Error::Domain(_) | Error::Regime(_)) => 2,
        Some(_) => 3,
        None if e.downcast_ref::<crate::config::ValidationError>().is_some() => 2,
        None => 1,
    }
}

//! Execution of single experiments. Nothing here touches the filesystem:
//! every experiment returns its tables as bytes.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wrg_core::dynamics::{
    correlator_convergence, dynamics_error, lightcone_fit, lightcone_grid, max_group_velocity, DynamicsSetup,
    FitOptions,
};
use wrg_core::gaussian::{GaussianState, Insertion, WeylDescriptor};
use wrg_core::lattice::{ground_state, HarmonicModel, LatticeSpec};
use wrg_core::mera::verify_layer;
use wrg_core::rg::{
    coarse_grain, flow_report, flow_states, limit_state_with_cutoff, push_descriptor, scaling_limit_state, FlowMass,
    LimitOptions, LimitState,
};
use wrg_core::wavelet::{cascade_evaluate, daubechies_filter};
use wrg_core::Result;

use crate::config::{parse_descriptor, parse_insertion, Experiment, Lattice};
use crate::output::{float, Table};

/// A hard invariant evaluated during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
    pub summary: Value,
}

pub fn execute(exp: &Experiment) -> Result<Outcome> {
    match exp {
        Experiment::Filters { ks, cascade_level, symbol_points, symbol_kmax, .. } => {
            filters(ks, *cascade_level, *symbol_points, *symbol_kmax)
        }
        Experiment::FilterWeights { k, levels, .. } => filter_weights(*k, *levels),
        Experiment::Triangle { lattice, m, k, n_max, m_max, .. } => triangle(lattice, *m, *k, *n_max, *m_max),
        Experiment::GroundState { lattice, mass, exclude_zero_mode, .. } => {
            ground(lattice, *mass, *exclude_zero_mode)
        }
        Experiment::RgFlow { lattice, mass, k, m_max, limit_tol, .. } => rg_flow(lattice, *mass, *k, *m_max, *limit_tol),
        Experiment::Limit { lattice, m, k, tol, allow_divergent, cutoff_label, .. } => {
            limit(lattice, *m, *k, *tol, *allow_divergent, *cutoff_label)
        }
        Experiment::Lightcone { lattice, m, t_max, t_steps, .. } => lightcone(lattice, *m, *t_max, *t_steps),
        Experiment::DynError { lattice, k, m, n_prime_max, times, deltas, k_cut, u, v, descriptors, .. } => {
            let setup =
                DynamicsSetup { spec: lattice.spec()?, bank: daubechies_filter(*k)?, m: *m, k_cut: *k_cut, u: u.clone(), v: v.clone() };
            dyn_error(&setup, *n_prime_max, times, deltas, descriptors)
        }
        Experiment::CorrConv { lattice, k, m, a, b, t, x, n_primes, k_cut, .. } => {
            corr_conv(lattice, *k, *m, a, b, *t, x, n_primes, *k_cut)
        }
        Experiment::MeraCheck { lattice, k, m, cutoff_label, descriptors, .. } => {
            mera_check(lattice, *k, *m, *cutoff_label, descriptors)
        }
    }
}

fn model(spec: LatticeSpec, mass: FlowMass) -> Result<HarmonicModel> {
    match mass {
        FlowMass::Trajectory(m) => HarmonicModel::on_trajectory(spec, m),
        FlowMass::FixedMu(mu) => HarmonicModel::with_mu(spec, mu),
    }
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

fn header(names: &[String]) -> Vec<&str> {
    names.iter().map(String::as_str).collect()
}

/// Worst uncertainty violation over a family of states.
fn worst_violation<'a>(states: impl IntoIterator<Item = &'a GaussianState>) -> f64 {
    states.into_iter().map(GaussianState::uncertainty_violation).fold(f64::NEG_INFINITY, f64::max)
}

fn uncertainty_check<'a>(states: impl IntoIterator<Item = &'a GaussianState>) -> Check {
    Check::at_most("relative uncertainty violation", worst_violation(states), 1e-12)
}

/// Position-space kernels as `site, x_j..., phiphi, pipi`.
fn kernel_table(state: &GaussianState) -> Vec<u8> {
    let spec = state.spec();
    let d = spec.d();
    let mut names = vec!["site".to_string()];
    names.extend(axis_names("x", d));
    names.extend(["phiphi".to_string(), "pipi".to_string()]);
    let mut t = Table::new(&header(&names));
    let (kp, kpi) = (state.phiphi_kernel(), state.pipi_kernel());
    for r in 0..spec.volume() {
        let mut row = vec![r.to_string()];
        row.extend(spec.position(r)[..d].iter().map(|x| float(*x)));
        row.extend([float(kp[r]), float(kpi[r])]);
        t.row(row);
    }
    t.finish()
}

/// Momentum-space symbols as `q, k_j..., phiphi, pipi`, with extra columns.
fn symbol_table(state: &GaussianState, extra: Option<(&str, &dyn Fn(usize) -> f64)>) -> Vec<u8> {
    let spec = state.spec();
    let d = spec.d();
    let mut names = vec!["q".to_string()];
    names.extend(axis_names("k", d));
    if let Some((name, _)) = extra {
        names.push(name.to_string());
    }
    names.extend(["phiphi".to_string(), "pipi".to_string()]);
    let mut t = Table::new(&header(&names));
    for q in 0..spec.volume() {
        let mut row = vec![q.to_string()];
        row.extend(spec.momentum(q)[..d].iter().map(|k| float(*k)));
        if let Some((_, f)) = extra {
            row.push(float(f(q)));
        }
        row.extend([float(state.phiphi()[q]), float(state.pipi()[q])]);
        t.row(row);
    }
    t.finish()
}

fn filters(ks: &[usize], cascade_level: u32, symbol_points: usize, symbol_kmax: f64) -> Result<Outcome> {
    let mut taps = Table::new(&["k", "n", "h", "g"]);
    let mut residuals = Table::new(&[
        "k",
        "normalization",
        "orthonormality",
        "highpass_orthogonality",
        "highpass_orthonormality",
        "vanishing_moments",
    ]);
    let mut files = Vec::new();
    let mut checks = Vec::new();
    let mut summary = Vec::new();
    for &k in ks {
        let bank = daubechies_filter(k)?;
        for (n, (h, g)) in bank.h().iter().zip(bank.g()).enumerate() {
            taps.row([k.to_string(), n.to_string(), float(*h), float(*g)]);
        }
        let r = bank.residuals();
        residuals.row([
            k.to_string(),
            float(r.normalization),
            float(r.orthonormality),
            float(r.highpass_orthogonality),
            float(r.highpass_orthonormality),
            float(r.vanishing_moments),
        ]);
        checks.push(Check::at_most(format!("K={k} filter identities"), r.max(), 1e-12));
        let mut entry = json!({ "k": k, "max_residual": r.max() });
        if cascade_level > 0 {
            let s = cascade_evaluate(&bank, cascade_level)?;
            let mut t = Table::new(&["x", "s"]);
            for (i, v) in s.values.iter().enumerate() {
                t.row([float(s.x(i)), float(*v)]);
            }
            files.push((format!("cascade_k{k}.csv"), t.finish()));
            entry["partition_of_unity"] = json!(s.partition_of_unity_residual());
        }
        if symbol_points > 0 {
            let mut t = Table::new(&["k", "re", "im", "abs"]);
            for i in 0..symbol_points {
                let xi = symbol_kmax * i as f64 / (symbol_points.max(2) - 1) as f64;
                let s = bank.shat(xi);
                t.row([float(xi), float(s.re), float(s.im), float(s.norm())]);
            }
            files.push((format!("symbol_k{k}.csv"), t.finish()));
        }
        summary.push(entry);
    }
    files.insert(0, ("taps.csv".into(), taps.finish()));
    files.insert(1, ("residuals.csv".into(), residuals.finish()));
    Ok(Outcome { files, checks, summary: json!({ "filters": summary }) })
}

fn filter_weights(k: usize, levels: u32) -> Result<Outcome> {
    let haar = daubechies_filter(1)?;
    let bank = daubechies_filter(k)?;
    // a torus wide enough that the filter support never wraps
    let spec = LatticeSpec::new(1, (2 * k) as f64, 1.0, 0)?;
    let origin = WeylDescriptor::field(spec, 0);
    let mut t = Table::new(&["m_steps", "x", "block_spin", "wavelet"]);
    let mut checks = Vec::new();
    for m in 1..=levels {
        let a = push_descriptor(&origin, &haar, m)?;
        let b = push_descriptor(&origin, &bank, m)?;
        let fine = a.spec;
        let mut rows: Vec<(f64, f64, f64)> = (0..fine.volume())
            .filter(|&y| a.f[y] != 0.0 || b.f[y] != 0.0)
            .map(|y| (fine.position(y)[0], a.f[y], b.f[y]))
            .collect();
        rows.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (x, h, w) in rows {
            t.row([m.to_string(), float(x), float(h), float(w)]);
        }
        let sums = (a.f.iter().sum::<f64>() - 1.0).abs().max((b.f.iter().sum::<f64>() - 1.0).abs());
        checks.push(Check::at_most(format!("M={m} weights sum to one"), sums, 1e-12));
    }
    Ok(Outcome {
        files: vec![("weights.csv".into(), t.finish())],
        checks,
        summary: json!({ "k": k, "levels": levels }),
    })
}

fn triangle(lattice: &Lattice, m: f64, k: usize, n_max: u32, m_max: u32) -> Result<Outcome> {
    let base = lattice.spec()?;
    let bank = daubechies_filter(k)?;
    let mut t = Table::new(&["n", "m_steps", "r", "x", "phiphi", "pipi"]);
    let mut states = Vec::new();
    for n in 0..=n_max {
        let spec = base.finer(n)?;
        for steps in 0..=m_max {
            let fine = spec.finer(steps)?;
            let state = coarse_grain(&ground_state(&HarmonicModel::on_trajectory(fine, m)?)?, &bank, steps)?;
            let (kp, kpi) = (state.phiphi_kernel(), state.pipi_kernel());
            for r in 0..=spec.l_n() {
                let site = spec.site(&[r as i64]);
                t.row([
                    spec.scale().to_string(),
                    steps.to_string(),
                    r.to_string(),
                    float(r as f64 * spec.eps_n()),
                    float(kp[site]),
                    float(kpi[site]),
                ]);
            }
            states.push(state);
        }
    }
    Ok(Outcome {
        files: vec![("triangle.csv".into(), t.finish())],
        checks: vec![uncertainty_check(&states)],
        summary: json!({ "states": states.len() }),
    })
}

fn ground(lattice: &Lattice, mass: FlowMass, exclude_zero_mode: bool) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let mut model = model(spec, mass)?;
    if exclude_zero_mode {
        model = model.excluding_zero_mode();
    }
    let state = ground_state(&model)?;
    let gamma = |q: usize| model.dispersion_at(q);
    let purity = (0..spec.volume())
        .filter(|q| !state.is_excluded(*q))
        .map(|q| (state.phiphi()[q] * state.pipi()[q] - 0.25).abs())
        .fold(0.0, f64::max);
    Ok(Outcome {
        files: vec![
            ("modes.csv".into(), symbol_table(&state, Some(("gamma", &gamma)))),
            ("kernel.csv".into(), kernel_table(&state)),
        ],
        checks: vec![Check::at_most("mode purity |ab - 1/4|", purity, 1e-12), uncertainty_check([&state])],
        summary: json!({
            "energy": model.energy(&state)?,
            "mu2": model.mu2(),
            "excluded_modes": state.excluded(),
        }),
    })
}

fn rg_flow(lattice: &Lattice, mass: FlowMass, k: usize, m_max: u32, limit_tol: Option<f64>) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let bank = daubechies_filter(k)?;
    let limit = match (limit_tol, mass) {
        (Some(tol), FlowMass::Trajectory(m)) => {
            Some(scaling_limit_state(&spec, m, &bank, LimitOptions { tol, ..LimitOptions::default() })?)
        }
        _ => None,
    };
    let states = flow_states(&spec, mass, &bank, m_max)?;
    let report = flow_report(&spec, mass, &bank, m_max, limit.as_ref())?;
    let mut t = Table::new(&[
        "m_steps",
        "phiphi0",
        "pipi0",
        "phi_locality",
        "pi_locality",
        "step_distance",
        "limit_residual",
    ]);
    for r in &report.rows {
        t.row([
            r.m_steps.to_string(),
            float(r.phiphi0),
            float(r.pipi0),
            float(r.phi_locality),
            float(r.pi_locality),
            float(r.step_distance),
            float(r.limit_residual),
        ]);
    }
    let decreasing = report.rows.windows(2).all(|w| w[1].limit_residual < w[0].limit_residual);
    let mut summary = json!({
        "extrapolated_phiphi0": report.extrapolated.0,
        "extrapolated_pipi0": report.extrapolated.1,
    });
    if let Some(l) = &limit {
        summary["limit_phiphi0"] = json!(l.state.phiphi_kernel()[0]);
        summary["limit_pipi0"] = json!(l.state.pipi_kernel()[0]);
        summary["limit_cutoff_label"] = json!(l.cutoff_label);
        summary["residuals_decreasing"] = json!(decreasing);
    }
    Ok(Outcome { files: vec![("flow.csv".into(), t.finish())], checks: vec![uncertainty_check(&states)], summary })
}

fn limit_summary(l: &LimitState) -> Value {
    json!({
        "m": l.m,
        "k": l.k,
        "cutoff_label": l.cutoff_label,
        "cutoff": l.cutoff(),
        "tail_phi": l.tail_phi,
        "tail_pi": l.tail_pi,
        "pi_divergent": l.pi_divergent,
    })
}

fn limit(lattice: &Lattice, m: f64, k: usize, tol: f64, allow_divergent: bool, cutoff_label: Option<u64>) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let bank = daubechies_filter(k)?;
    let l = match cutoff_label {
        Some(c) => limit_state_with_cutoff(&spec, m, &bank, c)?,
        None => scaling_limit_state(&spec, m, &bank, LimitOptions { tol, allow_divergent, ..LimitOptions::default() })?,
    };
    Ok(Outcome {
        files: vec![("kernel.csv".into(), kernel_table(&l.state)), ("symbols.csv".into(), symbol_table(&l.state, None))],
        checks: vec![uncertainty_check([&l.state])],
        summary: limit_summary(&l),
    })
}

fn lightcone(lattice: &Lattice, m: f64, t_max: f64, t_steps: usize) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let model = HarmonicModel::on_trajectory(spec, m)?;
    let times: Vec<f64> = (1..=t_steps).map(|i| t_max * i as f64 / t_steps as f64).collect();
    let grid = lightcone_grid(&model, &times);
    let mut t = Table::new(&["t", "r", "abs_commutator"]);
    let mut exterior: f64 = 0.0;
    for (i, ti) in grid.times.iter().enumerate() {
        for (j, r) in grid.radii.iter().enumerate() {
            t.row([float(*ti), float(*r), float(grid.values[i][j])]);
            if *r > 3.0 * ti + 0.1 {
                exterior = exterior.max(grid.values[i][j]);
            }
        }
    }
    let fit = match lightcone_fit(&grid, spec.eps_n(), FitOptions::default()) {
        Ok(f) => serde_json::to_value(f).expect("fits serialize"),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let v = max_group_velocity(&model);
    Ok(Outcome {
        files: vec![("commutator.csv".into(), t.finish())],
        checks: vec![Check::at_most("max group velocity", v, 1.0)],
        summary: json!({ "fit": fit, "max_group_velocity": v, "max_exterior_beyond_3t": exterior, "sites": spec.volume() }),
    })
}

fn dyn_error(setup: &DynamicsSetup, n_prime_max: u32, times: &[f64], deltas: &[f64], descriptors: &[Vec<String>]) -> Result<Outcome> {
    let spec = setup.spec;
    let mut names: Vec<String> = ["descriptor", "n_prime", "t", "lhs"].iter().map(|s| s.to_string()).collect();
    names.extend(deltas.iter().map(|d| format!("rhs_delta_{d}")));
    names.extend(deltas.iter().map(|d| format!("ratio_delta_{d}")));
    let mut t = Table::new(&header(&names));
    let mut sup_ratio = vec![0.0f64; deltas.len()];
    let mut worst_final: f64 = 0.0;
    let mut bad = 0usize;
    for (i, terms) in descriptors.iter().enumerate() {
        let w = parse_descriptor(spec, terms).map_err(wrg_core::Error::Domain)?;
        for n_prime in spec.scale() + 1..=n_prime_max {
            for &time in times {
                let e = dynamics_error(setup, &w, n_prime, time, deltas)?;
                if !(e.lhs >= 0.0 && e.lhs.is_finite()) {
                    bad += 1;
                }
                if n_prime == n_prime_max {
                    worst_final = worst_final.max(e.lhs);
                }
                let mut row = vec![i.to_string(), n_prime.to_string(), float(time), float(e.lhs)];
                row.extend(e.rhs.iter().map(|(_, r)| float(*r)));
                for (j, (_, r)) in e.rhs.iter().enumerate() {
                    let ratio = if *r > 0.0 { e.lhs / r } else { f64::NAN };
                    if ratio.is_finite() {
                        sup_ratio[j] = sup_ratio[j].max(ratio);
                    }
                    row.push(float(ratio));
                }
                t.row(row);
            }
        }
    }
    let ratios: Vec<Value> = deltas.iter().zip(&sup_ratio).map(|(d, r)| json!({ "delta": d, "sup_ratio": r })).collect();
    Ok(Outcome {
        files: vec![("dyn_error.csv".into(), t.finish())],
        checks: vec![Check::at_most("non-finite or negative lhs values", bad as f64, 0.0)],
        summary: json!({ "finest_lhs": worst_final, "ratios": ratios }),
    })
}

#[allow(clippy::too_many_arguments)]
fn corr_conv(
    lattice: &Lattice,
    k: usize,
    m: f64,
    a: &[String],
    b: &[String],
    t: f64,
    x: &[f64],
    n_primes: &[u32],
    k_cut: f64,
) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let bank = daubechies_filter(k)?;
    let parse = |v: &[String]| -> Result<Vec<Insertion>> {
        v.iter().map(|s| parse_insertion(s).map_err(wrg_core::Error::Domain)).collect()
    };
    let (a, b) = (parse(a)?, parse(b)?);
    let mut table = Table::new(&["n_prime", "lattice_re", "lattice_im", "continuum_re", "continuum_im", "difference"]);
    let mut diffs = Vec::new();
    for &n in n_primes {
        let c = correlator_convergence(&spec, n, &bank, m, &a, &b, t, x, k_cut)?;
        table.row([
            n.to_string(),
            float(c.lattice.re),
            float(c.lattice.im),
            float(c.continuum.re),
            float(c.continuum.im),
            float(c.difference),
        ]);
        diffs.push(c.difference);
    }
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        files: vec![("correlators.csv".into(), table.finish())],
        checks: vec![Check::at_most(
            "non-finite differences",
            diffs.iter().filter(|d| !d.is_finite()).count() as f64,
            0.0,
        )],
        summary: json!({ "differences": diffs, "decreasing": decreasing }),
    })
}

/// Five fixed descriptors mixing field and momentum insertions.
pub fn probe_descriptors(spec: LatticeSpec) -> Vec<WeylDescriptor> {
    let v = spec.volume();
    (0..5)
        .map(|j| {
            let mut f = vec![0.0; v];
            let mut g = vec![0.0; v];
            f[j % v] = 1.0;
            f[(3 * j + 1) % v] -= 0.5;
            g[(j + 1) % v] = 0.5;
            WeylDescriptor::new(spec, f, g).expect("sizes match the lattice")
        })
        .collect()
}

fn mera_check(lattice: &Lattice, k: usize, m: f64, cutoff_label: u64, descriptors: &[Vec<String>]) -> Result<Outcome> {
    let spec = lattice.spec()?;
    let probes = if descriptors.is_empty() {
        probe_descriptors(spec)
    } else {
        descriptors.iter().map(|d| parse_descriptor(spec, d).map_err(wrg_core::Error::Domain)).collect::<Result<_>>()?
    };
    let bank = daubechies_filter(k)?;
    let coarse = limit_state_with_cutoff(&spec, m, &bank, cutoff_label)?;
    let fine = limit_state_with_cutoff(&spec.finer(1)?, m, &bank, cutoff_label)?;
    let r = verify_layer(&spec, &bank, &coarse, &fine, &probes)?;
    let mut t = Table::new(&["quantity", "value"]);
    let entries = [
        ("dwt_orthogonality", r.dwt_orthogonality),
        ("lowpass_residual", r.lowpass_residual),
        ("phi_factorization", r.phi_factorization),
        ("pi_factorization", r.pi_factorization),
        ("dwt_factorization", r.dwt_factorization),
        ("pairing", r.pairing),
        ("sublattice_ccr", r.sublattice_ccr),
        ("min_nonsingular_symbol", r.min_nonsingular_symbol),
        ("gram", r.gram),
        ("channel", r.channel),
    ];
    for (name, value) in entries {
        t.row([name.to_string(), float(value)]);
    }
    let checks = vec![
        Check::at_most("DWT orthogonality", r.dwt_orthogonality, 1e-12),
        Check::at_most("low-pass rows versus the scaling map", r.lowpass_residual, 1e-12),
        Check::at_most("field-branch factorization on nonsingular modes", r.phi_factorization, 1e-12),
        Check::at_most("factorization through the wavelet transform", r.dwt_factorization, 1e-12),
        Check::at_most("sublattice CCR", r.sublattice_ccr, 1e-12),
        Check::at_most("coherent-state Gram matrices", r.gram, 1e-6),
        Check::at_most("coarse-graining channel", r.channel, 1e-8),
    ];
    Ok(Outcome {
        files: vec![("layer.csv".into(), t.finish())],
        checks,
        summary: serde_json::to_value(&r).expect("reports serialize"),
    })
}

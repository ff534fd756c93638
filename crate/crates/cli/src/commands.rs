//! One function per subcommand; each turns a resolved scenario into a [`Report`].

use matscat::bc::BcError;
use matscat::fmt_float;
use matscat::linalg::{c, CVec};
use matscat::scattering::{high_energy_model, loglog_slope, scattering_matrices};
use matscat::spectral::{
    bound_states, levinson_check, ssf, trace_formula_check, KappaRange, LevinsonOptions, ResolventFunction,
    TraceOptions,
};
use matscat::transforms::{
    fourier_apply, parseval_check, resolvent_kernel, scattering_operator_check, GridFunction, Quadrature, Sign,
    SpectralParameter,
};
use serde_json::json;

use crate::config::{RangeSpec, Scenario};
use crate::output::{matrix_cells, matrix_columns, matrix_json, summary, Csv, Report};
use crate::CliError;

/// Smallest wavenumber of default k grids; the scattering formulas exclude `k = 0`.
pub const K_MIN: f64 = 0.05;

pub fn validate_bc(s: &Scenario) -> Result<Report, CliError> {
    let v = s.validation()?;
    let csv = Csv::key_values(&[
        ("ok", f64::from(u8::from(v.ok))),
        ("hermiticity_defect", v.hermiticity_defect),
        ("min_eig", v.min_eig),
        ("max_eig", v.max_eig),
    ]);
    let text = summary(
        "validate-bc",
        &[
            ("channels", s.n.to_string()),
            ("valid", v.ok.to_string()),
            ("‖A†B − B†A‖", fmt_float(v.hermiticity_defect)),
            ("eig(A†A + B†B)", format!("[{}, {}]", fmt_float(v.min_eig), fmt_float(v.max_eig))),
        ],
    );
    let mut report = Report::new(csv.render(), json!({ "n": s.n, "report": v }), text);
    if !v.ok {
        let why = "A†B is not Hermitian or rank[A; B] < n".to_string();
        report.failure = Some(matscat::Error::from(BcError::InvalidBc(why)).into());
    }
    Ok(report)
}

pub fn normal_form(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let nf = bp.normal_form().map_err(matscat::Error::from)?;
    let kinds: Vec<_> = (0..nf.n()).map(|j| nf.kind(j)).collect();
    let mut csv = Csv::new(["channel", "theta", "kind"]);
    for (j, (th, kind)) in nf.thetas.iter().zip(&kinds).enumerate() {
        csv.push(vec![j.to_string(), fmt_float(*th), format!("{kind:?}").to_lowercase()]);
    }
    let json = json!({
        "normal_form": nf,
        "kinds": kinds,
        "m": matrix_json(&nf.m),
        "t1": matrix_json(&nf.t1),
        "s_inf": matrix_json(&nf.s_inf()),
    });
    let text = summary(
        "normal-form",
        &[
            ("channels (mixed/dirichlet/neumann)", format!("{}/{}/{}", nf.n_mixed, nf.n_dirichlet, nf.n_neumann)),
            ("thetas", nf.thetas.iter().map(|t| fmt_float(*t)).collect::<Vec<_>>().join(", ")),
            ("reconstruction defect", fmt_float(nf.reconstruction_defect)),
            ("near-degenerate", nf.near_degenerate.to_string()),
        ],
    );
    Ok(Report::new(csv.render(), json, text))
}

pub fn smatrix(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let ks = s.grid("k_grid", s.config.k_grid, RangeSpec::linear(K_MIN, 20.0, 100))?;
    let samples = scattering_matrices(&s.potential, &bp, &ks, &s.ode).map_err(matscat::Error::from)?;
    let mut csv = Csv::new(
        std::iter::once("k".to_string()).chain(matrix_columns("S", s.n)).chain(["unitarity_defect".to_string()]),
    );
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(samples.len());
    for x in &samples {
        worst = worst.max(x.unitarity_defect);
        csv.push_floats(std::iter::once(x.k).chain(matrix_cells(&x.s)).chain([x.unitarity_defect]));
        rows.push(json!({ "k": x.k, "s": matrix_json(&x.s), "unitarity_defect": x.unitarity_defect }));
    }
    let text = summary(
        "smatrix",
        &[
            ("channels", s.n.to_string()),
            ("k points", ks.len().to_string()),
            ("k range", format!("[{}, {}]", fmt_float(ks[0]), fmt_float(ks[ks.len() - 1]))),
            ("max ‖SS† − I‖", fmt_float(worst)),
        ],
    );
    let json = json!({ "n": s.n, "max_unitarity_defect": worst, "samples": rows });
    Ok(Report::new(csv.render(), json, text))
}

pub fn bound_states_cmd(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let range = match s.config.kappa_range {
        Some(r) => r,
        None => KappaRange::default_for(&s.potential, &bp).map_err(matscat::Error::from)?,
    };
    let found = bound_states(&s.potential, &bp, range, &s.bound_options()).map_err(matscat::Error::from)?;
    let mut csv = Csv::new(["energy", "kappa", "multiplicity", "null_ratio"]);
    for b in &found {
        csv.push(vec![fmt_float(b.energy), fmt_float(b.kappa), b.multiplicity.to_string(), fmt_float(b.null_ratio)]);
    }
    let total: usize = found.iter().map(|b| b.multiplicity).sum();
    let energies = found.iter().map(|b| format!("{} (×{})", fmt_float(b.energy), b.multiplicity)).collect::<Vec<_>>();
    let text = summary(
        "bound-states",
        &[
            ("kappa range", format!("[{}, {}]", fmt_float(range.min), fmt_float(range.max))),
            ("count (with multiplicity)", total.to_string()),
            ("energies", if energies.is_empty() { "none".into() } else { energies.join(", ") }),
        ],
    );
    let json = json!({ "kappa_range": range, "count": total, "states": found });
    Ok(Report::new(csv.render(), json, text))
}

pub fn ssf_cmd(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let es = s.grid("e_grid", s.config.e_grid, RangeSpec::log(0.01, 100.0, 100))?;
    let samples = ssf(&s.potential, &bp, &es, &s.bound_options()).map_err(matscat::Error::from)?;
    let mut csv = Csv::new(["energy", "xi", "birman_krein_residual"]);
    for x in &samples {
        csv.push(vec![fmt_float(x.energy), fmt_float(x.xi), x.birman_krein_residual.map(fmt_float).unwrap_or_default()]);
    }
    let bk = samples.iter().filter_map(|x| x.birman_krein_residual).fold(0.0, f64::max);
    let text = summary(
        "ssf",
        &[
            ("energy points", samples.len().to_string()),
            ("ξ at first/last energy", format!("{} / {}", fmt_float(samples[0].xi), fmt_float(samples[samples.len() - 1].xi))),
            ("max Birman–Krein residual", fmt_float(bk)),
        ],
    );
    let json = json!({ "max_birman_krein_residual": bk, "samples": samples });
    Ok(Report::new(csv.render(), json, text))
}

pub fn levinson(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let lo = LevinsonOptions { bound: s.bound_options(), ..s.config.tolerances.levinson };
    let r = levinson_check(&s.potential, &bp, &lo).map_err(matscat::Error::from)?;
    let csv = Csv::key_values(&[
        ("xi0_plus", r.xi0_plus),
        ("n", r.n as f64),
        ("mu", r.mu as f64),
        ("N", r.bound_count as f64),
        ("predicted", r.predicted),
        ("defect", r.defect),
    ]);
    let text = summary(
        "levinson",
        &[
            ("ξ(0+)", fmt_float(r.xi0_plus)),
            ("n, μ, N", format!("{}, {}, {}", r.n, r.mu, r.bound_count)),
            ("predicted ½(n − μ) − N", fmt_float(r.predicted)),
            ("defect", fmt_float(r.defect)),
        ],
    );
    Ok(Report::new(csv.render(), serde_json::to_value(&r).expect("serialisable"), text))
}

pub fn resolvent(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let z = s.config.z.unwrap_or(SpectralParameter::Off { re: -4.0, im: 0.0 });
    let xs = s.grid("x_grid", s.config.x_grid, RangeSpec::linear(0.0, 5.0, 51))?;
    let k = resolvent_kernel(&s.potential, &bp, z, &xs, &s.config.tolerances.resolvent)
        .map_err(matscat::Error::from)?;
    let sup = k.values.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let text = summary(
        "resolvent",
        &[
            ("z", format!("{}", k.z.energy())),
            ("grid points", xs.len().to_string()),
            ("node spacing", fmt_float(k.node_spacing)),
            ("cond(I + Q)", fmt_float(k.cond)),
            ("pole distance", k.pole_distance.map(fmt_float).unwrap_or_else(|| "-".into())),
            ("max ‖K(x, y)‖", fmt_float(sup)),
        ],
    );
    let json = json!({ "kernel": k, "max_norm": sup });
    Ok(Report::new(k.to_csv(), json, text))
}

pub fn transforms_check(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let t = s.config.transforms;
    if !(t.x_step > 0.0 && t.x_max > t.x_step && t.k_max > 0.0 && t.k_panels > 0 && t.k_lo > 0.0 && t.k_hi > t.k_lo) {
        return Err(CliError::config("transforms", "need x_step > 0, x_max > x_step, k_max > 0, 0 < k_lo < k_hi"));
    }
    let n = s.n;
    let gauss = |x: f64, center: f64, width: f64| (-(x - center).powi(2) / (2.0 * width * width)).exp();
    let points = (t.x_max / t.x_step).round() as usize + 1;
    let xq = Quadrature::trapezoid(0.0, t.x_max, points);
    let psi = GridFunction::from_fn(xq.clone(), |x| CVec::from_element(n, c(gauss(x, t.psi_center, t.psi_width), 0.0)))
        .map_err(matscat::Error::from)?;
    let kq = Quadrature::gauss_legendre(0.0, t.k_max, t.k_panels, 8);
    let defl = s.config.tolerances.deflation;
    let lib = |e: matscat::transforms::TransformError| CliError::from(matscat::Error::from(e));
    let mut parseval = Vec::new();
    let mut images = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        parseval.push(parseval_check(&s.potential, &bp, sign, &psi, &kq, &defl, &s.ode).map_err(lib)?);
        images.push(fourier_apply(&s.potential, &bp, sign, &psi, &kq, &s.ode).map_err(lib)?);
    }
    let phase_q = Quadrature::gauss_legendre(t.k_lo, t.k_hi, 20, 8);
    let phi = GridFunction::from_fn(phase_q, |k| CVec::from_element(n, c(gauss(k, t.phi_center, t.phi_width), 0.0)))
        .map_err(matscat::Error::from)?;
    let chk = scattering_operator_check(&s.potential, &bp, &phi, &xq, &s.ode).map_err(lib)?;

    let mut header = vec!["k".to_string()];
    for tag in ["Fplus", "Fminus"] {
        for a in 0..n {
            header.push(format!("re_{tag}_{a}"));
            header.push(format!("im_{tag}_{a}"));
        }
    }
    let mut csv = Csv::new(header);
    for (i, k) in kq.nodes.iter().enumerate() {
        let cells = images.iter().flat_map(|f| f.values[i].iter().flat_map(|z| [z.re, z.im]));
        csv.push_floats(std::iter::once(*k).chain(cells));
    }
    let relative = chk.defect / chk.input_norm;
    let text = summary(
        "transforms-check",
        &[
            ("Parseval defect (+)", fmt_float(parseval[0].defect)),
            ("Parseval defect (−)", fmt_float(parseval[1].defect)),
            ("bound states deflated", parseval[0].bound_states.to_string()),
            ("scattering operator defect / ‖φ‖", fmt_float(relative)),
        ],
    );
    let json = json!({
        "parseval_plus": parseval[0],
        "parseval_minus": parseval[1],
        "scattering_operator": { "defect": chk.defect, "input_norm": chk.input_norm, "relative_defect": relative },
    });
    Ok(Report::new(csv.render(), json, text))
}

pub fn trace_check(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let f = ResolventFunction { shift: s.config.trace_shift.unwrap_or(1.0) };
    let to = TraceOptions { bound: s.bound_options(), ..s.config.tolerances.trace };
    let r = trace_formula_check(&s.potential, &bp, &f, &to).map_err(matscat::Error::from)?;
    let csv = Csv::key_values(&[
        ("lhs", r.lhs),
        ("rhs", r.rhs),
        ("defect", r.defect),
        ("rhs_bound", r.rhs_bound),
        ("rhs_continuous", r.rhs_continuous),
        ("rhs_tail", r.rhs_tail),
        ("lhs_tail", r.lhs_tail),
        ("discrete_count", r.discrete_count as f64),
        ("reference_count", r.reference_count as f64),
    ]);
    let text = summary(
        "trace-check",
        &[
            ("f(E)", format!("1/(E + {})", fmt_float(f.shift))),
            ("discrete side", fmt_float(r.lhs)),
            ("spectral-shift side", fmt_float(r.rhs)),
            ("relative defect", fmt_float(r.defect)),
        ],
    );
    Ok(Report::new(csv.render(), json!({ "shift": f.shift, "report": r }), text))
}

pub fn asymptotics(s: &Scenario) -> Result<Report, CliError> {
    let bp = s.boundary()?;
    let ks = s.grid("k_grid", s.config.k_grid, RangeSpec::log(20.0, 200.0, 16))?;
    let model = high_energy_model(&s.potential, &bp).map_err(matscat::Error::from)?;
    let samples = scattering_matrices(&s.potential, &bp, &ks, &s.ode).map_err(matscat::Error::from)?;
    let mut csv = Csv::new(["k", "remainder", "first_order_remainder"]);
    let mut remainders = Vec::with_capacity(ks.len());
    for x in &samples {
        let rem = (&x.s - model.predict(x.k)).norm();
        let first = (&x.s - &model.s_inf).norm();
        csv.push_floats([x.k, rem, first]);
        remainders.push(rem);
    }
    // exact agreement (e.g. V = 0) leaves nothing to fit
    let fit = remainders.iter().all(|r| *r > 0.0).then(|| loglog_slope(&ks, &remainders));
    let text = summary(
        "asymptotics",
        &[
            ("k range", format!("[{}, {}]", fmt_float(ks[0]), fmt_float(ks[ks.len() - 1]))),
            ("log-log slope of ‖S − S∞ − G/(ik)‖", fit.as_ref().map_or("exact (no remainder)".into(), |f| fmt_float(f.slope))),
            ("max remainder", fmt_float(remainders.iter().copied().fold(0.0, f64::max))),
        ],
    );
    let json = json!({
        "slope": fit.as_ref().map(|f| f.slope),
        "intercept": fit.as_ref().map(|f| f.intercept),
        "s_inf": matrix_json(&model.s_inf),
        "k": ks,
        "remainder": remainders,
    });
    Ok(Report::new(csv.render(), json, text))
}

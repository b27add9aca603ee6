use std::path::Path;
use std::sync::Arc;

use cartan_dual::connection::{
    pairing_defect, transport, transport_matrix, ChartPoint, ConnectionForm, ConstantMetric, Curve, DomainBox,
    GridForm, Loop, MetricField, SharedForm,
};
use cartan_dual::holonomy::{estimate_algebra, sample_holonomy, samples_to_json_lines};
use cartan_dual::liealg::{
    cartan_split, group_factorize, group_involution, matrix_exp, matrix_log, polar_decompose, skew_residual,
    symmetric_residual, theta, AlgebraElement, GroupElement,
};
use cartan_dual::statmanifold::{
    alpha_christoffel, amari_form, connection_form_of, default_domain, family_by_name, fisher_and_amari,
    metric_duality_defect, FisherMetricField, Frame, StatFamily,
};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::{Command, FrameArg, Resolved};
use crate::report::Report;
use crate::InputError;

const DEFAULT_FAMILY: &str = "gaussian1d";

pub fn run(cfg: &Resolved) -> Result<Report, InputError> {
    match cfg.command {
        Command::Split => split(cfg),
        Command::Polar => polar(cfg),
        Command::DualCheck => dual_check(cfg),
        Command::Transport => transport_cmd(cfg),
        Command::Holonomy => holonomy(cfg),
        Command::Duality => duality(cfg),
        Command::StatReport => stat_report(cfg),
    }
}

fn read_json(path: &Path) -> Result<Value, InputError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| InputError(format!("malformed JSON in {} at line {}, column {}: {e}", path.display(), e.line(), e.column())))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, InputError> {
    serde_json::from_value(read_json(path)?)
        .map_err(|e| InputError(format!("{} is not an array of numeric rows: {e}", path.display())))
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, InputError> {
    value.as_ref().ok_or_else(|| InputError(format!("missing --{flag}")))
}

fn dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

fn split(cfg: &Resolved) -> Result<Report, InputError> {
    let x = AlgebraElement::from_rows(&read_rows(require(&cfg.matrix, "matrix")?)?)?;
    let parts = cartan_split(&x);
    let mut r = Report::new();
    r.put("theta", theta(&x).to_rows());
    r.put("kPart", parts.k_part.to_rows());
    r.put("pPart", parts.p_part.to_rows());
    let recon = dist(parts.recombine().matrix(), x.matrix());
    r.put("reconstructionResidual", recon);
    r.put("kSkewResidual", skew_residual(parts.k_part.matrix()));
    r.put("pSymmetricResidual", symmetric_residual(parts.p_part.matrix()));
    r.check("reconstruction", recon, cfg.tol);
    Ok(r)
}

fn polar(cfg: &Resolved) -> Result<Report, InputError> {
    let m = GroupElement::from_rows(&read_rows(require(&cfg.matrix, "matrix")?)?)?;
    let pf = polar_decompose(&m)?;
    let mut r = Report::new();
    r.put("orthogonal", pf.orthogonal.to_rows());
    r.put("positive", pf.positive.to_rows());
    let recon = dist(&(pf.orthogonal.matrix() * pf.positive.matrix()), m.matrix());
    let orth = pf.orthogonal.orthogonality_residual();
    r.put("reconstructionResidual", recon);
    r.put("orthogonalityResidual", orth);
    r.put("determinantSign", m.matrix().determinant().signum());
    r.check("reconstruction", recon, cfg.tol);
    r.check("orthogonality", orth, cfg.tol);
    // exp(k) exp(p) needs det M > 0; otherwise only the polar factors are reported
    match group_factorize(&m) {
        Ok(gs) => {
            let back = matrix_exp(&gs.k_log)?.matrix() * matrix_exp(&gs.p_log)?.matrix();
            let res = dist(&back, m.matrix());
            r.put("kLog", gs.k_log.to_rows());
            r.put("pLog", gs.p_log.to_rows());
            r.put("factorizationResidual", res);
            r.check("factorization", res, cfg.tol);
        }
        Err(e) => r.put("factorizationError", e.to_string()),
    }
    Ok(r)
}

fn dual_check(cfg: &Resolved) -> Result<Report, InputError> {
    let k = AlgebraElement::from_rows(&read_rows(require(&cfg.k, "k")?)?)?;
    let p = AlgebraElement::from_rows(&read_rows(require(&cfg.p, "p")?)?)?;
    if k.order() != p.order() {
        return Err(InputError(format!("k is {0}x{0} but p is {1}x{1}", k.order(), p.order())));
    }
    if !k.is_skew(1e-12 * (1.0 + k.norm())) {
        return Err(InputError("k must be skew-symmetric".into()));
    }
    if !p.is_symmetric(1e-12 * (1.0 + p.norm())) {
        return Err(InputError("p must be symmetric".into()));
    }
    let x = &k + &p;
    let m = matrix_exp(&x)?;
    let gs = group_factorize(&m)?;
    let lhs = matrix_exp(&(&k - &p))?;
    let rhs = matrix_exp(&gs.k_log)?.matrix() * matrix_exp(&(-&gs.p_log))?.matrix();
    let duexp = dist(lhs.matrix(), &rhs);
    let theta_defect = dist(group_involution(&m)?.matrix(), matrix_exp(&theta(&x))?.matrix());
    let mut r = Report::new();
    r.put("kPrime", gs.k_log.to_rows());
    r.put("pPrime", gs.p_log.to_rows());
    r.put("dualElement", lhs.to_rows());
    r.put("duexpDefect", duexp);
    r.put("thetaDefect", theta_defect);
    r.check("duexp", duexp, cfg.tol);
    r.check("theta", theta_defect, cfg.tol);
    Ok(r)
}

fn family(cfg: &Resolved) -> Result<(String, Arc<dyn StatFamily>), InputError> {
    let key = cfg.family.clone().unwrap_or_else(|| DEFAULT_FAMILY.to_string());
    let fam = family_by_name(&key)?;
    Ok((key, fam))
}

fn frame(cfg: &Resolved) -> Frame {
    match cfg.frame {
        FrameArg::Coordinate => Frame::Coordinate,
        FrameArg::Orthonormal => Frame::Orthonormal,
    }
}

/// The grid form from `--form`, or the family alpha-connection.
fn load_form(cfg: &Resolved) -> Result<(SharedForm, Option<Arc<dyn StatFamily>>), InputError> {
    if let Some(path) = &cfg.form {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
        return Ok((Arc::new(GridForm::from_json_str(&text)?), None));
    }
    let (key, fam) = family(cfg)?;
    let form = connection_form_of(fam.clone(), cfg.alpha, default_domain(&key)?, frame(cfg), cfg.fd_step)?;
    Ok((form, Some(fam)))
}

fn default_base(form: &dyn ConnectionForm, fam: Option<&Arc<dyn StatFamily>>) -> Vec<f64> {
    match fam.map(|f| f.name()) {
        Some("gaussian1d") => vec![0.0, 1.0],
        Some("bernoulli") => vec![0.5],
        _ => {
            let d: &DomainBox = form.domain();
            d.lower.iter().zip(&d.upper).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    }
}

fn read_curve(cfg: &Resolved) -> Result<Curve, InputError> {
    Ok(Curve::from_json(&read_json(require(&cfg.loop_path, "loop")?)?)?)
}

fn transport_cmd(cfg: &Resolved) -> Result<Report, InputError> {
    let (form, _) = load_form(cfg)?;
    let curve = read_curve(cfg)?;
    let t = transport_matrix(&curve, form.as_ref(), cfg.steps)?;
    let mut r = Report::new();
    r.put("start", curve.start_point());
    r.put("end", curve.end_point());
    r.put("transport", t.to_rows());
    if let Some(v) = &cfg.v {
        let out = transport(&curve, form.as_ref(), &DVector::from_column_slice(v), cfg.steps)?;
        r.put("transportedV", out.as_slice());
    }
    let closed = Loop::new(curve.clone()).is_ok();
    r.put("closed", closed);
    if closed {
        r.put("orthogonalityResidual", t.orthogonality_residual());
        match matrix_log(&t) {
            Ok(log) => r.put("holonomyLog", log.to_rows()),
            Err(e) => r.put("holonomyLogError", e.to_string()),
        }
    }
    Ok(r)
}

fn holonomy(cfg: &Resolved) -> Result<Report, InputError> {
    let (form, fam) = load_form(cfg)?;
    let base = cfg.base.clone().unwrap_or_else(|| default_base(form.as_ref(), fam.as_ref()));
    let samples = sample_holonomy(
        form.as_ref(),
        &ChartPoint::new(base)?,
        cfg.count,
        cfg.max_side,
        cfg.seed,
        cfg.steps,
    )?;
    if let Some(path) = &cfg.samples_out {
        crate::report::write_output(Some(path), &samples_to_json_lines(&samples))?;
    }
    let est = estimate_algebra(&samples, cfg.closure, cfg.tol)?;
    let max_orth = samples.iter().map(|s| s.element.orthogonality_residual()).fold(0.0, f64::max);
    let max_log = samples.iter().map(|s| s.log.norm()).fold(0.0, f64::max);
    let mut r = Report::new();
    r.put("samples", samples.iter().map(|s| s.to_json()).collect::<Vec<_>>());
    r.put("estimate", est.to_json());
    r.put("maxOrthogonalityResidual", max_orth);
    r.put("maxLogNorm", max_log);
    Ok(r)
}

fn duality(cfg: &Resolved) -> Result<Report, InputError> {
    let (form, fam) = load_form(cfg)?;
    if fam.is_some() && cfg.frame != FrameArg::Orthonormal {
        return Err(InputError("duality needs the orthonormal frame".into()));
    }
    let lp = Loop::new(read_curve(cfg)?)?;
    let n = form.fiber_dim();
    let metric: Box<dyn MetricField> = match &fam {
        Some(f) => Box::new(FisherMetricField::new(f.clone())),
        None => Box::new(ConstantMetric::identity(n)),
    };
    let unit = |i: usize| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
    let v = cfg.v.as_ref().map(|v| DVector::from_column_slice(v)).unwrap_or_else(|| unit(0));
    let w = cfg.w.as_ref().map(|w| DVector::from_column_slice(w)).unwrap_or_else(|| unit(n - 1));
    let full = pairing_defect(&lp, &form, metric.as_ref(), &v, &w, cfg.steps)?;
    let mut r = Report::new();
    r.put("pairingDefect", full);
    if cfg.steps >= 2 {
        let half = pairing_defect(&lp, &form, metric.as_ref(), &v, &w, cfg.steps / 2)?;
        r.put("pairingDefectHalfSteps", half);
        r.put("halvingRatio", if full != 0.0 { json!(half / full) } else { Value::Null });
    }
    r.check("pairing", full, cfg.tol);
    Ok(r)
}

fn stat_report(cfg: &Resolved) -> Result<Report, InputError> {
    let (key, fam) = family(cfg)?;
    let point = cfg.base.clone().unwrap_or_else(|| match key.as_str() {
        "bernoulli" => vec![0.5],
        _ => vec![0.0, 1.0],
    });
    let (g, t) = fisher_and_amari(fam.as_ref(), &point)?;
    let h = cfg.fd_step;
    let lc = alpha_christoffel(fam.as_ref(), 0.0, &point, h)?;
    let plus = alpha_christoffel(fam.as_ref(), cfg.alpha, &point, h)?;
    let minus = alpha_christoffel(fam.as_ref(), -cfg.alpha, &point, h)?;
    let d = fam.param_dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                worst = worst.max(metric_duality_defect(fam.as_ref(), cfg.alpha, &point, (i, j, k), h)?.abs());
            }
        }
    }
    // a small box around the point; the forms are only evaluated there
    let domain = DomainBox::new(
        point.iter().map(|x| x - 10.0 * h).collect(),
        point.iter().map(|x| x + 10.0 * h).collect(),
    )?;
    let on = connection_form_of(fam.clone(), cfg.alpha, domain.clone(), Frame::Orthonormal, h)?;
    let omega_minus: Vec<DMatrix<f64>> =
        on.eval(&point)?.iter().map(|w| cartan_split(w).p_part.into_matrix()).collect();
    let amari: Vec<DMatrix<f64>> = amari_form(fam.clone(), domain)?.eval(&point)?.into_iter().map(|a| a.into_matrix()).collect();
    let num: f64 = omega_minus.iter().zip(&amari).map(|(a, b)| a.dot(b)).sum();
    let den: f64 = amari.iter().map(|b| b.norm_squared()).sum();
    let mut r = Report::new();
    r.put("family", &key);
    r.put("point", &point);
    r.put("fisherMetric", g.g.row_iter().map(|row| row.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
    r.put("amariTensor", t.to_nested());
    r.put("christoffelIndexOrder", "[k][i][j] = Gamma^k_ij");
    r.put("leviCivita", lc.to_nested());
    r.put("alphaChristoffel", plus.to_nested());
    r.put("dualAlphaChristoffel", minus.to_nested());
    r.put("metricDualityDefectMax", worst);
    r.put("omegaMinusOrthonormal", omega_minus.iter().map(mat_rows).collect::<Vec<_>>());
    r.put("amariForm", amari.iter().map(mat_rows).collect::<Vec<_>>());
    // omega_minus = c * alpha * amari_form; c is measured, not assumed
    if cfg.alpha != 0.0 && den > 0.0 {
        r.put("proportionalityConstant", num / den / cfg.alpha);
    }
    r.check("metricDuality", worst, cfg.tol);
    Ok(r)
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

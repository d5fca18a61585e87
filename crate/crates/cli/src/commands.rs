//! The analyses behind each subcommand. Every command returns a [`Report`];
//! file output is left to the caller.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use geoequiv::corpus::{self, CorpusEntry};
use geoequiv::flow::{self, Trajectory};
use geoequiv::mobility::{self, AnsatzBasis};
use geoequiv::pair::{self, PairAField};
use geoequiv::probe::{self, ProbeOutcome, ProbeSettings, VerdictClass};
use geoequiv::sampling;
use geoequiv::tensor::{signature_of, ChartMetric, TensorField};
use geoequiv::{linalg, GeomError};
use serde::Serialize;
use serde_json::json;

use crate::metric_file::{self, MetricFile};
use crate::report::{Check, InputRecord, Report, Stats, Verdict};

/// Residual threshold deciding whether a pair counts as equivalent.
pub const EQUIVALENCE_TOL: f64 = 1e-7;
/// Share of each box edge used for sample points.
pub const SAMPLE_MARGIN: f64 = 0.9;

/// An input error that maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Commands that sample need an explicit seed.
pub fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| usage("--seed is required: reports must be reproducible"))
}

pub struct Loaded {
    pub metric: ChartMetric,
    pub input: InputRecord,
}

pub fn load(path: &Path, role: &str) -> Result<Loaded> {
    let (metric, bytes) = metric_file::load(path)?;
    Ok(Loaded {
        metric,
        input: InputRecord::new(role, &path.display().to_string(), &bytes),
    })
}

fn load_pair(g: &Path, gbar: &Path) -> Result<(Loaded, Loaded)> {
    let g = load(g, "g")?;
    let gbar = load(gbar, "gbar")?;
    if g.metric.dim() != gbar.metric.dim() {
        return Err(usage(format!(
            "dimension mismatch: g has dimension {}, gbar has dimension {}",
            g.metric.dim(),
            gbar.metric.dim()
        )));
    }
    Ok((g, gbar))
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn cmd_validate(path: &Path, points: usize, seed: Option<u64>) -> Result<Report> {
    let seed = require_seed(seed)?;
    let loaded = load(path, "g")?;
    let g = &loaded.metric;
    let n = g.dim();
    let mut report = Report::new("validate", vec![loaded.input.clone()], Some(seed));
    report.param("points", points);
    report.push(
        Check::new("parse", "tensor::ChartMetric::new", 0)
            .stat("dim", n)
            .stat("label", g.label())
            .asserting(true),
    );
    let pts = sampling::points_in(g.domain(), points, seed, 1.0);
    let mut dets = Vec::with_capacity(pts.len());
    let mut degenerate = Vec::new();
    let mut signatures = std::collections::BTreeMap::<String, usize>::new();
    for x in &pts {
        let gv = g.values(x).with_context(|| format!("evaluating the metric at {x:?}"))?;
        dets.push(linalg::det(&gv, n).abs());
        match signature_of(&gv, n) {
            Some(s) => *signatures.entry(format!("({},{})", s.0, s.1)).or_default() += 1,
            None => degenerate.push(x.clone()),
        }
    }
    let mut nd = Check::new("nondegeneracy", "tensor::signature_of", pts.len())
        .stat("abs_det", Stats::of(&dets))
        .stat("degenerate_points", degenerate.len())
        .asserting(degenerate.is_empty());
    for x in degenerate.iter().take(5) {
        nd = nd.witness(json!({ "point": x }));
    }
    report.push(nd);
    report.push(
        Check::new("signature", "tensor::ChartMetric::scan_signature", pts.len())
            .stat("signatures", &signatures)
            .asserting(signatures.len() <= 1),
    );
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub points: usize,
    pub seed: Option<u64>,
    pub tol: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            points: 100,
            seed: None,
            tol: EQUIVALENCE_TOL,
        }
    }
}

pub fn cmd_analyze_pair(g: &Path, gbar: &Path, opts: &AnalyzeOptions) -> Result<Report> {
    let seed = require_seed(opts.seed)?;
    let (g, gbar) = load_pair(g, gbar)?;
    let mut report = Report::new("analyze-pair", vec![g.input.clone(), gbar.input.clone()], Some(seed));
    report.param("points", opts.points);
    report.param("tol", opts.tol);
    analyze_pair(&mut report, &g.metric, &gbar.metric, opts.points, seed, opts.tol)?;
    Ok(report)
}

fn analyze_pair(report: &mut Report, g: &ChartMetric, gbar: &ChartMetric, points: usize, seed: u64, tol: f64) -> Result<()> {
    let pts = sampling::points_in(g.domain(), points, seed, SAMPLE_MARGIN);
    let rows = pair::sweep(g, gbar, &pts)?;
    let m = rows.len();
    let ge: Vec<f64> = rows.iter().map(|r| r.geodesic_equivalence).collect();
    let lc: Vec<f64> = rows.iter().map(|r| r.lc).collect();
    let basic: Vec<f64> = rows.iter().map(|r| r.basic).collect();
    let int1: Vec<f64> = rows.iter().map(|r| r.int1.residual).collect();
    let ricci: Vec<f64> = rows.iter().map(|r| r.ricci_commute).collect();
    let equivalent = max_of(ge.iter().copied()) < tol;

    let criterion = |name: &str, anchor: &str, vals: &[f64]| {
        let c = Check::new(name, anchor, m).stat("residual", Stats::of(vals));
        if equivalent {
            c.below(max_of(vals.iter().copied()), tol)
        } else {
            c
        }
    };
    report.push(criterion("geodesic_equivalence", "pair::residual_geodesic_equivalence", &ge));
    report.push(criterion("levi_civita", "pair::residual_lc", &lc));
    report.push(criterion("basic", "pair::residual_basic", &basic));
    let disagreements: Vec<usize> = (0..m).filter(|&k| (ge[k] < tol) != (lc[k] < tol) || (ge[k] < tol) != (basic[k] < tol)).collect();
    let mut agree = Check::new("criteria_agree", "pair::point_residuals", m)
        .stat("disagreements", disagreements.len())
        .asserting(disagreements.is_empty());
    for &k in disagreements.iter().take(5) {
        agree = agree.witness(json!({ "point": rows[k].point, "geodesic_equivalence": ge[k], "lc": lc[k], "basic": basic[k] }));
    }
    report.push(agree);
    report.push(criterion("integrability", "pair::residual_int1", &int1));
    report.push(criterion("ricci_commute", "pair::residual_ricci_commute", &ricci));

    let fits: Vec<_> = rows.iter().map(|r| &r.fit).collect();
    let bs: Vec<f64> = fits.iter().filter_map(|f| f.b).collect();
    let (b_mean, b_std) = linalg::mean_std(&bs);
    let fit_res: Vec<f64> = fits.iter().filter(|f| !f.degenerate).map(|f| f.residual).collect();
    let trace_gap: Vec<f64> = fits.iter().map(|f| (f.mu - f.mu_from_trace).abs()).collect();
    let trace_gap_alt: Vec<f64> = fits.iter().map(|f| (f.mu - f.mu_from_trace_alt_sign).abs()).collect();
    report.push(
        Check::new("hessian_fit", "pair::fit_b_mu", m)
            .stat("nondegenerate_points", bs.len())
            .stat("b_mean", (!bs.is_empty()).then_some(b_mean))
            .stat("b_std", (!bs.is_empty()).then_some(b_std))
            .stat("residual", Stats::of(&fit_res))
            .stat("mu_trace_gap", Stats::of(&trace_gap))
            .stat("mu_trace_gap_opposite_sign", Stats::of(&trace_gap_alt)),
    );
    let sign_written: Vec<f64> = rows.iter().map(|r| r.lambda_sign.as_written).collect();
    let sign_flipped: Vec<f64> = rows.iter().map(|r| r.lambda_sign.flipped).collect();
    report.push(
        Check::new("lambda_gradient", "pair::lambda_sign_check", m)
            .stat("as_written", Stats::of(&sign_written))
            .stat("flipped", Stats::of(&sign_flipped)),
    );
    let f1 = pair::fit_f1_constants(g, gbar, &pts)?;
    report.push(
        Check::new("f1_constants", "pair::fit_f1_constants", f1.points)
            .stat("b", f1.b)
            .stat("b_bar", f1.b_bar)
            .stat("residual", f1.residual),
    );
    Ok(())
}

/// How the initial velocity of a single geodesic is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialVelocity {
    Given(Vec<f64>),
    /// Seeded lightlike direction scaled to the given max-norm.
    Null { seed: u64, speed: f64 },
}

#[derive(Clone, Debug)]
pub struct GeodesicOptions {
    pub x0: Option<Vec<f64>>,
    pub velocity: InitialVelocity,
    pub t_span: (f64, f64),
    pub tol: f64,
    pub samples: usize,
}

pub struct GeodesicRun {
    pub report: Report,
    pub csv: String,
    pub trajectory: Trajectory,
}

pub fn cmd_geodesics(g: &Path, gbar: Option<&Path>, opts: &GeodesicOptions) -> Result<GeodesicRun> {
    let (g, gbar) = match gbar {
        Some(p) => {
            let (a, b) = load_pair(g, p)?;
            (a, Some(b))
        }
        None => (load(g, "g")?, None),
    };
    let metric = &g.metric;
    let n = metric.dim();
    let x0 = opts.x0.clone().unwrap_or_else(|| metric.domain().center());
    if x0.len() != n {
        return Err(usage(format!("--x0 has {} components, the metric has dimension {n}", x0.len())));
    }
    if !metric.domain().contains(&x0) {
        return Err(usage(format!("--x0 {x0:?} lies outside the chart domain")));
    }
    let (v0, seed) = match &opts.velocity {
        InitialVelocity::Given(v) => {
            if v.len() != n {
                return Err(usage(format!("--v0 has {} components, the metric has dimension {n}", v.len())));
            }
            (v.clone(), None)
        }
        InitialVelocity::Null { seed, speed } => {
            let v = flow::null_vector_at(metric, &x0, *seed).map_err(|e| match e {
                GeomError::DefiniteSignature => usage("--null needs an indefinite metric"),
                e => e.into(),
            })?;
            (v.into_iter().map(|c| c * speed).collect(), Some(*seed))
        }
    };
    let mut inputs = vec![g.input.clone()];
    if let Some(b) = &gbar {
        inputs.push(b.input.clone());
    }
    let mut report = Report::new("geodesics", inputs, seed);
    report.param("x0", &x0);
    report.param("v0", &v0);
    report.param("t_span", [opts.t_span.0, opts.t_span.1]);
    report.param("tol", opts.tol);
    report.param("samples", opts.samples);

    let mut traj = flow::integrate(metric, &x0, &v0, opts.t_span, opts.tol)?;
    traj.set_grid(opts.samples)?;
    let stats = traj.stats().clone();
    report.push(
        Check::new("integration", "flow::integrate", 1)
            .stat("accepted_steps", stats.accepted)
            .stat("rejected_steps", stats.rejected)
            .stat("evaluations", stats.evaluations)
            .stat("t_end", traj.t_end())
            .stat("exit_time", traj.exit_time()),
    );
    let drift = traj.speed_drift().unwrap_or(0.0);
    report.push(
        Check::new("speed_conservation", "flow::Trajectory::speed_drift", traj.grid().len())
            .stat("drift", drift)
            .below(drift, 10.0 * opts.tol),
    );
    report.push(Check::new("geodesic_residual", "flow::Trajectory::geodesic_residual", traj.grid().len()).stat("residual", traj.geodesic_residual()?));

    if let Some(gbar) = &gbar {
        geodesic_pair_checks(&mut report, metric, &gbar.metric, &mut traj)?;
    }
    let csv = traj.to_csv()?;
    Ok(GeodesicRun { report, csv, trajectory: traj })
}

fn is_lightlike(traj: &Trajectory) -> Result<bool> {
    let (x, v) = traj.state_at(traj.t_start())?;
    let n = traj.dim();
    let gv = traj.metric().values(&x)?;
    let mut q = 0.0;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += gv[i * n + j] * v[i] * v[j];
            s += (gv[i * n + j] * v[i] * v[j]).abs();
        }
    }
    Ok(q.abs() <= flow::NULL_THRESHOLD * s)
}

fn geodesic_pair_checks(report: &mut Report, g: &ChartMetric, gbar: &ChartMetric, traj: &mut Trajectory) -> Result<()> {
    let samples = traj.grid().len();
    let along: Vec<Vec<f64>> = (0..5)
        .map(|k| Ok(traj.state_at(traj.grid()[k * (samples - 1) / 4])?.0))
        .collect::<Result<_>>()?;
    let ge = max_of(along.iter().map(|x| pair::residual_geodesic_equivalence(g, gbar, x)).collect::<geoequiv::Result<Vec<_>>>()?);
    let equivalent = ge < EQUIVALENCE_TOL;
    report.push(Check::new("equivalence_along", "pair::residual_geodesic_equivalence", along.len()).stat("residual", ge).stat("equivalent", equivalent));

    let painleve = flow::painleve_cross_check(g, gbar, traj)?;
    report.push(
        Check::new("painleve", "flow::painleve_cross_check", samples)
            .stat("max_discrepancy", painleve.max_discrepancy)
            .stat("max_absolute", painleve.max_absolute)
            .below(painleve.max_discrepancy, 1e-9),
    );
    let a: Arc<dyn TensorField> = Arc::new(PairAField::new(g, gbar)?);
    traj.add_monitor("lambda", &pair::lambda_field(g, a.clone())?)?;
    traj.add_monitor("phi", &pair::phi_field(g, gbar)?)?;
    if !equivalent {
        report.push(Check::new("equivalence_checks", "pair::residual_geodesic_equivalence", 0).stat("skipped", "pair is not geodesically equivalent along the trajectory"));
        return Ok(());
    }
    let series = flow::monitor_integral_i(g, a.as_ref(), traj)?;
    report.push(
        Check::new("integral_i", "flow::monitor_integral_i", series.values.len())
            .stat("drift", series.drift)
            .stat("initial", series.values.first())
            .below(series.drift, 1e-6),
    );
    let b = probe::pair_b(g, gbar, &along)?.unwrap_or(0.0);
    let lam = flow::check_lambda_ode(g, a, traj, b)?;
    let lightlike = is_lightlike(traj)?;
    let mut lc = Check::new("lambda_ode", "flow::check_lambda_ode", lam.samples)
        .stat("b", b)
        .stat("residual", lam.residual)
        .stat("cubic_coefficient", lam.cubic_coefficient)
        .stat("quadratic_fit", &lam.quadratic_fit);
    if lightlike {
        lc = lc.below(lam.cubic_coefficient.abs(), 1e-7);
    }
    report.push(lc);
    if lightlike {
        let phi = flow::check_phi_ode(g, gbar, traj)?;
        report.push(
            Check::new("phi_ode", "flow::check_phi_ode", phi.samples)
                .stat("fit", &phi.fit)
                .below(phi.fit.residual, 1e-6),
        );
    } else {
        let model = flow::check_phi_model(g, gbar, traj, b)?;
        report.push(
            Check::new("phi_model", "flow::check_phi_model", model.samples)
                .stat("kappa", model.kappa)
                .stat("residual", model.residual)
                .stat("model", model.model)
                .below(model.residual, 1e-6),
        );
    }
    let rep = flow::recover_reparametrization(g, gbar, traj)?;
    report.push(
        Check::new("reparametrization", "flow::recover_reparametrization", rep.times.len())
            .stat("tau_end", rep.tau.last())
            .stat("gbar_residual", rep.gbar_residual)
            .below(rep.gbar_residual, 1e-6),
    );
    Ok(())
}

#[derive(Clone, Debug)]
pub struct MobilityOptions {
    pub degree: usize,
    pub points: usize,
    pub svd_tol: f64,
    pub seed: Option<u64>,
    pub weights: Vec<String>,
}

impl Default for MobilityOptions {
    fn default() -> Self {
        MobilityOptions {
            degree: 2,
            points: 100,
            svd_tol: mobility::DEFAULT_SVD_TOL,
            seed: None,
            weights: vec!["1".into()],
        }
    }
}

/// Tolerance of the check that all solutions share one `B`.
pub const COMMON_B_TOL: f64 = 1e-6;
pub const COMMON_B_POINTS: usize = 50;

pub fn cmd_mobility(g: &Path, opts: &MobilityOptions) -> Result<Report> {
    let seed = require_seed(opts.seed)?;
    let loaded = load(g, "g")?;
    let metric = &loaded.metric;
    let weights: Vec<&str> = opts.weights.iter().map(String::as_str).collect();
    let basis = AnsatzBasis::weighted(metric, opts.degree, &weights).map_err(|e| usage(format!("--weight: {e}")))?;
    let mut report = Report::new("mobility", vec![loaded.input.clone()], Some(seed));
    report.param("degree", opts.degree);
    report.param("points", opts.points);
    report.param("svd_tol", opts.svd_tol);
    report.param("weights", &opts.weights);
    let pts = sampling::points_in(metric.domain(), opts.points, seed, SAMPLE_MARGIN);
    let est = mobility::estimate_mobility(metric, &basis, &pts, opts.svd_tol, seed)?;
    let verdict = if est.ambiguous { Verdict::Ambiguous } else { Verdict::Info };
    let mut check = Check::new("mobility", "mobility::estimate_mobility", est.points)
        .stat("dimension", est.dimension)
        .stat("raw_dimension", est.raw_dimension)
        .stat("gap_ratio", est.gap_ratio)
        .stat("basis", &est.basis)
        .stat("singular_values_tail", tail(&est.singular_values, est.raw_dimension + 3))
        .stat("warnings", &est.warnings)
        .with_verdict(verdict);
    for s in &est.solutions {
        check = check.witness(json!({ "verified": s.verified, "basic": s.basic, "int1": s.int1, "ricci_commute": s.ricci_commute }));
    }
    report.push(check);
    let fields = mobility::solution_fields(&basis, &est)?;
    if fields.len() >= 3 {
        let lpts = sampling::points_in(metric.domain(), COMMON_B_POINTS, seed.wrapping_add(1), SAMPLE_MARGIN);
        let l3 = mobility::lemma3_property_check(metric, &fields, &lpts, COMMON_B_TOL)?;
        report.push(
            Check::new("common_b", "mobility::lemma3_property_check", lpts.len())
                .stat("solutions", l3.solutions.len())
                .stat("common_b", l3.common_b)
                .stat("b_spread", l3.b_spread)
                .stat("max_residual", max_of(l3.solutions.iter().map(|s| s.max_residual)))
                .stat("max_b_std", max_of(l3.solutions.iter().filter_map(|s| s.b_std)))
                .asserting(l3.passed),
        );
    }
    Ok(report)
}

fn tail(values: &[f64], count: usize) -> Vec<f64> {
    values[values.len().saturating_sub(count)..].to_vec()
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub batch: usize,
    pub seed: Option<u64>,
    pub t_span: (f64, f64),
    pub tol: f64,
    pub samples: usize,
    pub speed: f64,
    pub bounded_emulation: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        let d = ProbeSettings::default();
        ProbeOptions {
            batch: d.count,
            seed: None,
            t_span: d.t_span,
            tol: d.tol,
            samples: d.samples,
            speed: d.speed,
            bounded_emulation: false,
        }
    }
}

#[derive(Serialize)]
struct ProbeSummary<'a> {
    start: &'a [f64],
    velocity: &'a [f64],
    exited: bool,
    result: &'a ProbeOutcome,
}

pub fn cmd_probe(g: &Path, gbar: &Path, opts: &ProbeOptions) -> Result<Report> {
    let seed = require_seed(opts.seed)?;
    let (g, gbar) = load_pair(g, gbar)?;
    let (gm, bm) = (&g.metric, &gbar.metric);
    let mut report = Report::new("probe", vec![g.input.clone(), gbar.input.clone()], Some(seed));
    report.param("batch", opts.batch);
    report.param("t_span", [opts.t_span.0, opts.t_span.1]);
    report.param("tol", opts.tol);
    report.param("samples", opts.samples);
    report.param("speed", opts.speed);
    report.param("bounded_emulation", opts.bounded_emulation);
    let settings = ProbeSettings {
        count: opts.batch,
        seed,
        t_span: opts.t_span,
        tol: opts.tol,
        samples: opts.samples,
        speed: opts.speed,
    };
    let starts = sampling::points_in(gm.domain(), 20, seed, SAMPLE_MARGIN);
    let ge = max_of(starts.iter().map(|x| pair::residual_geodesic_equivalence(gm, bm, x)).collect::<geoequiv::Result<Vec<_>>>()?);
    if !(ge < EQUIVALENCE_TOL) {
        report.push(
            Check::new("equivalence", "pair::residual_geodesic_equivalence", starts.len())
                .stat("residual", ge)
                .asserting(false),
        );
        return Ok(report);
    }
    if gm.is_indefinite()? {
        let trajs = probe::null_geodesics(gm, &settings)?;
        let probes = probe::probe_quadratic(gm, bm, &trajs)?;
        report.push(classification_check("null_probes", "probe::classify_null", &probes));
        let t2 = probe::theorem2_boundedness_test(gm, bm, &trajs, opts.bounded_emulation)?;
        let mut check = Check::new("boundedness", "probe::theorem2_boundedness_test", t2.geodesics.len())
            .stat("max_c2_c1", t2.max_c2_c1)
            .stat("verdict", t2.verdict)
            .stat("note", &t2.note);
        if opts.bounded_emulation {
            check.tolerance = Some(probe::THEOREM2_TOL);
            check = check.asserting(t2.verdict == probe::Theorem2Verdict::AffineEquivalent);
        }
        report.push(check);
    } else {
        let b = probe::pair_b(gm, bm, &starts)?.unwrap_or(0.0);
        report.param("b", b);
        if b > 1e-9 {
            let probes = probe::probe_riemannian(gm, bm, b, &settings)?;
            report.push(classification_check("riemannian_probes", "probe::classify_riemannian", &probes));
        } else if b.abs() <= 1e-9 {
            let inits = flow::seeded_initial_data(gm, settings.count, seed, 0.5, false, settings.speed)?;
            let trajs = flow::integrate_batch(gm, &inits, settings.t_span, settings.tol)
                .into_iter()
                .map(|t| {
                    let mut t = t?;
                    t.set_grid(settings.samples)?;
                    Ok(t)
                })
                .collect::<geoequiv::Result<Vec<_>>>()?;
            let probes = probe::probe_quadratic(gm, bm, &trajs)?;
            report.push(classification_check("quadratic_probes", "probe::classify_null", &probes));
        } else {
            report.push(Check::new("riemannian_probes", "probe::pair_b", starts.len()).stat("skipped", "B < 0: no completeness model applies"));
        }
    }
    Ok(report)
}

fn classification_check(name: &str, anchor: &str, probes: &[probe::GeodesicProbe]) -> Check {
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for p in probes {
        let key = match p.class() {
            Some(c) => format!("{c:?}"),
            None => "Rejected".to_string(),
        };
        *counts.entry(key).or_default() += 1;
    }
    let rejected = probes.iter().any(|p| p.class().is_none());
    let ambiguous = probes.iter().any(|p| p.class() == Some(VerdictClass::Ambiguous));
    let verdict = if rejected {
        Verdict::Fail
    } else if ambiguous {
        Verdict::Ambiguous
    } else {
        Verdict::Info
    };
    let mut check = Check::new(name, anchor, probes.len()).stat("classes", &counts).with_verdict(verdict);
    for p in probes {
        check = check.witness(ProbeSummary {
            start: &p.start,
            velocity: &p.velocity,
            exited: p.exited,
            result: &p.result,
        });
    }
    check
}

/// File names of one exported corpus entry.
pub fn corpus_files(entry: &CorpusEntry) -> (String, Option<String>) {
    (format!("{}.g.json", entry.name), entry.gbar.as_ref().map(|_| format!("{}.gbar.json", entry.name)))
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    name: &'a str,
    g: String,
    gbar: Option<String>,
    truth: &'a corpus::TruthFlags,
}

/// The corpus index as JSON: names, files and truth flags.
pub fn corpus_index() -> Result<String> {
    let entries = corpus::all()?;
    let index: Vec<IndexEntry> = entries
        .iter()
        .map(|e| {
            let (g, gbar) = corpus_files(e);
            IndexEntry { name: &e.name, g, gbar, truth: &e.truth }
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&index)?;
    s.push('\n');
    Ok(s)
}

/// Writes every corpus metric and `index.json` into `dir`.
pub fn cmd_corpus_export(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    for e in corpus::all()? {
        let (gname, bname) = corpus_files(&e);
        write(&gname, MetricFile::from_metric(&e.g).to_json())?;
        if let (Some(b), Some(bname)) = (&e.gbar, bname) {
            write(&bname, MetricFile::from_metric(b).to_json())?;
        }
    }
    write("index.json", corpus_index()?)?;
    Ok(written)
}

/// Parses `A:B`.
pub fn parse_tspan(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("expected A:B, got `{s}`"))?;
    let a: f64 = a.trim().parse().with_context(|| format!("bad start `{a}`"))?;
    let b: f64 = b.trim().parse().with_context(|| format!("bad end `{b}`"))?;
    if !(a.is_finite() && b.is_finite()) || a == b {
        bail!("time span `{s}` must be finite with distinct ends");
    }
    Ok((a, b))
}

/// Parses a comma-separated vector.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad number `{c}`")))
        .collect()
}

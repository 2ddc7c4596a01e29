//! End-to-end experiment: sample, certify, run the pipeline, verify.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use wigner_core::control::{check_decay_conditions, DecayReport};
use wigner_core::mapgen::{assemble_approximate_map, make_exact_solution, make_perturbation, Certificate};
use wigner_core::module::{ModuleDescriptor, ModuleElement};
use wigner_core::random;
use wigner_core::stability::{construct_point, PointResult, StabilityResult};
use wigner_core::verify::{self, CheckRecord, VerificationReport};

use crate::config::Resolved;
use crate::LabError;

/// Steps `x -> x / c^n` at which sample points are also certified.
const CERTIFIED_DEPTHS: [i32; 3] = [1, 8, 20];

/// Norm pairs fed to the condition check on the control function.
const DECAY_SAMPLES: usize = 8;

// independent random streams drawn from the single configured seed
const STREAM_POINTS: u64 = 1;
const STREAM_ORTH: u64 = 2;
const STREAM_NONORTH: u64 = 3;
const STREAM_PROBES: u64 = 4;
const STREAM_GATE: u64 = 5;
const STREAM_MAP: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Sample data for one run. Pair members are evaluated alongside the sample
/// points: evaluated index `points.len() + 2 * i + j` holds member `j` of
/// orthogonal pair `i`, and nonorthogonal pairs follow.
#[derive(Debug, Clone)]
pub struct Samples {
    pub points: Vec<ModuleElement>,
    pub orth: Vec<(ModuleElement, ModuleElement)>,
    pub nonorth: Vec<(ModuleElement, ModuleElement)>,
    /// Index pairs into `points`.
    pub probes: Vec<(usize, usize)>,
    /// Extra elements for the limit gate.
    pub gate: Vec<ModuleElement>,
}

impl Samples {
    pub fn draw(r: &Resolved) -> Self {
        let s = &r.config.samples;
        let seed = r.config.seed;
        let d = &r.source;
        let (lo, hi) = (s.norm_min, s.norm_max);

        let mut g = stream(seed, STREAM_POINTS);
        let points = (0..s.points)
            .map(|_| random::module_element_with_norm(d, lo, hi, &mut g))
            .collect();

        let mut g = stream(seed, STREAM_ORTH);
        let orth = (0..s.orth_pairs).map(|_| orthogonal_pair(d, lo, hi, &mut g)).collect();

        let mut g = stream(seed, STREAM_NONORTH);
        let nonorth = (0..s.nonorth_pairs)
            .map(|_| {
                let x = random::module_element_with_norm(d, lo, hi, &mut g);
                let a = random::element(d.algebra(), &mut g);
                let z = random::module_element_with_norm(d, lo, hi, &mut g);
                let y = &x.right_mul(&a) + &z.scale_real(0.3);
                let n = y.norm();
                (x, y.scale_real(g.gen_range(lo..=hi) / n))
            })
            .collect();

        let mut g = stream(seed, STREAM_PROBES);
        let probes = if s.points == 0 {
            Vec::new()
        } else {
            (0..s.probe_pairs)
                .map(|_| (g.gen_range(0..s.points), g.gen_range(0..s.points)))
                .collect()
        };

        let mut g = stream(seed, STREAM_GATE);
        let gate = (0..s.gate_probes)
            .map(|_| random::module_element_with_norm(d, lo, hi, &mut g))
            .collect();

        Self {
            points,
            orth,
            nonorth,
            probes,
            gate,
        }
    }

    /// Sample points followed by all pair members.
    pub fn evaluated(&self) -> Vec<ModuleElement> {
        let mut v = self.points.clone();
        for (x, y) in self.orth.iter().chain(&self.nonorth) {
            v.push(x.clone());
            v.push(y.clone());
        }
        v
    }
}

/// Two elements supported on complementary nonempty sets of slots.
fn orthogonal_pair(d: &ModuleDescriptor, lo: f64, hi: f64, g: &mut ChaCha8Rng) -> (ModuleElement, ModuleElement) {
    let k = d.rank();
    let mut slots: Vec<usize> = (0..k).collect();
    slots.shuffle(g);
    let split = g.gen_range(1..k);
    let mut make = |own: &[usize]| {
        let x = random::module_element(d, g);
        let comps = (0..k)
            .map(|i| {
                if own.contains(&i) {
                    x.components()[i].clone()
                } else {
                    d.algebra().zero()
                }
            })
            .collect();
        let x = ModuleElement::new(d, comps).expect("shape is fixed by the descriptor");
        let t = g.gen_range(lo..=hi);
        let n = x.norm();
        x.scale_real(t / n)
    };
    let x = make(&slots[..split]);
    let y = make(&slots[split..]);
    (x, y)
}

/// One CSV row; residuals recomputed from the raw point values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub point_id: usize,
    pub norm_x: f64,
    pub iso_residual: f64,
    pub dist: f64,
    pub sqrt_phi: f64,
    pub h_orth: f64,
    pub subseq_len: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub pairs: usize,
    pub vacuous: usize,
    pub retries: usize,
    pub delta: f64,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub resolved: Resolved,
    pub certificate: Option<CertificateSummary>,
    pub decay: DecayReport,
    pub report: VerificationReport,
    pub stability: StabilityResult,
    pub rows: Vec<PointRow>,
    pub evaluated: usize,
}

impl Outcome {
    pub fn no_data(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pass(&self) -> bool {
        !self.no_data() && self.report.pass()
    }
}

/// Certification pairs: every probe pair, every evaluated diagonal, both
/// kinds of test pairs, and sample points scaled down the way the pipeline
/// will evaluate them.
fn certification_pairs(s: &Samples, c: f64) -> Vec<(ModuleElement, ModuleElement)> {
    let mut pairs: Vec<_> = s
        .probes
        .iter()
        .map(|&(i, j)| (s.points[i].clone(), s.points[j].clone()))
        .collect();
    pairs.extend(s.evaluated().into_iter().map(|x| (x.clone(), x)));
    pairs.extend(s.orth.iter().cloned());
    pairs.extend(s.nonorth.iter().cloned());
    for (i, x) in s.points.iter().enumerate() {
        let y = &s.points[(i + 1) % s.points.len()];
        for n in CERTIFIED_DEPTHS {
            let xs = x.scale_real(c.powi(-n));
            pairs.push((xs.clone(), xs.clone()));
            pairs.push((xs, y.clone()));
        }
    }
    pairs
}

pub fn check_phi(r: &Resolved) -> Result<DecayReport, LabError> {
    let s = Samples::draw(r);
    let mut g = stream(r.config.seed, STREAM_POINTS);
    let mut norms: Vec<(f64, f64)> = s
        .points
        .iter()
        .zip(s.points.iter().skip(1))
        .take(DECAY_SAMPLES)
        .map(|(x, y)| (x.norm(), y.norm()))
        .collect();
    if norms.is_empty() {
        let (lo, hi) = (r.config.samples.norm_min, r.config.samples.norm_max);
        norms = (0..DECAY_SAMPLES)
            .map(|_| (g.gen_range(lo..=hi), g.gen_range(lo..=hi)))
            .collect();
    }
    Ok(check_decay_conditions(&r.phi, &norms, r.config.checks.decay_iterations)?)
}

pub fn decay_record(d: &DecayReport) -> CheckRecord {
    let mut rec = CheckRecord::new(
        "phi_conditions",
        "c^n phi(c^-n x, y) -> 0, c^n phi(x, c^-n y) -> 0, sup_n c^{2n} phi(c^-n x, c^-n x) < inf",
        1.0,
    );
    for (i, s) in d.samples.iter().enumerate() {
        rec.observe(s.ratio_x.max(s.ratio_y), &[i]);
    }
    let mut rec = rec.finish();
    rec.pass = d.pass();
    if !rec.pass && rec.witness.is_none() {
        rec.witness = Some(Vec::new());
    }
    rec
}

fn row(id: usize, p: &PointResult, r: &Resolved) -> PointRow {
    let tol = r.config.checks.tol;
    let xx = p.x.inner(&p.x);
    let sqrt_phi = r.phi.eval_at(&p.x, &p.x).sqrt();
    let iso_residual = p.image.inner(&p.image).dist(&xx);
    let dist = p.fx.dist(&p.image);
    let h_orth = p.remainder.inner(&p.image).op_norm();
    let h_norm = p.remainder.norm();
    PointRow {
        point_id: id,
        norm_x: p.x.norm(),
        iso_residual,
        dist,
        sqrt_phi,
        h_orth,
        subseq_len: p.subsequence.len(),
        pass: iso_residual <= tol && dist <= sqrt_phi + tol && h_orth <= tol && h_norm <= sqrt_phi + tol,
    }
}

/// Runs the whole experiment. Points are processed in parallel on the
/// current rayon pool; everything downstream is assembled in point order.
pub fn run_experiment(r: &Resolved) -> Result<Outcome, LabError> {
    let cfg = &r.config;
    let samples = Samples::draw(r);
    let evaluated = samples.evaluated();
    let decay = check_phi(r)?;

    let mut report = VerificationReport::default();
    report.push(decay_record(&decay));
    if evaluated.is_empty() {
        return Ok(Outcome {
            resolved: r.clone(),
            certificate: None,
            decay,
            report,
            stability: StabilityResult::default(),
            rows: Vec::new(),
            evaluated: 0,
        });
    }

    let map_seed = stream(cfg.seed, STREAM_MAP).gen::<u64>();
    let base = make_exact_solution(map_seed, &r.source, cfg.algebra.extra_rank, r.phase);
    let f = make_perturbation(base, cfg.perturbation.delta, cfg.perturbation.exponent, map_seed)
        .map_err(LabError::config)?;
    let cert_pairs = certification_pairs(&samples, r.params.c);
    let (f, Certificate {
        record,
        worst_ratio,
        retries,
        delta,
    }) = assemble_approximate_map(&f, &r.phi, &cert_pairs, cfg.perturbation.max_retries)
        .map_err(|e| LabError::pipeline("certification", e))?;
    let certificate = CertificateSummary {
        pairs: cert_pairs.len(),
        vacuous: record.vacuous,
        retries,
        delta,
        worst_ratio,
    };
    report.push(record);

    let results: Vec<_> = evaluated
        .par_iter()
        .map(|x| construct_point(&f, x, &r.params, &r.phi, &samples.gate))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for (i, res) in results.into_iter().enumerate() {
        points.push(res.map_err(|e| LabError::pipeline(&format!("evaluated point {i}"), e))?);
    }
    if let Some(nc) = &cfg.negative_control {
        let p = &mut points[nc.point];
        p.image = p.image.scale_real(nc.image_scale);
    }
    let stability = StabilityResult { points };
    let pts = &stability.points;

    let tol = cfg.checks.tol;
    report.extend(verify::check_theorem_conclusions(&stability, &r.phi, tol));
    report.extend(verify::check_construction_relations(&stability, tol));
    report.push(verify::check_envelope(&stability));

    let np = samples.points.len();
    let no = samples.orth.len();
    let orth: Vec<_> = (0..no).map(|i| (&pts[np + 2 * i], &pts[np + 2 * i + 1])).collect();
    let nonorth: Vec<_> = (0..samples.nonorth.len())
        .map(|i| (&pts[np + 2 * (no + i)], &pts[np + 2 * (no + i) + 1]))
        .collect();
    if orth.is_empty() && nonorth.is_empty() {
        report.push(CheckRecord::not_applicable("orthogonality", "no test pairs configured"));
    } else {
        report.push(verify::check_orthogonality(&orth, &nonorth, cfg.checks.orth_margin, tol));
    }

    let probes: Vec<_> = samples.probes.iter().map(|&(i, j)| (&pts[i], &pts[j])).collect();
    if r.source.algebra().is_abelian() {
        report.push(verify::check_exact_wigner(&probes, tol)?);
    } else {
        report.push(CheckRecord::not_applicable(
            "exact_wigner",
            "|<I(x), I(y)>| = |<x, y>|, claimed for abelian coefficients only",
        ));
    }
    report.push(verify::check_limit_modulus(&probes, tol));

    let pol: Vec<_> = samples
        .probes
        .iter()
        .map(|&(i, j)| (&samples.points[i], &samples.points[j]))
        .chain(samples.orth.iter().chain(&samples.nonorth).map(|(x, y)| (x, y)))
        .collect();
    report.push(verify::check_polarization(&pol, 1e-10));

    let rows = pts[..np].iter().enumerate().map(|(i, p)| row(i, p, r)).collect();
    Ok(Outcome {
        resolved: r.clone(),
        certificate: Some(certificate),
        decay,
        report,
        stability,
        rows,
        evaluated: evaluated.len(),
    })
}

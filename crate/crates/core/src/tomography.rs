//! Population reconstruction from polarization-tagged mean photon counts.
//!
//! Count model per setting k: `n_k = E_d·((M·d)_k + C_b)`, with E_d the
//! detection efficiency and C_b a polarization-independent background per
//! trial. [`BackgroundConvention::Additive`] switches to `n_k = E_d·(M·d)_k + C_b`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::doc::{self, DocWriter, Provenance};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scatter::DetectionMatrix;

pub const COUNTS_KIND: &str = "counts";
pub const ESTIMATE_KIND: &str = "population_estimate";

const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundConvention {
    /// Background scaled by the detection efficiency together with the signal.
    #[default]
    Scaled,
    /// Background added after the efficiency.
    Additive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsVector {
    /// Mean counts per trial, one per detection-matrix row.
    pub means: Vec<f64>,
    /// Trials per setting.
    pub trials: u64,
    /// Per-trial counts, `raw[k][t]`, when retained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<Vec<u64>>>,
}

impl CountsVector {
    pub fn new(means: Vec<f64>, trials: u64) -> Result<Self> {
        let c = CountsVector { means, trials, raw: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("counts need trials ≥ 1"));
        }
        if let Some(v) = self.means.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("mean counts must be finite and ≥ 0, got {v}")));
        }
        Ok(())
    }

    /// Poisson variance of each mean, floored at one count over all trials.
    pub fn variances(&self) -> Vec<f64> {
        let t = self.trials as f64;
        self.means.iter().map(|&n| n.max(1.0 / t) / t).collect()
    }

    pub fn to_document(&self, provenance: &Provenance, rows: &[String]) -> String {
        let mut w = DocWriter::new(COUNTS_KIND, provenance);
        w.strings("rows", rows).int("trials", self.trials as i128).floats("means", &self.means);
        w.finish()
    }

    pub fn from_document(text: &str) -> Result<Self> {
        doc::expect_kind(text, COUNTS_KIND)?;
        let c: CountsVector = doc::parse(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Constrained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub method: Method,
    pub populations: Vec<f64>,
    pub background: f64,
    pub efficiency: f64,
    /// Labels of the covariance axes.
    pub covariance_labels: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    /// Indices of populations outside [0, 1] (direct method only).
    pub out_of_bounds: Vec<usize>,
    /// Bound constraints active at the solution (constrained method only).
    pub active_constraints: Vec<String>,
    /// Weighted squared residual ½·Σ (model − n)²/σ².
    pub objective: f64,
}

impl PopulationEstimate {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.covariance.len()).map(|i| self.covariance[i][i].max(0.0).sqrt()).collect()
    }

    pub fn to_document(&self, provenance: &Provenance) -> String {
        let mut w = DocWriter::new(ESTIMATE_KIND, provenance);
        let method = match self.method {
            Method::Direct => "direct",
            Method::Constrained => "constrained",
        };
        w.string("method", method)
            .floats("populations", &self.populations)
            .float("background", self.background)
            .float("efficiency", self.efficiency)
            .float("objective", self.objective)
            .strings("covariance_labels", &self.covariance_labels)
            .matrix("covariance", &self.covariance)
            .strings("active_constraints", &self.active_constraints);
        let oob: Vec<f64> = self.out_of_bounds.iter().map(|&i| i as f64).collect();
        w.floats("out_of_bounds", &oob);
        w.finish()
    }
}

/// S1/2 populations from the σ+ and σ− mean counts: `s0 = n−/(n+ + n−)`,
/// `s1 = n+/(n+ + n−)`. σ+ light only scatters from s_−1/2, so `s1` is the
/// s_−1/2 population and `s0` the s_+1/2 population.
pub fn solve_s(n_plus: f64, n_minus: f64) -> Result<(f64, f64)> {
    if !(n_plus >= 0.0 && n_minus >= 0.0) || !n_plus.is_finite() || !n_minus.is_finite() {
        return Err(Error::domain("counts must be finite and ≥ 0"));
    }
    let total = n_plus + n_minus;
    if total <= 0.0 {
        return Err(Error::domain("no photons in either setting; the state is undefined"));
    }
    Ok((n_minus / total, n_plus / total))
}

fn check_simplex(d: &[f64]) -> Result<()> {
    let sum: f64 = d.iter().sum();
    if d.iter().any(|&x| !(x >= -SIMPLEX_TOLERANCE) || !x.is_finite()) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::domain(format!("populations {d:?} are not on the simplex")));
    }
    Ok(())
}

/// Expected mean counts for populations `d`.
pub fn forward_counts(
    d: &[f64],
    efficiency: f64,
    background: f64,
    m: &DetectionMatrix,
    convention: BackgroundConvention,
) -> Vec<f64> {
    m.mean
        .iter()
        .map(|row| {
            let signal: f64 = row.iter().zip(d).map(|(a, b)| a * b).sum();
            match convention {
                BackgroundConvention::Scaled => efficiency * (signal + background),
                BackgroundConvention::Additive => efficiency * signal + background,
            }
        })
        .collect()
}

/// Synthetic Poisson counts: per-trial draws with mean given by the forward model.
pub fn synth_counts(
    d: &[f64],
    efficiency: f64,
    background: f64,
    m: &DetectionMatrix,
    trials: u64,
    seed: u64,
    convention: BackgroundConvention,
    keep_raw: bool,
) -> Result<CountsVector> {
    m.validate()?;
    if d.len() != m.ncols() {
        return Err(Error::domain(format!("{} populations for a matrix with {} columns", d.len(), m.ncols())));
    }
    check_simplex(d)?;
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::domain(format!("efficiency must lie in (0, 1], got {efficiency}")));
    }
    if !(background >= 0.0) || !background.is_finite() {
        return Err(Error::domain(format!("background must be ≥ 0, got {background}")));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be ≥ 1"));
    }
    let lambdas = forward_counts(d, efficiency, background, m, convention);
    let mut means = Vec::with_capacity(lambdas.len());
    let mut raw = keep_raw.then(Vec::new);
    for (k, &lambda) in lambdas.iter().enumerate() {
        let mut rng = substream(seed, k as u64);
        let mut total: u64 = 0;
        let mut per_trial = Vec::new();
        if lambda > 0.0 {
            let dist = Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?;
            for _ in 0..trials {
                let n = dist.sample(&mut rng) as u64;
                total += n;
                if keep_raw {
                    per_trial.push(n);
                }
            }
        } else if keep_raw {
            per_trial = vec![0; trials as usize];
        }
        if let Some(r) = raw.as_mut() {
            r.push(per_trial);
        }
        means.push(total as f64 / trials as f64);
    }
    Ok(CountsVector { means, trials, raw })
}

fn populations_labels(m: &DetectionMatrix) -> Vec<String> {
    m.cols.clone()
}

/// Six-equation, six-unknown solve: the count equations in x_i = E_d·d_i and
/// b (the background term), plus Σx_i = E_d. Populations outside [0, 1] are
/// flagged, not clamped.
pub fn solve_direct(
    counts: &CountsVector,
    m: &DetectionMatrix,
    convention: BackgroundConvention,
) -> Result<PopulationEstimate> {
    m.validate()?;
    counts.validate()?;
    let (r, c) = (m.nrows(), m.ncols());
    if counts.means.len() != r {
        return Err(Error::domain(format!("{} counts for {r} settings", counts.means.len())));
    }
    if r != c + 1 {
        return Err(Error::domain(format!(
            "direct solve needs one more setting than populations, got {r} settings for {c} populations"
        )));
    }
    let n = c + 2;
    // Unknowns: x_0..x_{c-1}, b, E.
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for k in 0..r {
        for i in 0..c {
            a[(k, i)] = m.mean[k][i];
        }
        a[(k, c)] = 1.0;
        rhs[k] = counts.means[k];
    }
    for i in 0..c {
        a[(r, i)] = 1.0;
    }
    a[(r, c + 1)] = -1.0;

    let mut row_labels = m.rows.clone();
    row_labels.push("unitarity".into());
    let rank = a.clone().svd(false, false).rank(1e-10 * a.norm());
    if rank < n {
        return Err(Error::RankDeficient {
            rank,
            rows: dependent_rows(&a, &row_labels),
        });
    }
    let sol = a.clone().lu().solve(&rhs).ok_or_else(|| Error::RankDeficient {
        rank,
        rows: dependent_rows(&a, &row_labels),
    })?;
    let x: Vec<f64> = (0..c).map(|i| sol[i]).collect();
    let b = sol[c];
    let e = sol[c + 1];
    if !(e > 0.0) {
        return Err(Error::domain(format!("direct solve gives non-positive efficiency {e}")));
    }
    let d: Vec<f64> = x.iter().map(|xi| xi / e).collect();
    let background = match convention {
        BackgroundConvention::Scaled => b / e,
        BackgroundConvention::Additive => b,
    };

    // Covariance of (x, b) from Poisson noise on the counts; the unitarity row is exact.
    let inv = a.clone().try_inverse().expect("full-rank matrix is invertible");
    let var = counts.variances();
    let mut cov_xb = DMatrix::<f64>::zeros(c + 1, c + 1);
    for p in 0..=c {
        for q in 0..=c {
            cov_xb[(p, q)] = (0..r).map(|k| inv[(p, k)] * inv[(q, k)] * var[k]).sum();
        }
    }
    // Jacobian of (d, C_b, E) with respect to (x, b).
    let mut jac = DMatrix::<f64>::zeros(c + 2, c + 1);
    for i in 0..c {
        for j in 0..c {
            jac[(i, j)] = if i == j { 1.0 / e } else { 0.0 } - x[i] / (e * e);
        }
    }
    match convention {
        BackgroundConvention::Scaled => {
            for j in 0..c {
                jac[(c, j)] = -b / (e * e);
            }
            jac[(c, c)] = 1.0 / e;
        }
        BackgroundConvention::Additive => jac[(c, c)] = 1.0,
    }
    for j in 0..c {
        jac[(c + 1, j)] = 1.0;
    }
    let cov = &jac * cov_xb * jac.transpose();

    let model = forward_counts(&d, e, background, m, convention);
    let objective = weighted_objective(&model, counts);
    let mut labels = populations_labels(m);
    labels.push("background".into());
    labels.push("efficiency".into());
    Ok(PopulationEstimate {
        method: Method::Direct,
        out_of_bounds: (0..c).filter(|&i| !(0.0..=1.0).contains(&d[i])).collect(),
        populations: d,
        background,
        efficiency: e,
        covariance_labels: labels,
        covariance: to_rows(&cov),
        active_constraints: Vec::new(),
        objective,
    })
}

/// Rows that add nothing to the span of the rows before them.
fn dependent_rows(a: &DMatrix<f64>, labels: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev_rank = 0;
    for k in 0..a.nrows() {
        let sub = a.rows(0, k + 1).clone_owned();
        let rank = sub.clone().svd(false, false).rank(1e-10 * a.norm().max(1.0));
        if rank == prev_rank {
            out.push(labels[k].clone());
        }
        prev_rank = rank;
    }
    out
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn weighted_objective(model: &[f64], counts: &CountsVector) -> f64 {
    model
        .iter()
        .zip(&counts.means)
        .zip(counts.variances())
        .map(|((m, n), v)| 0.5 * (m - n).powi(2) / v)
        .sum()
}

/// Weighted least-squares problem over (d on the simplex, C_b ≥ 0) at a
/// known efficiency.
#[derive(Clone, Debug)]
pub struct ConstrainedProblem {
    /// Design matrix over (d_0..d_{c-1}, C_b).
    design: DMatrix<f64>,
    counts: Vec<f64>,
    weights: Vec<f64>,
    n_pop: usize,
}

impl ConstrainedProblem {
    pub fn new(
        counts: &CountsVector,
        m: &DetectionMatrix,
        efficiency: f64,
        convention: BackgroundConvention,
    ) -> Result<Self> {
        m.validate()?;
        counts.validate()?;
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::domain(format!("efficiency must lie in (0, 1], got {efficiency}")));
        }
        let (r, c) = (m.nrows(), m.ncols());
        if counts.means.len() != r {
            return Err(Error::domain(format!("{} counts for {r} settings", counts.means.len())));
        }
        let bg = match convention {
            BackgroundConvention::Scaled => efficiency,
            BackgroundConvention::Additive => 1.0,
        };
        let design = DMatrix::from_fn(r, c + 1, |k, i| if i < c { efficiency * m.mean[k][i] } else { bg });
        Ok(ConstrainedProblem {
            design,
            counts: counts.means.clone(),
            weights: counts.variances().iter().map(|v| 1.0 / v).collect(),
            n_pop: c,
        })
    }

    /// ½·Σ w_k (model_k − n_k)².
    pub fn objective(&self, d: &[f64], background: f64) -> f64 {
        (0..self.counts.len())
            .map(|k| {
                let model: f64 = (0..self.n_pop).map(|i| self.design[(k, i)] * d[i]).sum::<f64>()
                    + self.design[(k, self.n_pop)] * background;
                0.5 * self.weights[k] * (model - self.counts[k]).powi(2)
            })
            .sum()
    }

    /// Optimal background for fixed populations (a clamped 1-D solve).
    pub fn best_background(&self, d: &[f64]) -> f64 {
        let c = self.n_pop;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.counts.len() {
            let signal: f64 = (0..c).map(|i| self.design[(k, i)] * d[i]).sum();
            let g = self.design[(k, c)];
            num += self.weights[k] * g * (self.counts[k] - signal);
            den += self.weights[k] * g * g;
        }
        (num / den).max(0.0)
    }

    /// Gauss–Newton Hessian Gᵀ W G.
    fn hessian(&self) -> DMatrix<f64> {
        let w = DMatrix::from_diagonal(&DVector::from_vec(self.weights.clone()));
        self.design.transpose() * w * &self.design
    }

    fn gradient_rhs(&self) -> DVector<f64> {
        let wn = DVector::from_iterator(self.counts.len(), self.counts.iter().zip(&self.weights).map(|(n, w)| n * w));
        self.design.transpose() * wn
    }

    pub fn n_populations(&self) -> usize {
        self.n_pop
    }
}

struct FaceSolution {
    z: Vec<f64>,
    free: Vec<usize>,
    kkt_inverse: DMatrix<f64>,
}

/// Minimizes over the face where only `free` variables may be nonzero, with
/// Σ d = 1 enforced through a Lagrange multiplier.
fn solve_face(problem: &ConstrainedProblem, h: &DMatrix<f64>, g: &DVector<f64>, free: &[usize]) -> Option<FaceSolution> {
    let nf = free.len();
    let c = problem.n_pop;
    // The constraint row is scaled to the Hessian so the singularity test is meaningful.
    let scale = free.iter().map(|&i| h[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut kkt = DMatrix::<f64>::zeros(nf + 1, nf + 1);
    let mut rhs = DVector::<f64>::zeros(nf + 1);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = h[(i, j)];
        }
        rhs[a] = g[i];
        if i < c {
            kkt[(a, nf)] = scale;
            kkt[(nf, a)] = scale;
        }
    }
    rhs[nf] = scale;
    let svd = kkt.clone().svd(false, false);
    if svd.singular_values.min() < 1e-12 * scale {
        return None;
    }
    let inv = kkt.try_inverse()?;
    let sol = &inv * rhs;
    let mut z = vec![0.0; c + 1];
    for (a, &i) in free.iter().enumerate() {
        z[i] = sol[a];
    }
    Some(FaceSolution { z, free: free.to_vec(), kkt_inverse: inv })
}

/// Constrained least squares on {d on the simplex, C_b ≥ 0} at known E_d.
///
/// Exhaustive active-set search: every face of the feasible polytope is
/// solved exactly through its KKT system and the best feasible face optimum
/// is kept. With five variables there are at most 31 faces. The covariance
/// is the inverse Gauss–Newton Hessian of the Poisson-weighted objective
/// restricted to the free directions of the optimal face.
pub fn solve_constrained(
    counts: &CountsVector,
    m: &DetectionMatrix,
    efficiency: f64,
    convention: BackgroundConvention,
) -> Result<PopulationEstimate> {
    let problem = ConstrainedProblem::new(counts, m, efficiency, convention)?;
    let c = problem.n_pop;
    let nv = c + 1;
    let h = problem.hessian();
    let g = problem.gradient_rhs();

    let mut best: Option<(f64, FaceSolution)> = None;
    for mask in 1u32..(1 << nv) {
        let free: Vec<usize> = (0..nv).filter(|&i| mask & (1 << i) != 0).collect();
        if !free.iter().any(|&i| i < c) {
            continue;
        }
        let Some(mut face) = solve_face(&problem, &h, &g, &free) else { continue };
        if face.z.iter().any(|&v| v < -1e-12) {
            continue;
        }
        for v in face.z.iter_mut() {
            *v = v.max(0.0);
        }
        let s: f64 = face.z[..c].iter().sum();
        for v in face.z[..c].iter_mut() {
            *v /= s;
        }
        let obj = problem.objective(&face.z[..c], face.z[c]);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, face));
        }
    }
    let (objective, face) = best.ok_or_else(|| Error::domain("no feasible face found"))?;

    let mut cov = vec![vec![0.0; nv]; nv];
    for (a, &i) in face.free.iter().enumerate() {
        for (b, &j) in face.free.iter().enumerate() {
            cov[i][j] = face.kkt_inverse[(a, b)];
        }
    }
    let mut labels = populations_labels(m);
    labels.push("background".into());
    let active_constraints = (0..nv)
        .filter(|i| !face.free.contains(i))
        .map(|i| format!("{} = 0", labels[i]))
        .collect();
    Ok(PopulationEstimate {
        method: Method::Constrained,
        populations: face.z[..c].to_vec(),
        background: face.z[c],
        efficiency,
        covariance_labels: labels,
        covariance: cov,
        out_of_bounds: Vec::new(),
        active_constraints,
        objective,
    })
}

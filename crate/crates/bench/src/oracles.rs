//! Slow, direct reference computations used to check the fast paths.

use nalgebra::{DMatrix, DVector};

use scpkit::layout::Sense;
use scpkit::milp::MasterModel;
use scpkit::oracle::SampledOracle;
use scpkit::problems::{SparseRegressionData, SskpData, SvmData};
use scpkit::qp::{QpMaster, QpSolution};
use scpkit::sampling::SubsetSample;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/n) y_Sᵀ (I_n + γ_S Σ z_j X_{S,j} X_{S,j}ᵀ)⁻¹ y_S` with an explicit
/// `n × n` solve, `γ_S = γN/n`.
pub fn dense_sparse_reg_value(data: &SparseRegressionData, z: &[f64], sample: &SubsetSample) -> f64 {
    let idx = sample.indices();
    let n = idx.len();
    let gamma = data.gamma * data.n() as f64 / n as f64;
    let mut m = DMatrix::<f64>::identity(n, n);
    for (j, &zj) in z.iter().enumerate() {
        if zj == 0.0 {
            continue;
        }
        let col: Vec<f64> = idx.iter().map(|&i| data.x.get(i, j)).collect();
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] += gamma * zj * col[a] * col[b];
            }
        }
    }
    let y = DVector::from_iterator(n, idx.iter().map(|&i| data.y[i]));
    let sol = m.lu().solve(&y).expect("I + PSD is nonsingular");
    y.dot(&sol) / n as f64
}

/// `(c/n) Σ_j max(W^jᵀz − q, 0)` term by term.
pub fn direct_sskp_cost(data: &SskpData, z: &[f64], sample: &SubsetSample) -> f64 {
    let mut total = 0.0;
    for &j in sample.indices() {
        let mut load = -data.q;
        for (i, zi) in z.iter().enumerate() {
            load += data.w.get(j, i) * zi;
        }
        if load > 0.0 {
            total += load;
        }
    }
    data.c * total / sample.len() as f64
}

/// `(1/n) Σ max(1 − yᵢθᵀxᵢ, 0)` term by term.
pub fn direct_svm_risk(data: &SvmData, theta: &[f64], sample: &SubsetSample) -> f64 {
    let mut total = 0.0;
    for &i in sample.indices() {
        let margin = data.y[i] * dot(data.x.row(i), theta);
        if margin < 1.0 {
            total += 1.0 - margin;
        }
    }
    total / sample.len() as f64
}

/// Central differences of `oracle.value` at `point`.
pub fn fd_gradient(oracle: &dyn SampledOracle, point: &[f64], sample: &SubsetSample, h: f64) -> Vec<f64> {
    (0..point.len())
        .map(|j| {
            let mut up = point.to_vec();
            let mut down = point.to_vec();
            up[j] += h;
            down[j] -= h;
            let fu = oracle.value(&up, sample).expect("probe in domain");
            let fd = oracle.value(&down, sample).expect("probe in domain");
            (fu - fd) / (2.0 * h)
        })
        .collect()
}

/// A dense LP `min cᵀx` over rows and a finite box.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SmallLp {
    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let in_box = x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol);
        in_box
            && self.rows.iter().all(|(a, sense, b)| {
                let act = dot(a, x);
                let scale = 1.0 + b.abs();
                match sense {
                    Sense::Le => act <= b + tol * scale,
                    Sense::Ge => act >= b - tol * scale,
                    Sense::Eq => (act - b).abs() <= tol * scale,
                }
            })
    }
}

/// Optimum of a bounded LP by trying every vertex: each choice of `n`
/// constraints (rows or box faces) held with equality. `None` when infeasible.
pub fn lp_by_vertices(lp: &SmallLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.objective.len();
    let mut faces: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        faces.push((e.clone(), lp.lower[j]));
        faces.push((e, lp.upper[j]));
    }
    if n == 0 {
        return lp.feasible(&[], 1e-9).then(|| (0.0, Vec::new()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| faces[choice[r]].0[c]);
        let b = DVector::from_iterator(n, choice.iter().map(|&i| faces[i].1));
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.feasible(&x, 1e-9) {
                let v = dot(&lp.objective, &x);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
        // Next n-combination of faces in lexicographic order.
        let m = faces.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < m - n + i {
                break;
            }
        }
        choice[i] += 1;
        for j in i + 1..n {
            choice[j] = choice[j - 1] + 1;
        }
    }
}

/// Optimum of a model whose integer columns are binary, by trying every
/// assignment and solving the remaining LP over the continuous columns by
/// vertex enumeration. Continuous columns need finite bounds.
pub fn milp_by_enumeration(model: &MasterModel) -> Option<(f64, Vec<f64>)> {
    let cols = model.columns();
    let binaries: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].integer).collect();
    let reals: Vec<usize> = (0..cols.len()).filter(|&j| !cols[j].integer).collect();
    assert!(binaries.len() <= 20, "too many binaries to enumerate");
    let obj = model.objective();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..1 << binaries.len() {
        let mut point = vec![0.0; cols.len()];
        for (b, &j) in binaries.iter().enumerate() {
            point[j] = f64::from((mask >> b) & 1);
        }
        if binaries.iter().any(|&j| point[j] < cols[j].lower || point[j] > cols[j].upper) {
            continue;
        }
        let fixed_obj: f64 = binaries.iter().map(|&j| obj[j] * point[j]).sum();
        let lp = SmallLp {
            objective: reals.iter().map(|&j| obj[j]).collect(),
            rows: model
                .rows()
                .iter()
                .map(|r| {
                    let shift: f64 = binaries.iter().map(|&j| r.coeffs[j] * point[j]).sum();
                    (reals.iter().map(|&j| r.coeffs[j]).collect(), r.sense, r.rhs - shift)
                })
                .collect(),
            lower: reals.iter().map(|&j| cols[j].lower).collect(),
            upper: reals.iter().map(|&j| cols[j].upper).collect(),
        };
        if let Some((v, x)) = lp_by_vertices(&lp) {
            let total = fixed_obj + v;
            if best.as_ref().is_none_or(|(bv, _)| total < *bv) {
                for (&j, xv) in reals.iter().zip(x) {
                    point[j] = xv;
                }
                best = Some((total, point));
            }
        }
    }
    best
}

/// Optimality certificate for the one-slack SVM master, recomputed from the
/// cuts and the reported multipliers without touching the solver's state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpCertificate {
    /// `½‖θ‖² + C·max(0, maxᵢ bᵢ − aᵢᵀθ)` at the reported `θ`.
    pub primal: f64,
    /// `Σαᵢbᵢ − ½‖Σαᵢaᵢ‖²` at the reported multipliers, after clipping them
    /// into the dual feasible set.
    pub dual: f64,
    /// `‖θ − Σαᵢaᵢ‖∞`.
    pub stationarity: f64,
    /// `maxᵢ αᵢ·(ξ − (bᵢ − aᵢᵀθ))`.
    pub complementarity: f64,
    /// `max(|a|², |b|, C)`-based scale the tolerances are relative to.
    pub scale: f64,
}

pub fn qp_certificate(master: &QpMaster, sol: &QpSolution) -> QpCertificate {
    let cuts: Vec<(&[f64], f64)> = master.cuts().collect();
    let c = master.c();
    let xi = cuts.iter().map(|(a, b)| b - dot(a, &sol.theta)).fold(0.0, f64::max);
    let primal = 0.5 * dot(&sol.theta, &sol.theta) + c * xi;

    let mut alpha: Vec<f64> = sol.alpha.iter().map(|a| a.max(0.0)).collect();
    let total: f64 = alpha.iter().sum();
    if total > c {
        alpha.iter_mut().for_each(|a| *a *= c / total);
    }
    let mut w = vec![0.0; master.dim()];
    for ((a, _), al) in cuts.iter().zip(&alpha) {
        w.iter_mut().zip(a.iter()).for_each(|(w, a)| *w += al * a);
    }
    let dual = cuts.iter().zip(&alpha).map(|((_, b), al)| al * b).sum::<f64>() - 0.5 * dot(&w, &w);
    let stationarity = w.iter().zip(&sol.theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let complementarity =
        cuts.iter().zip(&alpha).map(|((a, b), al)| al * (xi - (b - dot(a, &sol.theta)))).fold(0.0, f64::max);
    let scale = cuts.iter().map(|(a, b)| dot(a, a).max(b.abs())).fold(c, f64::max).max(1.0);
    QpCertificate { primal, dual, stationarity, complementarity, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scpkit::milp::Column;

    #[test]
    fn vertex_lp_on_a_triangle() {
        // min −x − y  s.t.  x + y ≤ 1 on the unit box → −1.
        let lp = SmallLp {
            objective: vec![-1.0, -1.0],
            rows: vec![(vec![1.0, 1.0], Sense::Le, 1.0)],
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
        };
        let (v, x) = lp_by_vertices(&lp).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_lp_detects_infeasibility() {
        let lp = SmallLp {
            objective: vec![1.0],
            rows: vec![(vec![1.0], Sense::Ge, 2.0)],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert!(lp_by_vertices(&lp).is_none());
    }

    #[test]
    fn enumeration_with_a_continuous_column() {
        // min η − z  s.t.  η ≥ 2z − 1,  η ∈ [0, 5],  z binary → z = 1, η = 1, value 0;
        // z = 0 gives η = 0, value 0 as well; tie at 0.
        let cols = vec![
            Column { name: "z".into(), lower: 0.0, upper: 1.0, integer: true },
            Column { name: "eta".into(), lower: 0.0, upper: 5.0, integer: false },
        ];
        let mut m = MasterModel::new(cols, vec![-1.0, 1.0]).unwrap();
        m.add_row("c".into(), vec![-2.0, 1.0], Sense::Ge, -1.0).unwrap();
        let (v, _) = milp_by_enumeration(&m).unwrap();
        assert!(v.abs() < 1e-12);
    }
}

//! Expected-cost-minimising decisions.
//!
//! Classifier outputs are treated as posteriors, so class priors are already
//! folded in and a decision needs only the cost matrix.

use crate::scaling::{probabilities_of, ProbabilityVector};
use crate::types::{ClassTaxonomy, CostMatrix, LogitDataset, Temperature};
use rand::Rng;
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate costs: {0}")]
    DegenerateCosts(String),
}

/// Costs of the four outcomes of a benign/malignant decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryCosts {
    /// Acting malignant on a benign case.
    pub c_fp: f64,
    /// Acting benign on a malignant case.
    pub c_fn: f64,
    pub c_tp: f64,
    pub c_tn: f64,
}

impl BinaryCosts {
    pub fn new(c_fp: f64, c_fn: f64, c_tp: f64, c_tn: f64) -> Result<Self, DecisionError> {
        let all = [c_fp, c_fn, c_tp, c_tn];
        if all.iter().any(|c| !c.is_finite()) {
            return Err(DecisionError::DegenerateCosts("costs must be finite".into()));
        }
        if c_fn <= c_tp || c_fp <= c_tn {
            return Err(DecisionError::DegenerateCosts(format!(
                "errors must cost more than correct actions (c_fn={c_fn}, c_tp={c_tp}, c_fp={c_fp}, c_tn={c_tn})"
            )));
        }
        Ok(Self { c_fp, c_fn, c_tp, c_tn })
    }

    /// Error costs only; correct actions cost nothing.
    pub fn errors(c_fp: f64, c_fn: f64) -> Result<Self, DecisionError> {
        Self::new(c_fp, c_fn, 0.0, 0.0)
    }

    /// 2×2 matrix over classes `[benign, malignant]`.
    ///
    /// Action 0 is "act malignant" and action 1 "act benign", so the lowest-index
    /// tie-break of [`decide`] acts malignant at `p == t`, as [`binary_threshold`] does.
    pub fn cost_matrix(&self) -> CostMatrix {
        CostMatrix::new(
            vec![vec![self.c_fp, self.c_tp], vec![self.c_tn, self.c_fn]],
            vec![ACT_MALIGNANT.into(), ACT_BENIGN.into()],
        )
        .expect("validated binary costs form a valid matrix")
    }
}

pub const ACT_MALIGNANT: &str = "act_malignant";
pub const ACT_BENIGN: &str = "act_benign";

/// Posterior threshold above which acting malignant is optimal:
/// `t = (c_fp − c_tn) / ((c_fp − c_tn) + (c_fn − c_tp))`; act iff `p >= t`.
pub fn binary_threshold(costs: &BinaryCosts) -> Result<f64, DecisionError> {
    let fp_regret = costs.c_fp - costs.c_tn;
    let fn_regret = costs.c_fn - costs.c_tp;
    let denom = fp_regret + fn_regret;
    if !(denom > 0.0) {
        return Err(DecisionError::DegenerateCosts(format!(
            "threshold denominator {denom} is not positive"
        )));
    }
    Ok(fp_regret / denom)
}

/// Threshold implied by a 2×2 matrix whose actions are the classes
/// `[benign, malignant]`. `None` if the matrix does not induce one.
pub fn implied_threshold(costs: &CostMatrix) -> Option<f64> {
    if costs.num_actions() != 2 || costs.num_classes() != 2 {
        return None;
    }
    let fp_regret = costs.cost(1, 0) - costs.cost(0, 0);
    let fn_regret = costs.cost(0, 1) - costs.cost(1, 1);
    let denom = fp_regret + fn_regret;
    (fp_regret > 0.0 && fn_regret > 0.0).then(|| fp_regret / denom)
}

/// Expected cost of every action under `prob`.
pub fn expected_costs(prob: &ProbabilityVector, costs: &CostMatrix) -> Result<Vec<f64>, DecisionError> {
    if prob.len() != costs.num_classes() {
        return Err(DecisionError::ShapeMismatch(format!(
            "{} probabilities for a cost matrix over {} classes",
            prob.len(),
            costs.num_classes()
        )));
    }
    Ok(costs
        .rows()
        .map(|row| row.iter().zip(prob.as_slice()).map(|(c, p)| c * p).sum())
        .collect())
}

/// Action with the lowest expected cost; ties go to the lowest index.
///
/// Actions are compared by the exact sign of their expected-cost difference,
/// so actions whose costs are equal in real arithmetic tie exactly. For 0/1
/// costs this reproduces the lowest-index argmax of `prob`.
pub fn decide(prob: &ProbabilityVector, costs: &CostMatrix) -> Result<usize, DecisionError> {
    if prob.len() != costs.num_classes() {
        return Err(DecisionError::ShapeMismatch(format!(
            "{} probabilities for a cost matrix over {} classes",
            prob.len(),
            costs.num_classes()
        )));
    }
    let p = prob.as_slice();
    let mut best = 0;
    for a in 1..costs.num_actions() {
        if exact_cost_difference_sign(costs.row(a), costs.row(best), p) == Ordering::Less {
            best = a;
        }
    }
    Ok(best)
}

/// Sign of `sum_k (x_k - y_k) * p_k`, evaluated without rounding error.
fn exact_cost_difference_sign(x: &[f64], y: &[f64], p: &[f64]) -> Ordering {
    let mut expansion = Vec::with_capacity(4 * p.len());
    for ((&xk, &yk), &pk) in x.iter().zip(y).zip(p) {
        for c in [xk, -yk] {
            let product = c * pk;
            grow_expansion(&mut expansion, product);
            grow_expansion(&mut expansion, c.mul_add(pk, -product));
        }
    }
    // components are non-overlapping and ordered by magnitude; the last one carries the sign
    expansion
        .last()
        .map_or(Ordering::Equal, |v| v.partial_cmp(&0.0).expect("finite costs"))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

/// Adds `b` to a zero-free non-overlapping expansion, keeping both properties.
fn grow_expansion(e: &mut Vec<f64>, b: f64) {
    let mut q = b;
    let mut w = 0;
    for i in 0..e.len() {
        let (s, h) = two_sum(q, e[i]);
        q = s;
        if h != 0.0 {
            e[w] = h;
            w += 1;
        }
    }
    e.truncate(w);
    if q != 0.0 {
        e.push(q);
    }
}

/// Chosen action for every example at temperature `t`.
pub fn decide_all(dataset: &LogitDataset, t: Temperature, costs: &CostMatrix) -> Result<Vec<usize>, DecisionError> {
    check_shapes(dataset, costs)?;
    (0..dataset.len())
        .map(|i| decide(&probabilities_of(dataset, i, t), costs))
        .collect()
}

/// Mean realised cost `costs[decision_i][y_i]` over the dataset.
pub fn empirical_expected_cost(
    dataset: &LogitDataset,
    t: Temperature,
    costs: &CostMatrix,
) -> Result<f64, DecisionError> {
    let actions = decide_all(dataset, t, costs)?;
    Ok(realised_cost(&actions, dataset.labels(), costs))
}

pub fn realised_cost(actions: &[usize], labels: &[usize], costs: &CostMatrix) -> f64 {
    if actions.is_empty() {
        return 0.0;
    }
    let values: Vec<f64> = actions.iter().zip(labels).map(|(&a, &y)| costs.cost(a, y)).collect();
    crate::scaling::pairwise_sum(&values) / actions.len() as f64
}

fn check_shapes(dataset: &LogitDataset, costs: &CostMatrix) -> Result<(), DecisionError> {
    if dataset.num_classes() != costs.num_classes() {
        return Err(DecisionError::ShapeMismatch(format!(
            "dataset has {} classes, cost matrix has {}",
            dataset.num_classes(),
            costs.num_classes()
        )));
    }
    Ok(())
}

/// Ordering constraint imposed on sampled cost matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostConstraint {
    /// Every confusion of a benign-class case costs more than every confusion
    /// of a malignant-class case.
    BenignMisclassificationDominant,
    /// Every benign action taken on a malignant case costs more than every
    /// other confusion.
    MalignantMissDominant,
}

impl CostConstraint {
    pub fn name(self) -> &'static str {
        match self {
            CostConstraint::BenignMisclassificationDominant => "benign-misclassification-dominant",
            CostConstraint::MalignantMissDominant => "malignant-miss-dominant",
        }
    }

    fn is_dominant(self, taxonomy: &ClassTaxonomy, action: usize, class: usize) -> bool {
        match self {
            CostConstraint::BenignMisclassificationDominant => taxonomy.is_benign(class),
            CostConstraint::MalignantMissDominant => taxonomy.is_benign(action) && !taxonomy.is_benign(class),
        }
    }
}

impl std::str::FromStr for CostConstraint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign-misclassification-dominant" => Ok(CostConstraint::BenignMisclassificationDominant),
            "malignant-miss-dominant" => Ok(CostConstraint::MalignantMissDominant),
            other => Err(format!(
                "unknown constraint {other:?}; expected benign-misclassification-dominant or malignant-miss-dominant"
            )),
        }
    }
}

/// Range of the dominant confusion costs, `(1, 10]`.
pub const DOMINANT_RANGE: (f64, f64) = (1.0, 10.0);
/// Range of the dominated confusion costs, `(0, 1]`.
pub const DOMINATED_RANGE: (f64, f64) = (0.0, 1.0);

/// Draws a K×K cost matrix (actions = classes, zero diagonal) whose
/// dominant confusions are uniform on `(1, 10]` and the rest on `(0, 1]`.
pub fn sample_constrained_costs<R: Rng + ?Sized>(
    constraint: CostConstraint,
    taxonomy: &ClassTaxonomy,
    rng: &mut R,
) -> CostMatrix {
    let k = taxonomy.len();
    // hi - (hi - lo) * u with u in [0, 1) lands in (lo, hi]
    let mut draw = |(lo, hi): (f64, f64)| hi - (hi - lo) * rng.random::<f64>();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|c| {
                    if a == c {
                        0.0
                    } else if constraint.is_dominant(taxonomy, a, c) {
                        draw(DOMINANT_RANGE)
                    } else {
                        draw(DOMINATED_RANGE)
                    }
                })
                .collect()
        })
        .collect();
    CostMatrix::new(rows, taxonomy.names().to_vec()).expect("sampled costs are valid")
}

/// Whether every dominant confusion strictly exceeds every other confusion.
pub fn satisfies_constraint(costs: &CostMatrix, taxonomy: &ClassTaxonomy, constraint: CostConstraint) -> bool {
    let k = taxonomy.len();
    if costs.num_actions() != k || costs.num_classes() != k {
        return false;
    }
    let mut min_dominant = f64::INFINITY;
    let mut max_other = f64::NEG_INFINITY;
    for a in 0..k {
        for c in 0..k {
            if a == c {
                continue;
            }
            let v = costs.cost(a, c);
            if constraint.is_dominant(taxonomy, a, c) {
                min_dominant = min_dominant.min(v);
            } else {
                max_other = max_other.max(v);
            }
        }
    }
    min_dominant > max_other
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn pv(p: Vec<f64>) -> ProbabilityVector {
        ProbabilityVector::new(p).unwrap()
    }

    #[test]
    fn thresholds() {
        assert_eq!(binary_threshold(&BinaryCosts::errors(1.0, 1.0).unwrap()).unwrap(), 0.5);
        assert!((binary_threshold(&BinaryCosts::errors(1.0, 9.0).unwrap()).unwrap() - 0.1).abs() < 1e-15);
        assert!(BinaryCosts::errors(0.0, 1.0).is_err());
        assert!(BinaryCosts::new(1.0, 1.0, 2.0, 0.0).is_err());
        assert!(BinaryCosts::errors(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn threshold_matches_brute_force_expected_cost() {
        let costs = BinaryCosts::errors(1.0, 9.0).unwrap();
        let t = binary_threshold(&costs).unwrap();
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            let act_malignant = (1.0 - p) * costs.c_fp + p * costs.c_tp;
            let act_benign = (1.0 - p) * costs.c_tn + p * costs.c_fn;
            assert_eq!(act_malignant <= act_benign, p >= t, "p = {p}");
        }
    }

    #[test]
    fn triage_costs_give_low_thresholds() {
        for (fp, fn_) in [(1.0, 1.5), (0.2, 10.0), (3.0, 3.0001)] {
            let t = binary_threshold(&BinaryCosts::errors(fp, fn_).unwrap()).unwrap();
            assert!(t > 0.0 && t < 0.5);
        }
    }

    #[test]
    fn decide_examples() {
        let names = vec!["a".to_string(), "b".to_string()];
        let costs = CostMatrix::new(vec![vec![0.0, 10.0], vec![1.0, 0.0]], names).unwrap();
        let e = expected_costs(&pv(vec![0.6, 0.4]), &costs).unwrap();
        assert_eq!(e, vec![4.0, 0.6]);
        assert_eq!(decide(&pv(vec![0.6, 0.4]), &costs).unwrap(), 1);

        let zero_one = CostMatrix::zero_one(3);
        assert_eq!(decide(&pv(vec![0.2, 0.5, 0.3]), &zero_one).unwrap(), 1);
        assert_eq!(decide(&pv(vec![0.4, 0.2, 0.4]), &zero_one).unwrap(), 0);

        let names3 = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let m = CostMatrix::new(vec![vec![3.0, 3.0], vec![1.0, 4.0], vec![2.0, 1.0]], names3).unwrap();
        assert_eq!(decide(&pv(vec![0.5, 0.5]), &m).unwrap(), 2);

        assert!(matches!(
            decide(&pv(vec![0.2, 0.3, 0.5]), &costs),
            Err(DecisionError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn expected_cost_identities() {
        let ds = LogitDataset::multiclass(vec![50.0, 0.0, 0.0, 50.0, 0.0, 50.0], vec![0, 1, 1], 2).unwrap();
        let one = Temperature::ONE;
        assert_eq!(empirical_expected_cost(&ds, one, &CostMatrix::zero_one(2)).unwrap(), 0.0);
        let ds = LogitDataset::multiclass(vec![1.0, 0.0, 0.0, 1.0, 2.0, 0.5], vec![0, 0, 1], 2).unwrap();
        let cost = empirical_expected_cost(&ds, one, &CostMatrix::zero_one(2)).unwrap();
        assert!((cost - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            empirical_expected_cost(&ds, one, &CostMatrix::zero_one(3)),
            Err(DecisionError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn sampled_costs_satisfy_their_constraint() {
        let tax = crate::types::ClassTaxonomy::from_flags(vec![
            crate::types::Malignancy::Benign,
            crate::types::Malignancy::Benign,
            crate::types::Malignancy::Malignant,
            crate::types::Malignancy::Malignant,
        ])
        .unwrap();
        let mut rng = substream(5, 0);
        for constraint in [CostConstraint::MalignantMissDominant, CostConstraint::BenignMisclassificationDominant] {
            for _ in 0..1000 {
                let m = sample_constrained_costs(constraint, &tax, &mut rng);
                assert!(satisfies_constraint(&m, &tax, constraint));
            }
        }
    }

    #[test]
    fn binary_sampled_thresholds_below_half() {
        let tax = ClassTaxonomy::binary();
        let mut rng = substream(9, 0);
        for _ in 0..1000 {
            let m = sample_constrained_costs(CostConstraint::MalignantMissDominant, &tax, &mut rng);
            assert!(m.cost(0, 1) > m.cost(1, 0));
            let t = implied_threshold(&m).unwrap();
            assert!(t > 0.0 && t < 0.5, "{t}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let tax = ClassTaxonomy::binary();
        let draw = |seed| {
            let mut rng = substream(seed, 0);
            (0..10)
                .map(|_| sample_constrained_costs(CostConstraint::MalignantMissDominant, &tax, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
        assert_ne!(draw(1), draw(2));
    }

    #[test]
    fn zero_one_ties_follow_argmax() {
        let e = 1.0 / 3.0;
        // 1 - p summed in different orders would differ in the last bit
        let p = pv(vec![0.1, e, e, 1.0 - 0.1 - e - e]);
        let zero_one = CostMatrix::zero_one(4);
        let argmax = crate::scaling::predict_class(p.as_slice());
        assert_eq!(decide(&p, &zero_one).unwrap(), argmax);
        let p = pv(vec![0.2, 0.4, 0.4]);
        assert_eq!(decide(&p, &CostMatrix::zero_one(3)).unwrap(), 1);
    }

    #[test]
    fn exact_sign_resolves_cancellation() {
        assert_eq!(
            exact_cost_difference_sign(&[1e16, 1.0], &[1e16, 0.0], &[1.0, 1e-16]),
            Ordering::Greater
        );
        assert_eq!(exact_cost_difference_sign(&[0.1, 0.2], &[0.2, 0.1], &[0.5, 0.5]), Ordering::Equal);
    }

    #[test]
    fn constraint_names_parse() {
        for c in [CostConstraint::MalignantMissDominant, CostConstraint::BenignMisclassificationDominant] {
            assert_eq!(c.name().parse::<CostConstraint>().unwrap(), c);
        }
        assert!("other".parse::<CostConstraint>().is_err());
    }
}

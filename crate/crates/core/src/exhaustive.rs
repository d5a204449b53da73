//! Brute-force ground truth for small instances: the best and worst cost over every
//! feasible schedule, and the greedy approximation ratio they certify.

use crate::entropy_oracle::EntropyObjective;
use crate::error::{Error, Result};
use crate::sensing::Schedule;

/// Default cap on the number of schedules an enumeration may visit.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// `MAX - OPT` below which an instance counts as degenerate.
pub const DEGENERATE_RANGE: f64 = 1e-12;
/// Distance to `OPT` accepted as equal on degenerate instances.
pub const EQUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnumerationMode {
    /// Every set of size exactly `s_k`.
    ExactBudget,
    /// Every set of size at most `s_k`, including the empty set.
    #[default]
    UpToBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub mode: EnumerationMode,
    pub cap: u128,
    pub keep_table: bool,
    pub parallel: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            mode: EnumerationMode::UpToBudget,
            cap: DEFAULT_CAP,
            keep_table: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub opt_cost: f64,
    pub max_cost: f64,
    pub opt_schedule: Schedule,
    pub max_schedule: Schedule,
    pub num_enumerated: usize,
    /// Every schedule with its cost, in enumeration order.
    pub full_table: Option<Vec<(Vec<Vec<usize>>, f64)>>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of candidate sets at one step.
pub fn candidates_per_step(m: usize, budget: usize, mode: EnumerationMode) -> u128 {
    match mode {
        EnumerationMode::ExactBudget => binomial(m, budget),
        EnumerationMode::UpToBudget => (0..=budget.min(m)).map(|j| binomial(m, j)).sum(),
    }
}

/// Number of schedules an enumeration visits; saturates instead of overflowing.
pub fn count_schedules(m: usize, budgets: &[usize], mode: EnumerationMode) -> u128 {
    budgets
        .iter()
        .fold(1u128, |acc, &b| acc.saturating_mul(candidates_per_step(m, b, mode)))
}

/// Candidate sets of one step, by size and then lexicographically.
pub fn step_candidates(m: usize, budget: usize, mode: EnumerationMode) -> Vec<Vec<usize>> {
    let sizes = match mode {
        EnumerationMode::ExactBudget => budget..=budget,
        EnumerationMode::UpToBudget => 0..=budget,
    };
    let mut out = Vec::new();
    for size in sizes {
        if size > m {
            break;
        }
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            // advance to the next combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == m - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// Evaluates every feasible schedule.
pub fn exhaustive_optimum<O: EntropyObjective + ?Sized>(
    obj: &O,
    budgets: &[usize],
    opts: EnumerationOptions,
) -> Result<EnumerationResult> {
    let m = obj.num_sensors();
    if budgets.len() != obj.horizon() {
        return Err(Error::InvalidParams(format!(
            "{} budgets for a horizon of {}",
            budgets.len(),
            obj.horizon()
        )));
    }
    let count = count_schedules(m, budgets, opts.mode);
    if count > opts.cap {
        return Err(Error::TooLarge { count, cap: opts.cap });
    }
    if count == 0 {
        return Err(Error::InvalidParams("no feasible schedule (budget exceeds sensors)".into()));
    }
    let per_step: Vec<Vec<Vec<usize>>> = budgets
        .iter()
        .map(|&b| step_candidates(m, b, opts.mode))
        .collect();
    let count = count as usize;

    // Mixed-radix decoding, step 0 most significant.
    let decode = |mut idx: usize| -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); per_step.len()];
        for k in (0..per_step.len()).rev() {
            let radix = per_step[k].len();
            sets[k] = per_step[k][idx % radix].clone();
            idx /= radix;
        }
        sets
    };
    let eval = |idx: usize| obj.evaluate(&decode(idx));

    let values: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            if opts.parallel {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(eval).collect::<Result<_>>()?
            } else {
                (0..count).map(eval).collect::<Result<_>>()?
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..count).map(eval).collect::<Result<_>>()?
        }
    };

    let (mut best, mut worst) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
        if *v > values[worst] {
            worst = i;
        }
    }
    let full_table = opts
        .keep_table
        .then(|| values.iter().enumerate().map(|(i, &v)| (decode(i), v)).collect());
    Ok(EnumerationResult {
        opt_cost: values[best],
        max_cost: values[worst],
        opt_schedule: Schedule::new(decode(best), budgets.to_vec())?,
        max_schedule: Schedule::new(decode(worst), budgets.to_vec())?,
        num_enumerated: count,
        full_table,
    })
}

/// `(cost - OPT) / (MAX - OPT)`, or the degenerate-instance verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundCertificate {
    Ratio(f64),
    /// `MAX == OPT` and the cost equals `OPT`.
    CertifiedEqual,
    /// `MAX == OPT` but the cost differs from `OPT` by `gap`.
    DegenerateMismatch { gap: f64 },
}

impl BoundCertificate {
    pub fn from_costs(cost: f64, opt: f64, max: f64) -> Self {
        let range = max - opt;
        if range <= DEGENERATE_RANGE {
            let gap = (cost - opt).abs();
            if gap <= EQUAL_TOL {
                BoundCertificate::CertifiedEqual
            } else {
                BoundCertificate::DegenerateMismatch { gap }
            }
        } else {
            BoundCertificate::Ratio((cost - opt) / range)
        }
    }

    /// Ratio, with certified-equal instances reported as zero.
    pub fn ratio(&self) -> Option<f64> {
        match *self {
            BoundCertificate::Ratio(r) => Some(r),
            BoundCertificate::CertifiedEqual => Some(0.0),
            BoundCertificate::DegenerateMismatch { .. } => None,
        }
    }

    /// Whether the certificate satisfies `ratio <= bound`.
    pub fn within(&self, bound: f64) -> bool {
        self.ratio().is_some_and(|r| r <= bound)
    }
}

/// Enumerates the instance and certifies `greedy_cost` against it.
pub fn certify_bound<O: EntropyObjective + ?Sized>(
    obj: &O,
    budgets: &[usize],
    greedy_cost: f64,
    opts: EnumerationOptions,
) -> Result<(BoundCertificate, EnumerationResult)> {
    let res = exhaustive_optimum(obj, budgets, opts)?;
    Ok((
        BoundCertificate::from_costs(greedy_cost, res.opt_cost, res.max_cost),
        res,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Modular {
        weights: Vec<Vec<f64>>,
    }

    impl EntropyObjective for Modular {
        fn num_sensors(&self) -> usize {
            self.weights[0].len()
        }
        fn horizon(&self) -> usize {
            self.weights.len()
        }
        fn evaluate(&self, sets: &[Vec<usize>]) -> Result<f64> {
            Ok(self.empty_value()
                - sets
                    .iter()
                    .enumerate()
                    .flat_map(|(k, s)| s.iter().map(move |&i| self.weights[k][i]))
                    .sum::<f64>())
        }
        fn empty_value(&self) -> f64 {
            10.0
        }
    }

    #[test]
    fn candidate_generation() {
        assert_eq!(
            step_candidates(3, 2, EnumerationMode::UpToBudget),
            vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(step_candidates(4, 4, EnumerationMode::ExactBudget), vec![vec![0, 1, 2, 3]]);
        assert_eq!(step_candidates(3, 0, EnumerationMode::ExactBudget), vec![Vec::<usize>::new()]);
        for m in 0..7 {
            for b in 0..=m {
                for mode in [EnumerationMode::ExactBudget, EnumerationMode::UpToBudget] {
                    assert_eq!(step_candidates(m, b, mode).len() as u128, candidates_per_step(m, b, mode));
                }
            }
        }
    }

    #[test]
    fn single_sensor_enumeration() {
        let obj = Modular { weights: vec![vec![2.0]] };
        let res = exhaustive_optimum(&obj, &[1], EnumerationOptions::default()).unwrap();
        assert_eq!(res.num_enumerated, 2);
        assert_eq!(res.opt_cost, 8.0);
        assert_eq!(res.max_cost, 10.0);
        assert_eq!(res.opt_schedule.sets(), &[vec![0]]);
        assert_eq!(res.max_schedule.sets(), &[Vec::<usize>::new()]);
    }

    #[test]
    fn counts_match_formula() {
        let obj = Modular { weights: vec![vec![1.0, 2.0, 3.0, 4.0]; 2] };
        let opts = EnumerationOptions { keep_table: true, ..Default::default() };
        let up = exhaustive_optimum(&obj, &[2, 1], opts).unwrap();
        assert_eq!(up.num_enumerated, 11 * 5);
        assert_eq!(up.full_table.as_ref().unwrap().len(), 55);
        assert_eq!(up.full_table.as_ref().unwrap()[0].0, vec![Vec::<usize>::new(), vec![]]);
        let exact = exhaustive_optimum(
            &obj,
            &[2, 1],
            EnumerationOptions { mode: EnumerationMode::ExactBudget, ..Default::default() },
        )
        .unwrap();
        assert_eq!(exact.num_enumerated, 6 * 4);
        assert_eq!(exact.opt_cost, up.opt_cost);
        assert_eq!(exact.opt_schedule.sets(), &[vec![2, 3], vec![3]]);
    }

    #[test]
    fn cap_is_enforced() {
        let obj = Modular { weights: vec![vec![1.0; 10]; 3] };
        let opts = EnumerationOptions { cap: 100, ..Default::default() };
        assert!(matches!(
            exhaustive_optimum(&obj, &[2, 2, 2], opts),
            Err(Error::TooLarge { count: 175_616, cap: 100 })
        ));
    }

    #[test]
    fn certificates() {
        assert_eq!(BoundCertificate::from_costs(1.0, 1.0, 3.0), BoundCertificate::Ratio(0.0));
        assert_eq!(BoundCertificate::from_costs(3.0, 1.0, 3.0), BoundCertificate::Ratio(1.0));
        assert!(!BoundCertificate::from_costs(3.0, 1.0, 3.0).within(0.5));
        assert_eq!(BoundCertificate::from_costs(1.0, 1.0, 1.0), BoundCertificate::CertifiedEqual);
        assert!(BoundCertificate::CertifiedEqual.within(0.5));
        assert!(matches!(
            BoundCertificate::from_costs(1.1, 1.0, 1.0),
            BoundCertificate::DegenerateMismatch { .. }
        ));
    }
}

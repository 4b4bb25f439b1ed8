use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Non-negative weights on proximity, discriminative power and feasibility
/// that sum to one, held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightTriple {
    pub w_p: Ratio<u32>,
    pub w_d: Ratio<u32>,
    pub w_f: Ratio<u32>,
}

impl WeightTriple {
    pub fn new(w_p: Ratio<u32>, w_d: Ratio<u32>, w_f: Ratio<u32>) -> Result<Self, EvalError> {
        if w_p + w_d + w_f != Ratio::from_integer(1) {
            return Err(EvalError::InvalidStep(format!("weights {w_p} + {w_d} + {w_f} != 1")));
        }
        Ok(Self { w_p, w_d, w_f })
    }

    pub fn as_f64(&self) -> [f64; 3] {
        let f = |r: Ratio<u32>| *r.numer() as f64 / *r.denom() as f64;
        [f(self.w_p), f(self.w_d), f(self.w_f)]
    }
}

/// Every weight triple on the simplex lattice with spacing `step = 1/n`, in
/// order of increasing `w_p`, then `w_d`. There are `(n + 1)(n + 2) / 2`.
pub fn barycentric_grid(step: Ratio<u32>) -> Result<Vec<WeightTriple>, EvalError> {
    if *step.numer() != 1 || *step.denom() == 0 {
        return Err(EvalError::InvalidStep(step.to_string()));
    }
    let n = *step.denom();
    let mut out = Vec::with_capacity(((n + 1) * (n + 2) / 2) as usize);
    for i in 0..=n {
        for j in 0..=n - i {
            out.push(WeightTriple {
                w_p: Ratio::new(i, n),
                w_d: Ratio::new(j, n),
                w_f: Ratio::new(n - i - j, n),
            });
        }
    }
    Ok(out)
}

/// Per-criterion `(min, max)` of proximity, feasibility and dpow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBounds {
    pub proximity: (f64, f64),
    pub feasibility: (f64, f64),
    pub dpow: (f64, f64),
}

impl UtilityBounds {
    /// Fits bounds over `(proximity, feasibility, dpow)` triples.
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a [f64; 3]>) -> Self {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for p in points {
            for (bj, &v) in b.iter_mut().zip(p) {
                bj.0 = bj.0.min(v);
                bj.1 = bj.1.max(v);
            }
        }
        Self {
            proximity: b[0],
            feasibility: b[1],
            dpow: b[2],
        }
    }
}

fn scaled(v: f64, (lo, hi): (f64, f64)) -> f64 {
    let spread = hi - lo;
    if spread > 0.0 {
        (v - lo) / spread
    } else {
        0.0
    }
}

/// Weighted utility of `(proximity, feasibility, dpow)`; every term is
/// oriented so that larger is better:
/// `w_p (1 - prox') + w_d dpow' + w_f (1 - feas')` with min-max scaled
/// primes.
pub fn utility(c: &[f64; 3], w: &WeightTriple, bounds: &UtilityBounds) -> f64 {
    let [wp, wd, wf] = w.as_f64();
    wp * (1.0 - scaled(c[0], bounds.proximity))
        + wd * scaled(c[2], bounds.dpow)
        + wf * (1.0 - scaled(c[1], bounds.feasibility))
}

/// Selected counterfactual criteria of one method, one entry per covered
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCriteria {
    pub method: String,
    /// `(proximity, feasibility, dpow)`.
    pub criteria: Vec<[f64; 3]>,
}

impl MethodCriteria {
    /// Per-criterion mean, `None` without covered instances.
    pub fn mean(&self) -> Option<[f64; 3]> {
        if self.criteria.is_empty() {
            return None;
        }
        let n = self.criteria.len() as f64;
        let mut s = [0.0; 3];
        for c in &self.criteria {
            for (sj, v) in s.iter_mut().zip(c) {
                *sj += v;
            }
        }
        Some(s.map(|v| v / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub weights: WeightTriple,
    pub winner: String,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub bounds: UtilityBounds,
    pub rows: Vec<SweepRow>,
}

/// For every grid triple, the method with the highest mean utility over its
/// covered instances. Bounds are fitted over every method's selected
/// counterfactuals; methods without coverage are skipped; ties go to the
/// lexicographically smaller method name.
///
/// Utility is affine in the criteria, so the mean utility equals the utility
/// of the mean criteria, which is what is evaluated.
pub fn sweep(methods: &[MethodCriteria], step: Ratio<u32>) -> Result<SweepResult, EvalError> {
    let grid = barycentric_grid(step)?;
    let bounds = UtilityBounds::fit(methods.iter().flat_map(|m| &m.criteria));
    let mut means: Vec<(&str, [f64; 3])> = methods
        .iter()
        .filter_map(|m| m.mean().map(|c| (m.method.as_str(), c)))
        .collect();
    if means.is_empty() {
        return Err(EvalError::Empty("no method produced any counterfactual".into()));
    }
    means.sort_by(|a, b| a.0.cmp(b.0));
    let rows = grid
        .into_iter()
        .map(|w| {
            let mut best = (means[0].0, utility(&means[0].1, &w, &bounds));
            for (name, c) in &means[1..] {
                let u = utility(c, &w, &bounds);
                if u > best.1 {
                    best = (name, u);
                }
            }
            SweepRow {
                weights: w,
                winner: best.0.to_string(),
                utility: best.1,
            }
        })
        .collect();
    Ok(SweepResult { bounds, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        for (n, want) in [(1u32, 3usize), (2, 6), (15, 136), (16, 153)] {
            let g = barycentric_grid(Ratio::new(1, n)).unwrap();
            assert_eq!(g.len(), want);
            let stars_and_bars = ((n + 1) * (n + 2) / 2) as usize;
            assert_eq!(g.len(), stars_and_bars);
            assert!(g.iter().all(|w| w.w_p + w.w_d + w.w_f == Ratio::from_integer(1)));
        }
        assert!(barycentric_grid(Ratio::new(2, 3)).is_err());
        // 2/4 reduces to 1/2
        assert_eq!(barycentric_grid(Ratio::new(2, 4)).unwrap().len(), 6);
    }

    fn corner(p: u32, d: u32, f: u32) -> WeightTriple {
        WeightTriple::new(Ratio::from_integer(p), Ratio::from_integer(d), Ratio::from_integer(f)).unwrap()
    }

    fn methods() -> Vec<MethodCriteria> {
        vec![
            MethodCriteria { method: "a".into(), criteria: vec![[1.0, 5.0, 0.5]] },
            MethodCriteria { method: "b".into(), criteria: vec![[3.0, 2.0, 0.4]] },
            MethodCriteria { method: "c".into(), criteria: vec![[2.0, 4.0, 0.9]] },
            MethodCriteria { method: "empty".into(), criteria: vec![] },
        ]
    }

    #[test]
    fn corners_pick_per_criterion_best() {
        let m = methods();
        let b = UtilityBounds::fit(m.iter().flat_map(|m| &m.criteria));
        let best = |w: WeightTriple| {
            let mut v: Vec<(f64, &str)> = m
                .iter()
                .filter_map(|x| x.mean().map(|c| (utility(&c, &w, &b), x.method.as_str())))
                .collect();
            v.sort_by(|x, y| y.0.total_cmp(&x.0));
            v[0].1.to_string()
        };
        assert_eq!(best(corner(1, 0, 0)), "a");
        assert_eq!(best(corner(0, 1, 0)), "c");
        assert_eq!(best(corner(0, 0, 1)), "b");
        let s = sweep(&m, Ratio::new(1, 1)).unwrap();
        let winners: Vec<&str> = s.rows.iter().map(|r| r.winner.as_str()).collect();
        // grid order: (0,0,1), (0,1,0), (1,0,0)
        assert_eq!(winners, ["b", "c", "a"]);
    }

    #[test]
    fn centre_matches_enumeration() {
        let m = methods();
        let b = UtilityBounds::fit(m.iter().flat_map(|m| &m.criteria));
        let w = WeightTriple::new(Ratio::new(1, 3), Ratio::new(1, 3), Ratio::new(1, 3)).unwrap();
        // a: (1 - 0) + 0.2 + (1 - 1) = 1.2; b: 0 + 0 + 1 = 1.0; c: 0.5 + 1 + 1/3
        let want = [1.2 / 3.0, 1.0 / 3.0, (0.5 + 1.0 + 1.0 / 3.0) / 3.0];
        for (mc, u) in m.iter().zip(want) {
            assert!((utility(&mc.mean().unwrap(), &w, &b) - u).abs() < 1e-12);
        }
        let s = sweep(&m, Ratio::new(1, 3)).unwrap();
        let row = s.rows.iter().find(|r| r.weights == w).unwrap();
        assert_eq!(row.winner, "c");
    }

    #[test]
    fn ties_go_to_smaller_name() {
        let m = vec![
            MethodCriteria { method: "zeta".into(), criteria: vec![[1.0, 1.0, 1.0]] },
            MethodCriteria { method: "alpha".into(), criteria: vec![[1.0, 1.0, 1.0]] },
        ];
        let s = sweep(&m, Ratio::new(1, 2)).unwrap();
        assert!(s.rows.iter().all(|r| r.winner == "alpha"));
        assert!(sweep(&[], Ratio::new(1, 2)).is_err());
    }
}

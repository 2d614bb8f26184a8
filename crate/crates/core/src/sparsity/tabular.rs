use crate::datagen::VisitCounts;
use crate::error::{Error, Result};
use crate::sparsity::score::PenaltyVector;
use crate::table::Table;

/// Count-based multiplicative cost penalty `alpha / sqrt(n) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPenalty {
    pub omega: Table,
    pub alpha: f64,
}

/// Penalty value for a single count. Unvisited pairs are charged as if
/// visited once, keeping the penalty finite.
pub fn count_penalty(n: u64, alpha: f64) -> f64 {
    alpha / (n.max(1) as f64).sqrt() + 1.0
}

pub fn tabular_penalty(counts: &VisitCounts, alpha: f64) -> Result<TabularPenalty> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be a finite non-negative number, got {alpha}"
        )));
    }
    let omega = Table::from_fn(counts.n_states(), counts.n_actions(), |s, a| {
        count_penalty(counts.get(s, a), alpha)
    });
    Ok(TabularPenalty { omega, alpha })
}

/// Uniform multiplier, the data-independent baseline.
pub fn constant_penalty(n_states: usize, n_actions: usize, alpha: f64) -> Result<TabularPenalty> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "constant multiplier must be positive, got {alpha}"
        )));
    }
    Ok(TabularPenalty {
        omega: Table::filled(n_states, n_actions, alpha),
        alpha,
    })
}

/// Either kind of penalty, aligned with the matching kind of costs.
pub enum Penalty<'a> {
    PerPoint(&'a PenaltyVector),
    Tabular(&'a TabularPenalty),
}

pub enum Costs<'a> {
    PerPoint(&'a [f64]),
    Tabular(&'a Table),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenalizedCosts {
    PerPoint(Vec<f64>),
    Tabular(Table),
}

/// Elementwise `C * omega`.
pub fn penalize_costs(costs: Costs<'_>, penalty: Penalty<'_>) -> Result<PenalizedCosts> {
    let out = match (costs, penalty) {
        (Costs::PerPoint(c), Penalty::PerPoint(p)) => {
            if c.len() != p.values.len() {
                return Err(Error::Shape(format!(
                    "{} costs but {} penalties",
                    c.len(),
                    p.values.len()
                )));
            }
            PenalizedCosts::PerPoint(c.iter().zip(&p.values).map(|(c, w)| c * w).collect())
        }
        (Costs::Tabular(c), Penalty::Tabular(p)) => {
            PenalizedCosts::Tabular(c.zip_map(&p.omega, |c, w| c * w)?)
        }
        _ => {
            return Err(Error::Shape(
                "per-point costs need per-point penalties and tables need tables".into(),
            ))
        }
    };
    let finite = match &out {
        PenalizedCosts::PerPoint(v) => v.iter().all(|x| x.is_finite()),
        PenalizedCosts::Tabular(t) => t.all_finite(),
    };
    if !finite {
        return Err(Error::InvalidArgument(
            "penalized costs are not finite".into(),
        ));
    }
    Ok(out)
}

/// Table-valued shorthand for [`penalize_costs`].
pub fn penalize_table(costs: &Table, penalty: &TabularPenalty) -> Result<Table> {
    match penalize_costs(Costs::Tabular(costs), Penalty::Tabular(penalty))? {
        PenalizedCosts::Tabular(t) => Ok(t),
        PenalizedCosts::PerPoint(_) => unreachable!("tabular inputs give tabular output"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(count_penalty(4, 2.0), 2.0);
        assert_eq!(count_penalty(0, 3.0), 4.0);
        assert_eq!(count_penalty(17, 0.0), 1.0);
        assert!(count_penalty(10, 1.0) > count_penalty(100, 1.0));
        assert!(count_penalty(100, 1.0) > 1.0);
        assert!(count_penalty(100_000_000, 1.0) - 1.0 <= 1e-3);
    }

    #[test]
    fn table_penalty_and_errors() {
        let counts = VisitCounts::from_matrix(&[vec![0, 1], vec![4, 100]]).unwrap();
        let p = tabular_penalty(&counts, 2.0).unwrap();
        assert_eq!(p.omega.as_slice(), &[3.0, 3.0, 2.0, 1.2]);
        assert!(tabular_penalty(&counts, -1.0).is_err());
        assert!(constant_penalty(2, 2, 0.0).is_err());
    }

    #[test]
    fn penalize_shapes() {
        let c = Table::from_vec(1, 2, vec![0.0, 2.0]).unwrap();
        let p = constant_penalty(1, 2, 10.0).unwrap();
        assert_eq!(penalize_table(&c, &p).unwrap().as_slice(), &[0.0, 20.0]);
        let pv = PenaltyVector {
            values: vec![1.0, 2.0],
            batch_size: 2,
        };
        assert!(penalize_costs(Costs::PerPoint(&[1.0]), Penalty::PerPoint(&pv)).is_err());
        assert!(penalize_costs(Costs::Tabular(&c), Penalty::PerPoint(&pv)).is_err());
        let out = penalize_costs(Costs::PerPoint(&[1.0, 3.0]), Penalty::PerPoint(&pv)).unwrap();
        assert_eq!(out, PenalizedCosts::PerPoint(vec![1.0, 6.0]));
    }
}

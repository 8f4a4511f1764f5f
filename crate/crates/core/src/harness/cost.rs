//! Replays measured per-operation means into totals for the one-to-many
//! authorization comparison.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("cost model field {0} must be a positive finite number")]
pub struct NonPositiveModel(pub &'static str);

/// Mean seconds per operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub grant_student: f64,
    pub grant_staff: f64,
    pub publish_student_token: f64,
    pub publish_staff_token: f64,
    pub obtain_student_token: f64,
    pub obtain_staff_token: f64,
}

/// Means reported for the prototype deployment.
pub const PROTOTYPE_MEANS: CostModel = CostModel {
    grant_student: 18.235,
    grant_staff: 19.872,
    publish_student_token: 32.926,
    publish_staff_token: 40.443,
    obtain_student_token: 3.668,
    obtain_staff_token: 3.754,
};

impl CostModel {
    pub fn validate(&self) -> Result<(), NonPositiveModel> {
        let fields = [
            ("grant_student", self.grant_student),
            ("grant_staff", self.grant_staff),
            ("publish_student_token", self.publish_student_token),
            ("publish_staff_token", self.publish_staff_token),
            ("obtain_student_token", self.obtain_student_token),
            ("obtain_staff_token", self.obtain_staff_token),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, _)) => Err(NonPositiveModel(name)),
            None => Ok(()),
        }
    }
}

/// Returns `(dcaci_total_s, proposed_total_s)`.
pub fn replay_cost_model(
    model: &CostModel,
    n_students: u64,
    n_staff: u64,
) -> Result<(f64, f64), NonPositiveModel> {
    model.validate()?;
    let (s, t) = (n_students as f64, n_staff as f64);
    let dcaci = s * model.grant_student + t * model.grant_staff;
    let proposed = model.publish_student_token
        + model.publish_staff_token
        + s * model.obtain_student_token
        + t * model.obtain_staff_token;
    Ok((dcaci, proposed))
}

/// Smallest population size from which the proposed scheme is cheaper for
/// every split between students and staff. `None` if it never is.
pub fn break_even_subjects(model: &CostModel) -> Result<Option<u64>, NonPositiveModel> {
    model.validate()?;
    let fixed = model.publish_student_token + model.publish_staff_token;
    let mut worst: u64 = 0;
    for (grant, obtain) in [
        (model.grant_student, model.obtain_student_token),
        (model.grant_staff, model.obtain_staff_token),
    ] {
        let saving = grant - obtain;
        if saving <= 0.0 {
            return Ok(None);
        }
        // first integer n with fixed + obtain*n < grant*n
        let n = (fixed / saving).floor() as u64 + 1;
        worst = worst.max(n);
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_for_the_lab_population() {
        let (d, p) = replay_cost_model(&PROTOTYPE_MEANS, 1000, 200).unwrap();
        assert!((d - 22209.4).abs() <= 1e-6 * 22209.4);
        assert!((p - 4492.169).abs() <= 1e-6 * 4492.169);
        let (d0, p0) = replay_cost_model(&PROTOTYPE_MEANS, 0, 0).unwrap();
        assert_eq!(d0, 0.0);
        assert!((p0 - 73.369).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive() {
        let mut m = PROTOTYPE_MEANS;
        m.obtain_staff_token = 0.0;
        assert_eq!(
            replay_cost_model(&m, 1, 1),
            Err(NonPositiveModel("obtain_staff_token"))
        );
        m.obtain_staff_token = f64::NAN;
        assert!(m.validate().is_err());
    }

    #[test]
    fn break_even_matches_direct_search() {
        let n = break_even_subjects(&PROTOTYPE_MEANS).unwrap().unwrap();
        let cheaper_for_all_splits = |n: u64| {
            (0..=n).all(|s| {
                let (d, p) = replay_cost_model(&PROTOTYPE_MEANS, s, n - s).unwrap();
                p < d
            })
        };
        assert!(cheaper_for_all_splits(n));
        assert!(!cheaper_for_all_splits(n - 1));
        assert!((n..n + 200).all(cheaper_for_all_splits));
    }
}

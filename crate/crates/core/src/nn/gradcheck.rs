/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Coordinates whose one-sided slopes differ by more than this (relative)
/// are treated as nondifferentiable points and skipped.
const KINK_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub excluded: Vec<usize>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares `analytic` against central finite differences of `f` at `point`.
///
/// Error per coordinate is `|a - n| / max(1, |a| + |n|)`. With `coords` set,
/// only those coordinates are probed.
pub fn grad_check<F>(mut f: F, point: &[f64], analytic: &[f64], coords: Option<&[usize]>) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(point.len(), analytic.len(), "gradient length must match point");
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..point.len()).collect();
            &all
        }
    };
    let mut x = point.to_vec();
    let f0 = f(&x);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        excluded: Vec::new(),
    };
    for &i in coords {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let fp = f(&x);
        x[i] = orig - FD_STEP;
        let fm = f(&x);
        x[i] = orig;
        let right = (fp - f0) / FD_STEP;
        let left = (f0 - fm) / FD_STEP;
        if (right - left).abs() > KINK_THRESHOLD * (1.0f64).max(right.abs() + left.abs()) {
            report.excluded.push(i);
            continue;
        }
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        let a = analytic[i];
        let err = (a - numeric).abs() / (1.0f64).max(a.abs() + numeric.abs());
        report.checked += 1;
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}

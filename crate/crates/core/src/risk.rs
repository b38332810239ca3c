//! Squared-loss risk functionals over binned data, and the capacity term of
//! the VC risk bound used as a diagnostic.

use crate::domain::{Partition, RateFunction, TimeWindow};
use crate::error::{Error, Result};

/// Indices of the points falling in each bin, plus the bin sizes `m_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinAssignment {
    pub members: Vec<Vec<usize>>,
}

impl BinAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Assigns each time to its half-open bin. A time equal to the window end
/// goes to the last bin; anything else outside the window is rejected.
pub fn assign_bins(data_window: TimeWindow, times: &[f64], partition: &Partition) -> Result<BinAssignment> {
    data_window.check_same(&partition.window())?;
    let mut members = vec![Vec::new(); partition.num_bins()];
    for (i, &t) in times.iter().enumerate() {
        let k = partition.bin_of(t).ok_or(Error::OutOfWindow {
            time: t,
            start: data_window.start(),
            end: data_window.end(),
        })?;
        members[k].push(i);
    }
    Ok(BinAssignment { members })
}

/// Mean squared error of `model` on `(time, count)` points.
pub fn empirical_risk<M: RateFunction + ?Sized>(model: &M, points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("empirical risk needs at least one point"));
    }
    let sse: f64 = points.iter().map(|&(t, y)| (y - model.rate(t)).powi(2)).sum();
    Ok(sse / points.len() as f64)
}

/// `(1/m) sum_k m_k R_k` with `m = sum_k m_k`.
pub fn binned_risk(risks: &[f64], sizes: &[usize]) -> Result<f64> {
    if risks.len() != sizes.len() {
        return Err(Error::domain(format!("{} risks but {} bin sizes", risks.len(), sizes.len())));
    }
    let m: usize = sizes.iter().sum();
    if m == 0 {
        return Err(Error::Empty("binned risk needs at least one point"));
    }
    let weighted: f64 = risks.iter().zip(sizes).map(|(r, &n)| n as f64 * r).sum();
    Ok(weighted / m as f64)
}

/// Binned risk plus the length-scaled penalty
/// `gamma * sum_{k < n} m_k R_k / (b_k - b_{k-1})`; the last bin carries no
/// penalty term.
pub fn penalized_risk(risks: &[f64], sizes: &[usize], partition: &Partition, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("gamma must be a nonnegative number, got {gamma}")));
    }
    if risks.len() != partition.num_bins() {
        return Err(Error::domain(format!(
            "{} risks for a partition of {} bins",
            risks.len(),
            partition.num_bins()
        )));
    }
    let base = binned_risk(risks, sizes)?;
    Ok(base + gamma * length_penalty(risks, sizes, partition)?)
}

/// `sum_{k < n} m_k R_k / (b_k - b_{k-1})`.
pub(crate) fn length_penalty(risks: &[f64], sizes: &[usize], partition: &Partition) -> Result<f64> {
    let n = partition.num_bins();
    let mut total = 0.0;
    for k in 0..n.saturating_sub(1) {
        let (a, b) = partition.bin_bounds(k);
        let len = b - a;
        if len <= 0.0 {
            return Err(Error::InvalidPartition(format!("bin {k} has zero length")));
        }
        total += sizes[k] as f64 * risks[k] / len;
    }
    Ok(total)
}

/// Capacity term `xi = (h (ln(2m/h) + 1) - ln(eta/4)) / m`.
pub fn vc_bound_xi(m: usize, h: usize, eta: f64) -> Result<f64> {
    if h < 1 || m <= h {
        return Err(Error::domain(format!("need m > h >= 1, got m = {m}, h = {h}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("confidence eta must lie in (0, 1), got {eta}")));
    }
    let (m, h) = (m as f64, h as f64);
    Ok((h * ((2.0 * m / h).ln() + 1.0) - (eta / 4.0).ln()) / m)
}

/// Upper bound on the expected risk holding with probability `1 - eta`
/// for losses bounded in `[0, bound]`:
/// `R_emp + 2 B xi (1 + sqrt(1 + R_emp / (B xi)))`.
pub fn risk_bound(empirical: f64, bound: f64, xi: f64) -> Result<f64> {
    if !(bound > 0.0) || !(xi > 0.0) || empirical < 0.0 {
        return Err(Error::domain("risk bound needs B > 0, xi > 0 and R_emp >= 0"));
    }
    Ok(empirical + 2.0 * bound * xi * (1.0 + (1.0 + empirical / (bound * xi)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RateModel;

    fn w10() -> TimeWindow {
        TimeWindow::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn boundary_point_goes_right() {
        let p = Partition::new(w10(), vec![5.0]).unwrap();
        let a = assign_bins(w10(), &[1.0, 5.0, 9.0], &p).unwrap();
        assert_eq!(a.members, vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn empty_points_give_empty_bins() {
        let p = Partition::new(w10(), vec![2.0, 7.0]).unwrap();
        assert_eq!(assign_bins(w10(), &[], &p).unwrap().sizes(), vec![0, 0, 0]);
    }

    #[test]
    fn window_mismatch_is_explicit() {
        let p = Partition::trivial(TimeWindow::new(0.0, 20.0).unwrap());
        let err = assign_bins(w10(), &[1.0], &p).unwrap_err();
        assert!(err.to_string().contains("window mismatch"), "{err}");
    }

    #[test]
    fn empirical_risk_cases() {
        let three = RateModel::constant(w10(), 3.0);
        assert_eq!(empirical_risk(&three, &[(1.0, 3.0), (4.0, 3.0)]).unwrap(), 0.0);
        let zero = RateModel::constant(w10(), 0.0);
        assert_eq!(empirical_risk(&zero, &[(1.0, 2.0), (2.0, 4.0)]).unwrap(), 10.0);
        assert!(empirical_risk(&zero, &[]).is_err());
    }

    #[test]
    fn binned_risk_cases() {
        assert!((binned_risk(&[1.0, 4.0], &[2, 3]).unwrap() - 2.8).abs() < 1e-15);
        assert_eq!(binned_risk(&[0.0, 0.0], &[4, 1]).unwrap(), 0.0);
        assert_eq!(binned_risk(&[1.7], &[9]).unwrap(), 1.7);
        assert!(binned_risk(&[1.0], &[0]).is_err());
        assert!(binned_risk(&[1.0, 2.0], &[1]).is_err());
    }

    #[test]
    fn penalized_risk_cases() {
        let w = TimeWindow::new(0.0, 30.0).unwrap();
        let p = Partition::new(w, vec![10.0]).unwrap();
        let r = penalized_risk(&[1.0, 2.0], &[4, 6], &p, 0.5).unwrap();
        assert!((r - 1.8).abs() < 1e-12);
        assert_eq!(penalized_risk(&[0.0, 0.0], &[4, 6], &p, 3.0).unwrap(), 0.0);
        assert_eq!(
            penalized_risk(&[1.0, 2.0], &[4, 6], &p, 0.0).unwrap(),
            binned_risk(&[1.0, 2.0], &[4, 6]).unwrap()
        );
        assert!(penalized_risk(&[1.0, 2.0], &[4, 6], &p, -1.0).is_err());
    }

    #[test]
    fn xi_closed_form() {
        let xi = vc_bound_xi(1000, 10, 0.05).unwrap();
        assert!((xi - 0.067_365).abs() < 5e-7, "{xi}");
        assert!(vc_bound_xi(10, 10, 0.05).is_err());
        assert!(vc_bound_xi(100, 0, 0.05).is_err());
        assert!(vc_bound_xi(100, 10, 1.0).is_err());
    }

    #[test]
    fn xi_eta_limit() {
        // -ln(eta/4) tends to ln 4 as eta -> 1
        let near = vc_bound_xi(1000, 10, 1.0 - 1e-12).unwrap();
        let limit = (10.0 * ((200.0f64).ln() + 1.0) + 4.0f64.ln()) / 1000.0;
        assert!((near - limit).abs() < 1e-12);
    }

    #[test]
    fn xi_decreases_as_m_doubles() {
        for h in [1usize, 3, 10, 40] {
            let start = ((std::f64::consts::E.powi(2) * h as f64 / 2.0).ceil() as usize).max(h + 1);
            let mut m = start;
            while m < 1_000_000 {
                let a = vc_bound_xi(m, h, 0.05).unwrap();
                let b = vc_bound_xi(2 * m, h, 0.05).unwrap();
                assert!(b < a, "h={h} m={m}");
                m = m * 3 / 2 + 1;
            }
        }
    }

    #[test]
    fn risk_bound_exceeds_empirical() {
        let xi = vc_bound_xi(1000, 10, 0.05).unwrap();
        let b = risk_bound(0.3, 1.0, xi).unwrap();
        assert!(b > 0.3);
        assert!(risk_bound(0.3, 0.0, xi).is_err());
    }
}

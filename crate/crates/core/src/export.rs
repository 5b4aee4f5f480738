//! CSV writers. Floats are written with 12 significant digits.

use crate::average::{AlphaRecord, BisectionStep};
use crate::discounted::{AgeComparison, DiscountedSolution};
use crate::error::Result;
use crate::grid::AgeGrid;
use crate::reduction::EmbeddedSmdp;
use crate::sim::{McEstimate, Trajectory};
use std::io::Write;

/// `x` rounded to 12 significant digits in the shortest of fixed or
/// exponent notation, like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Columns `state, target, p_hat, D, tau_bar, f`.
pub fn write_embedded<W: Write>(w: W, e: &EmbeddedSmdp) -> Result<()> {
    let mut out = writer(w, &["state", "target", "p_hat", "D", "tau_bar", "f"])?;
    for row in &e.rows {
        for (&(j, p), &(_, d)) in row.p_hat.iter().zip(&row.transfer) {
            out.write_record([
                row.state.to_string(),
                j.to_string(),
                fmt_sig(p),
                fmt_sig(d),
                fmt_sig(row.tau_bar),
                fmt_sig(row.f),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Survival curves as `state, age, value`.
pub fn write_survival<W: Write>(w: W, grid: &AgeGrid, e: &EmbeddedSmdp) -> Result<()> {
    let mut out = writer(w, &["state", "age", "value"])?;
    for row in &e.rows {
        for (y, s) in grid.nodes().iter().zip(&row.survival) {
            out.write_record([row.state.to_string(), fmt_sig(*y), fmt_sig(*s)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Sojourn CDFs as `state, target, age, value`; undefined ones are skipped.
pub fn write_cdfs<W: Write>(w: W, grid: &AgeGrid, e: &EmbeddedSmdp) -> Result<()> {
    let mut out = writer(w, &["state", "target", "age", "value"])?;
    for row in &e.rows {
        for (j, cdf) in &row.cdf {
            let Some(cdf) = cdf else { continue };
            for (y, f) in grid.nodes().iter().zip(cdf) {
                out.write_record([row.state.to_string(), j.to_string(), fmt_sig(*y), fmt_sig(*f)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `state, age, phi, action, u0, u1, ...` per grid node.
pub fn write_phi<W: Write>(w: W, s: &DiscountedSolution, actions: &[Vec<f64>]) -> Result<()> {
    let dims = actions.first().map_or(0, Vec::len);
    let mut header = vec!["state".to_string(), "age".into(), "phi".into(), "action".into()];
    header.extend((0..dims).map(|d| format!("u{d}")));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    let grid = s.policy.grid();
    for (i, phi) in s.phi.iter().enumerate() {
        for (k, (&y, &v)) in grid.nodes().iter().zip(phi).enumerate() {
            let a = s.policy.row(i)[k].as_point().expect("solver policies are deterministic");
            let mut rec = vec![i.to_string(), fmt_sig(y), fmt_sig(v), a.to_string()];
            rec.extend(actions[a].iter().map(|&u| fmt_sig(u)));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `state, value`.
pub fn write_values<W: Write>(w: W, values: &[f64]) -> Result<()> {
    let mut out = writer(w, &["state", "value"])?;
    for (i, v) in values.iter().enumerate() {
        out.write_record([i.to_string(), fmt_sig(*v)])?;
    }
    out.flush()?;
    Ok(())
}

/// `iteration, residual`.
pub fn write_convergence<W: Write>(w: W, history: &[f64]) -> Result<()> {
    let mut out = writer(w, &["iteration", "residual"])?;
    for (n, r) in history.iter().enumerate() {
        out.write_record([(n + 1).to_string(), fmt_sig(*r)])?;
    }
    out.flush()?;
    Ok(())
}

/// `alpha, alpha_V0, max_abs_h`.
pub fn write_alpha_diagnostics<W: Write>(w: W, records: &[AlphaRecord]) -> Result<()> {
    let mut out = writer(w, &["alpha", "alpha_V0", "max_abs_h"])?;
    for r in records {
        out.write_record([fmt_sig(r.alpha), fmt_sig(r.alpha_v_ref), fmt_sig(r.max_abs_h)])?;
    }
    out.flush()?;
    Ok(())
}

/// `g, Phi`.
pub fn write_bisection_trace<W: Write>(w: W, trace: &[BisectionStep]) -> Result<()> {
    let mut out = writer(w, &["g", "Phi"])?;
    for s in trace {
        out.write_record([fmt_sig(s.g), fmt_sig(s.phi)])?;
    }
    out.flush()?;
    Ok(())
}

/// `estimator, mean, se, n, truncation_bound`.
pub fn write_estimates<W: Write>(w: W, rows: &[(String, McEstimate)]) -> Result<()> {
    let mut out = writer(w, &["estimator", "mean", "se", "n", "truncation_bound"])?;
    for (name, e) in rows {
        out.write_record([name.clone(), fmt_sig(e.mean), fmt_sig(e.se), e.n.to_string(), fmt_sig(e.truncation_bound)])?;
    }
    out.flush()?;
    Ok(())
}

/// `n, T_n, X_T_n, tau_n, Z_n`.
pub fn write_trajectory<W: Write>(w: W, t: &Trajectory) -> Result<()> {
    let mut out = writer(w, &["n", "T_n", "X_T_n", "tau_n", "Z_n"])?;
    for n in 0..t.states.len() {
        out.write_record([
            n.to_string(),
            fmt_sig(t.jump_times[n]),
            t.states[n].to_string(),
            fmt_sig(t.sojourns[n]),
            fmt_sig(t.costs[n]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `state, V_ageaware, V_ageblind, relative_improvement`.
pub fn write_comparison<W: Write>(w: W, c: &AgeComparison) -> Result<()> {
    let mut out = writer(w, &["state", "V_ageaware", "V_ageblind", "relative_improvement"])?;
    for i in 0..c.aware.values.len() {
        out.write_record([
            i.to_string(),
            fmt_sig(c.aware.values[i]),
            fmt_sig(c.blind.values[i]),
            fmt_sig(c.relative_improvement[i]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `quantity, value`.
pub fn write_quantities<W: Write>(w: W, rows: &[(&str, f64)]) -> Result<()> {
    let mut out = writer(w, &["quantity", "value"])?;
    for (name, v) in rows {
        out.write_record([name.to_string(), fmt_sig(*v)])?;
    }
    out.flush()?;
    Ok(())
}

/// `state` followed by one column per named per-state vector.
pub fn write_state_columns<W: Write>(w: W, columns: &[(&str, &[f64])]) -> Result<()> {
    let header: Vec<&str> = std::iter::once("state").chain(columns.iter().map(|c| c.0)).collect();
    let mut out = writer(w, &header)?;
    let n = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for i in 0..n {
        let row = std::iter::once(i.to_string()).chain(columns.iter().map(|c| fmt_sig(c.1[i])));
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1234.5), "1234.5");
        assert_eq!(fmt_sig(-2.0), "-2");
        assert_eq!(fmt_sig(1.0e-7 / 3.0), "3.33333333333e-8");
        assert_eq!(fmt_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(999_999_999_999.9), "1e12");
    }

    #[test]
    fn estimates_layout() {
        let mut buf = Vec::new();
        let e = McEstimate { mean: 0.25, se: 0.001, n: 10, truncation_bound: 0.0 };
        write_estimates(&mut buf, &[("discounted".into(), e)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "estimator,mean,se,n,truncation_bound\ndiscounted,0.25,0.001,10,0\n");
    }
}

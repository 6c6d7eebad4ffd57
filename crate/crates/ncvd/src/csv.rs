//! CSV tables for error sweeps and energy histories.

use std::io::{self, Write};

use ncvd_core::{ErrorRecord, EnergyReport};

pub const ERROR_HEADER: &str = "h,tau,err_rho,rate_rho,err_u,rate_u,err_theta,rate_theta,err_p,rate_p";

pub const ENERGY_HEADER: &str = "step,time,sigma_sq,sigma_u_sq,sigma_theta_sq,grad_u_sq,grad_theta_sq,\
density_slack,momentum_slack,temperature_slack";

/// Formats like C's `%g`: six significant digits, trailing zeros removed,
/// exponent form outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    const P: i32 = 6;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // The exponent after rounding decides the style.
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn error_row(r: &ErrorRecord) -> String {
    let e = r.errors();
    let rate = |k: usize| r.rates.map_or(String::new(), |v| fmt_g(v[k]));
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_g(r.h),
        fmt_g(r.tau),
        fmt_g(e[0]),
        rate(0),
        fmt_g(e[1]),
        rate(1),
        fmt_g(e[2]),
        rate(2),
        fmt_g(e[3]),
        rate(3)
    )
}

pub fn write_errors(mut w: impl Write, records: &[ErrorRecord]) -> io::Result<()> {
    writeln!(w, "{ERROR_HEADER}")?;
    for r in records {
        writeln!(w, "{}", error_row(r))?;
    }
    Ok(())
}

pub fn write_energy(mut w: impl Write, report: &EnergyReport) -> io::Result<()> {
    writeln!(w, "{ENERGY_HEADER}")?;
    for s in &report.steps {
        let vals = [
            s.time,
            s.sigma_sq,
            s.sigma_u_sq,
            s.sigma_theta_sq,
            s.grad_u_sq,
            s.grad_theta_sq,
            s.density_slack,
            s.momentum_slack,
            s.temperature_slack,
        ];
        let cols: Vec<String> = vals.iter().map(|&v| fmt_g(v)).collect();
        writeln!(w, "{},{}", s.step, cols.join(","))?;
    }
    Ok(())
}

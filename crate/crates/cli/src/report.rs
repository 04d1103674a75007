use std::fmt::Write;

use crate::bundle::ResultBundle;

#[derive(Clone, Copy)]
enum Format {
    /// Rate in 1/s, shown as `(x ms)^-1` or `(x us)^-1`.
    Rate,
    Percent,
    Plain,
    Scientific,
}

/// Headline metrics with the measured device values they compare to.
const REFERENCES: [(&str, Format, &str); 22] = [
    ("bias_ratio", Format::Plain, "over 265"),
    ("gamma_21", Format::Rate, "(244 us)^-1"),
    ("gamma_12", Format::Rate, "(33.6 ms)^-1"),
    ("gamma_int", Format::Rate, "(20 ms)^-1"),
    ("gamma_res", Format::Rate, "(8.9 ms)^-1"),
    ("gamma_total", Format::Rate, "(6.2 ms)^-1"),
    ("gamma_relax", Format::Rate, "(6.2 ms)^-1"),
    ("gamma_phase", Format::Rate, "(3.1 ms)^-1"),
    ("erasure_rate", Format::Rate, "(197 us)^-1"),
    ("missed_erasure", Format::Percent, "0.004%"),
    ("gamma_01", Format::Rate, "(0.62 ms)^-1"),
    ("gamma_02", Format::Rate, "(3.7 ms)^-1"),
    ("gain_factor", Format::Plain, "6.0"),
    ("dephasing_per_check", Format::Percent, "0.26%"),
    ("false_positive", Format::Percent, "0.22%"),
    ("false_negative", Format::Percent, "0.69%"),
    ("logical_assignment_error", Format::Percent, "0.6%"),
    ("r_clifford", Format::Scientific, "6.21e-3"),
    ("r_gate", Format::Scientific, "2.86e-3"),
    ("erasure_per_gate", Format::Scientific, "4.50e-2"),
    ("process_fidelity_reduced", Format::Plain, "0.998"),
    ("fidelity", Format::Plain, "-"),
];

/// References that differ by experiment; checked before `REFERENCES`.
const OVERRIDES: [(&str, &str, &str); 3] = [
    ("ramsey", "gamma_phase", "(0.52 ms)^-1"),
    ("ramsey", "gamma_02", "(3.7 ms)^-1 with the cpmg dephasing rate"),
    ("ramsey", "gain_factor", "6.0 with the cpmg dephasing rate"),
];

fn reference_for(experiment: &str, key: &str, default: &'static str) -> &'static str {
    OVERRIDES
        .iter()
        .find(|(e, k, _)| *e == experiment && *k == key)
        .map_or(default, |o| o.2)
}

fn format_value(v: f64, f: Format) -> String {
    match f {
        Format::Rate if v.abs() < 1e-3 => "0 /s".to_string(),
        Format::Rate if v > 0.0 => {
            let period = 1.0 / v;
            if period >= 1e-3 {
                format!("({:.3} ms)^-1", period * 1e3)
            } else {
                format!("({:.1} us)^-1", period * 1e6)
            }
        }
        Format::Rate => format!("{v:.3e} /s"),
        Format::Percent => format!("{:.4}%", v * 100.0),
        Format::Plain => format!("{v:.4}"),
        Format::Scientific => format!("{v:.3e}"),
    }
}

/// Summary table: known metrics with their reference values first, then
/// any remaining metrics.
pub fn render(bundle: &ResultBundle) -> String {
    let mut out = String::new();
    if bundle.metrics.is_empty() && bundle.series.is_empty() {
        out.push_str("no results\n");
        return out;
    }
    let _ = writeln!(
        out,
        "{} (seed {}, version {}, {})",
        bundle.experiment, bundle.seed, bundle.version, bundle.timestamp
    );
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for (key, fmt, reference) in REFERENCES {
        if let Some(&v) = bundle.metrics.get(key) {
            rows.push((
                key.to_string(),
                format_value(v, fmt),
                reference_for(&bundle.experiment, key, reference).to_string(),
            ));
        }
    }
    for (key, &v) in &bundle.metrics {
        if !REFERENCES.iter().any(|(k, _, _)| k == key) {
            rows.push((key.clone(), format!("{v:.6}"), "-".into()));
        }
    }
    if rows.is_empty() {
        out.push_str("no results\n");
        return out;
    }
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    for (k, v, r) in rows {
        let _ = writeln!(out, "{k:<w0$}  {v:<w1$} | reference: {r}");
    }
    for w in &bundle.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_print_as_inverse_times() {
        assert_eq!(format_value(1.0 / 19.9e-3, Format::Rate), "(19.900 ms)^-1");
        assert_eq!(format_value(1.0 / 244e-6, Format::Rate), "(244.0 us)^-1");
        assert_eq!(format_value(4e-5, Format::Percent), "0.0040%");
        assert_eq!(format_value(-1e-12, Format::Rate), "0 /s");
    }
}

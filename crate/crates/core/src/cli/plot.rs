//! Turns a sweep CSV into a standalone matplotlib script.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::commands::SWEEP_COLUMNS;
use super::{CliError, EXIT_OK};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub has_detector: bool,
    /// Rows grouped by detector (a single "" group without a detector column).
    pub groups: BTreeMap<String, Vec<(f64, f64, bool)>>,
    pub rows: usize,
}

fn garbled(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("garbled sweep CSV at line {line}: {}", msg.into()))
}

pub fn parse_sweep_csv(text: &str) -> Result<SweepTable, CliError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| garbled(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let axis = cols[0];
    if !matches!(axis, "L_km" | "pump_mw" | "mu") {
        return Err(garbled(1, format!("unknown axis column {axis:?}")));
    }
    let has_detector = match cols.len() {
        n if n == SWEEP_COLUMNS.len() + 1 => false,
        n if n == SWEEP_COLUMNS.len() + 2 && cols[n - 1] == "detector" => true,
        _ => return Err(garbled(1, "unexpected header")),
    };
    if cols[1..=SWEEP_COLUMNS.len()] != SWEEP_COLUMNS {
        return Err(garbled(1, "unexpected header"));
    }
    let secure_idx = 1 + SWEEP_COLUMNS
        .iter()
        .position(|c| *c == "secure_bps")
        .unwrap();
    let flags_idx = SWEEP_COLUMNS.len();

    let mut groups: BTreeMap<String, Vec<(f64, f64, bool)>> = BTreeMap::new();
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(garbled(
                i + 1,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        for (j, raw) in fields[..flags_idx].iter().enumerate() {
            if raw.parse::<f64>().is_err() {
                return Err(garbled(
                    i + 1,
                    format!("column {} is not a number: {raw:?}", cols[j]),
                ));
            }
        }
        let x: f64 = fields[0].parse().unwrap();
        let r: f64 = fields[secure_idx].parse().unwrap();
        let insecure = fields[flags_idx].split('|').any(|f| f == "insecure");
        let key = if has_detector {
            fields[cols.len() - 1].to_string()
        } else {
            String::new()
        };
        groups.entry(key).or_default().push((x, r, insecure));
        rows += 1;
    }
    Ok(SweepTable {
        axis: axis.to_string(),
        has_detector,
        groups,
        rows,
    })
}

fn python_str(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn axis_label(axis: &str) -> &'static str {
    match axis {
        "L_km" => "fiber length (km)",
        "pump_mw" => "pump power (mW)",
        _ => "mean photon number",
    }
}

/// Script that re-reads `csv_path` and plots secure_bps on a log axis,
/// one trace per detector, skipping insecure rows.
pub fn render_script(csv_path: &str, table: &SweepTable) -> String {
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("import csv\n\nimport matplotlib.pyplot as plt\n\n");
    s.push_str(&format!("CSV_PATH = {}\n", python_str(csv_path)));
    s.push_str(&format!("AXIS = {}\n\n", python_str(&table.axis)));
    if table.rows == 0 {
        s.push_str("# warning: the CSV has a header but no data rows\n");
    }
    s.push_str(
        "traces = {}\n\
         with open(CSV_PATH, newline='') as fh:\n\
         \x20   for row in csv.DictReader(fh):\n\
         \x20       if 'insecure' in row['flags'].split('|'):\n\
         \x20           continue\n\
         \x20       rate = float(row['secure_bps'])\n\
         \x20       if rate <= 0:\n\
         \x20           continue\n\
         \x20       key = row.get('detector', 'secure rate')\n\
         \x20       xs, ys = traces.setdefault(key, ([], []))\n\
         \x20       xs.append(float(row[AXIS]))\n\
         \x20       ys.append(rate)\n\n",
    );
    s.push_str("fig, ax = plt.subplots()\n");
    s.push_str("for label, (xs, ys) in traces.items():\n");
    s.push_str("    ax.plot(xs, ys, label=label)\n");
    s.push_str("ax.set_yscale('log')\n");
    s.push_str(&format!(
        "ax.set_xlabel({})\n",
        python_str(axis_label(&table.axis))
    ));
    s.push_str("ax.set_ylabel('secure key rate (bit/s)')\n");
    s.push_str("if traces:\n    ax.legend()\n");
    s.push_str("ax.grid(True, which='both', alpha=0.3)\n");
    s.push_str("plt.show()\n");
    s
}

/// `plot`: validate the CSV, then write the script to `script_path` or `out`.
pub fn cmd_plot(
    csv_path: &Path,
    script_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let text = fs::read_to_string(csv_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", csv_path.display())))?;
    let table = parse_sweep_csv(&text)?;
    let script = render_script(&csv_path.display().to_string(), &table);
    match script_path {
        Some(p) => fs::write(p, script)?,
        None => out.write_all(script.as_bytes())?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str =
        "L_km,p_signal,p_dark,p_click,qber,tau,f,sifted_bps,secure_bps,secure_deadtime_bps,flags";

    #[test]
    fn groups_by_detector() {
        let text = format!(
            "{HEAD},detector\n1e0,1,0,1,0.01,0.9,1.16,5e5,1e5,9e4,,si\n2e0,1,0,1,0.3,0,NaN,5e5,0e0,0e0,insecure,ingaas\n"
        );
        let t = parse_sweep_csv(&text).unwrap();
        assert!(t.has_detector);
        assert_eq!(t.rows, 2);
        assert_eq!(t.groups["si"], vec![(1.0, 1e5, false)]);
        assert_eq!(t.groups["ingaas"], vec![(2.0, 0.0, true)]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_sweep_csv("").is_err());
        assert!(parse_sweep_csv("a,b,c\n").is_err());
        let short = format!("{HEAD}\n1,2,3\n");
        assert!(parse_sweep_csv(&short).is_err());
        let nan_word = format!("{HEAD}\nx,1,0,1,0.01,0.9,1.16,5e5,1e5,9e4,\n");
        assert!(parse_sweep_csv(&nan_word).is_err());
    }

    #[test]
    fn header_only_warns() {
        let t = parse_sweep_csv(&format!("{HEAD}\n")).unwrap();
        let script = render_script("out.csv", &t);
        assert!(script.contains("warning"));
        assert!(script.contains("CSV_PATH = 'out.csv'"));
        assert!(script.contains("set_yscale('log')"));
    }

    #[test]
    fn path_is_quoted() {
        assert_eq!(python_str(r"a'b\c"), r"'a\'b\\c'");
    }
}

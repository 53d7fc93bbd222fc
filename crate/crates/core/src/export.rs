//! Pinned text formats for numeric output.

/// 17 significant digits in scientific notation, `.` decimal separator.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key: value` metadata lines, one per entry.
pub fn metadata_header(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        for line in v.lines() {
            s.push_str(&format!("# {k}: {line}\n"));
        }
    }
    s
}

/// CSV with a header row and one row per record.
pub fn csv_table(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_number).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

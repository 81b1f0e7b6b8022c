use std::io::{self, Write};

use rrgraph::rational::{self, Rational};

/// Exact rational for tables: integers bare, otherwise `p/q`.
pub fn rat(r: &Rational) -> String {
    r.to_string()
}

/// Float with at most 12 significant digits.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn dec(r: &Rational, digits: usize) -> String {
    rational::to_decimal(r, digits)
}

/// Left-aligned columns separated by two spaces.
pub fn table(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            if k + 1 == cells.len() {
                s.push_str(c);
            } else {
                s.push_str(c);
                s.push_str(&" ".repeat(width[k] - c.chars().count() + 2));
            }
        }
        s
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

/// `key  value` lines with aligned values.
pub fn pairs(out: &mut dyn Write, items: &[(&str, String)]) -> io::Result<()> {
    let w = items.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (k, v) in items {
        writeln!(out, "{k}{}  {v}", " ".repeat(w - k.chars().count()))?;
    }
    Ok(())
}

//! Plain-text dump of a [`LinearProgram`] for triage.

use std::fmt::{self, Write as _};

use super::LinearProgram;

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "minimize")?;
        let mut line = String::new();
        for (j, c) in self.objective().iter().enumerate() {
            if *c != 0.0 {
                write!(line, " {c:+}*x{j}")?;
            }
        }
        writeln!(f, " {}", if line.is_empty() { " 0" } else { &line })?;
        writeln!(f, "subject to")?;
        for i in 0..self.num_rows() {
            let mut line = String::new();
            for (j, a) in self.row(i).iter().enumerate() {
                if *a != 0.0 {
                    write!(line, " {a:+}*x{j}")?;
                }
            }
            writeln!(f, " r{i}:{} <= {}", line, bound(self.rhs()[i]))?;
        }
        writeln!(f, "bounds")?;
        for j in 0..self.num_vars() {
            writeln!(
                f,
                " x{j} in [{}, {}]",
                bound(self.lower()[j]),
                bound(self.upper()[j])
            )?;
        }
        Ok(())
    }
}

impl LinearProgram {
    /// Text form used by `Display`: objective, rows, then bounds.
    pub fn to_debug_text(&self) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_lists_rows_and_bounds() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add_row(&[1.0, -2.0], 3.0).unwrap();
        lp.set_bounds(1, 0.0, f64::INFINITY).unwrap();
        let text = lp.to_debug_text();
        assert!(text.contains("+1*x0"));
        assert!(text.contains("r0: +1*x0 -2*x1 <= 3"));
        assert!(text.contains("x1 in [0, inf]"));
        assert!(text.contains("x0 in [-inf, inf]"));
    }
}

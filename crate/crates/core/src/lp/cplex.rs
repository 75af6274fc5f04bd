//! CPLEX LP text output and the external-solver protocol.
//!
//! The external command receives the program on stdin. Variables are
//! written as `x0, x1, ...` and rows as `r0, r1, ...`; the objective
//! constant is kept out of the file and added back afterwards. The command
//! must print one line `status optimal|infeasible|unbounded` followed, when
//! optimal, by one `name value` line per nonzero variable.

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use super::{LinearProgram, LpError, LpResult, LpStatus, Sense, Solver};

fn term(out: &mut String, first: bool, coef: f64, var: usize) {
    if coef < 0.0 {
        let _ = write!(out, " - {} x{var}", -coef);
    } else if first {
        let _ = write!(out, " {coef} x{var}");
    } else {
        let _ = write!(out, " + {coef} x{var}");
    }
}

/// Renders `lp` in CPLEX LP format.
pub fn write_lp(lp: &LinearProgram) -> String {
    let mut out = String::from("\\ generated by riskplan\nMaximize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, j);
            first = false;
        }
    }
    if first {
        out.push_str(" 0 x0");
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        let mut first = true;
        for &(j, a) in &c.coeffs {
            if a != 0.0 {
                term(&mut out, first, a, j);
                first = false;
            }
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let _ = writeln!(out, " x{j} >= 0");
    }
    out.push_str("End\n");
    out
}

/// Parses the reply of an external solver for a program with `n` variables.
pub fn parse_solution(text: &str, n: usize) -> Result<(LpStatus, Vec<f64>), LpError> {
    let bad = |m: String| LpError::External(m);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let status = match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
        Some(parts) if parts.len() == 2 && parts[0] == "status" => match parts[1] {
            "optimal" => LpStatus::Optimal,
            "infeasible" => LpStatus::Infeasible,
            "unbounded" => LpStatus::Unbounded,
            other => return Err(bad(format!("unknown status `{other}`"))),
        },
        _ => return Err(bad("first line must be `status <value>`".into())),
    };
    let mut x = vec![0.0; n];
    for line in lines {
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("malformed line `{line}`")));
        };
        let j: usize = name
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .filter(|&j| j < n)
            .ok_or_else(|| bad(format!("unknown variable `{name}`")))?;
        x[j] = value.parse().map_err(|_| bad(format!("bad value `{value}`")))?;
    }
    Ok((status, x))
}

/// Runs a shell command that speaks the protocol above.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: String,
}

impl ExternalSolver {
    pub fn new(command: &str) -> Self {
        ExternalSolver {
            command: command.to_string(),
        }
    }
}

impl Solver for ExternalSolver {
    fn name(&self) -> String {
        format!("external:{}", self.command)
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpResult, LpError> {
        lp.check()?;
        let io = |e: std::io::Error| LpError::External(format!("`{}`: {e}", self.command));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(io)?;
        let text = write_lp(lp);
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // A solver may exit before reading everything; its reply decides.
            let _ = stdin.write_all(text.as_bytes());
        }
        let out = child.wait_with_output().map_err(io)?;
        if !out.status.success() {
            return Err(LpError::External(format!("`{}` exited with {}", self.command, out.status)));
        }
        let (status, x) = parse_solution(&String::from_utf8_lossy(&out.stdout), lp.num_vars())?;
        Ok(LpResult {
            status,
            objective: if status == LpStatus::Optimal { lp.objective_value(&x) } else { f64::NAN },
            x,
            iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solver_from_spec;

    fn tiny() -> LinearProgram {
        let mut p = LinearProgram::default();
        let a = p.add_var("a", 0.9);
        let b = p.add_var("b", -1.0);
        p.add_constraint("bal", vec![(a, 1.0)], Sense::Eq, 1.0);
        p.add_constraint("risk", vec![(a, 2.0), (b, -1.0)], Sense::Le, 3.5);
        p.constant = 1.0;
        p
    }

    #[test]
    fn lp_text_layout() {
        let text = write_lp(&tiny());
        assert!(text.contains("Maximize\n obj: 0.9 x0 - 1 x1\n"));
        assert!(text.contains(" r0: 1 x0 = 1\n"));
        assert!(text.contains(" r1: 2 x0 - 1 x1 <= 3.5\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn reply_parsing() {
        let (s, x) = parse_solution("status optimal\nx0 1\nx1 0.5\n", 2).unwrap();
        assert_eq!(s, LpStatus::Optimal);
        assert_eq!(x, vec![1.0, 0.5]);
        assert!(parse_solution("optimal\n", 2).is_err());
        assert!(parse_solution("status optimal\nx7 1\n", 2).is_err());
        assert_eq!(parse_solution("status infeasible", 2).unwrap().0, LpStatus::Infeasible);
    }

    #[test]
    fn external_command_round_trip() {
        let solver = solver_from_spec("external:cat > /dev/null; printf 'status optimal\\nx0 1\\n'").unwrap();
        let r = solver.solve(&tiny()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 1.9).abs() < 1e-12);
        assert!(solver_from_spec("external:").is_err());
        assert!(solver_from_spec("glpk").is_err());
        let failing = solver_from_spec("external:exit 3").unwrap();
        assert!(matches!(failing.solve(&tiny()), Err(LpError::External(_))));
    }
}

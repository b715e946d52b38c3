use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{BlockKind, SdpError, SdpProblem};

/// Writes the problem in sparse SDPA format.
///
/// SDPA's dual form `max <F0, Y>` s.t. `<Fi, Y> = ci` is our primal with
/// `F0 = −C`, `Fi = Ai`, `ci = bi`. Free variables `u = u⁺ − u⁻` become an
/// extra diagonal block of size `2·free_vars`.
pub fn write_sdpa<W: Write>(prob: &SdpProblem, mut w: W) -> Result<(), SdpError> {
    prob.validate()?;
    let nf = prob.free_vars;
    let nblocks = prob.blocks.len() + usize::from(nf > 0);
    writeln!(w, "{}", prob.constraints.len())?;
    writeln!(w, "{nblocks}")?;
    let mut dims: Vec<String> = prob
        .blocks
        .iter()
        .map(|b| match *b {
            BlockKind::Psd(n) => format!("{n}"),
            BlockKind::Diag(n) => format!("-{n}"),
        })
        .collect();
    if nf > 0 {
        dims.push(format!("-{}", 2 * nf));
    }
    writeln!(w, "{}", dims.join(" "))?;
    let rhs: Vec<String> = prob.constraints.iter().map(|c| format!("{}", c.rhs)).collect();
    writeln!(w, "{}", rhs.join(" "))?;

    let free_block = prob.blocks.len() + 1;
    let emit = |w: &mut W,
                idx: usize,
                blocks: &[(usize, super::SparseSym)],
                free: &[(usize, f64)],
                sign: f64|
     -> Result<(), SdpError> {
        let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (b, s) in blocks {
            let mut s = s.clone();
            s.canonicalize();
            for &(i, j, v) in &s.entries {
                entries.push((b + 1, i + 1, j + 1, sign * v));
            }
        }
        let mut fr: Vec<(usize, f64)> = free.to_vec();
        fr.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (k, v) in fr {
            match merged.last_mut() {
                Some(l) if l.0 == k => l.1 += v,
                _ => merged.push((k, v)),
            }
        }
        for (k, v) in merged {
            if v != 0.0 {
                entries.push((free_block, k + 1, k + 1, sign * v));
                entries.push((free_block, nf + k + 1, nf + k + 1, -sign * v));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        for (b, i, j, v) in entries {
            writeln!(w, "{idx} {b} {i} {j} {v}")?;
        }
        Ok(())
    };
    emit(&mut w, 0, &prob.objective.blocks, &prob.objective.free, -1.0)?;
    for (ci, c) in prob.constraints.iter().enumerate() {
        emit(&mut w, ci + 1, &c.blocks, &c.free, 1.0)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_sdpa(prob: &SdpProblem, path: &Path) -> Result<(), SdpError> {
    let f = File::create(path)?;
    write_sdpa(prob, BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::super::{Constraint, SparseSym};
    use super::*;

    #[test]
    fn single_block_header() {
        let mut p = SdpProblem::new(vec![BlockKind::Psd(1)], 0);
        p.add_constraint(Constraint {
            blocks: vec![(0, SparseSym::single(0, 0, 1.0))],
            free: vec![],
            rhs: 1.0,
        });
        let mut buf = Vec::new();
        write_sdpa(&p, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("1\n1\n1\n"));
        assert_eq!(s, "1\n1\n1\n1\n1 1 1 1 1\n");
    }
}

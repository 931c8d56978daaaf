use crate::correctors::ApproxSolution;
use crate::direct::DirectSolution;
use crate::error::{Error, Result};
use crate::field::ModeField;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub times: Vec<f64>,
    /// ‖u_direct − u_app‖ at each time.
    pub total: Vec<f64>,
    pub direct_norm: Vec<f64>,
    /// ‖part‖ at each time.
    pub parts: BTreeMap<String, Vec<f64>>,
    pub sup: f64,
    /// ‖u_direct‖ ≤ ‖u_direct − u_app‖ + Σ‖part‖ at every time.
    pub attribution_ok: bool,
}

/// Error curves of a direct run against an approximate solution (all parts,
/// or only those listed in `only`).
pub fn compare(direct: &DirectSolution, approx: &ApproxSolution, only: Option<&[&str]>) -> Result<CompareResult> {
    let modes = approx.total().modes();
    if let Some(kh) = modes.iter().find(|kh| !direct.modes.contains_key(*kh)) {
        return Err(Error::Incompatible(format!("approximation carries mode {kh:?} absent from the direct run")));
    }
    let parts: Vec<_> = approx.parts.iter().filter(|p| only.is_none_or(|o| o.contains(&p.name.as_str()))).collect();
    let mut sum = crate::correctors::TermField::default();
    for p in &parts {
        sum.extend(p.field.clone());
    }
    let times = direct.times().to_vec();
    let mut out = CompareResult { times: times.clone(), total: vec![], direct_norm: vec![], parts: BTreeMap::new(), sup: 0.0, attribution_ok: true };
    for (i, _) in times.iter().enumerate() {
        let d = direct.l2_difference(i, &sum);
        let n = direct.l2_norm(i);
        let mut acc = d;
        for p in &parts {
            // ‖part‖ sampled on the direct grid, for a consistent triangle test
            let pn = {
                let m = direct.modes.values().next().expect("nonempty run");
                let mut s = 0.0;
                for kh in p.field.modes() {
                    let u = vec![crate::field::ZERO3; m.z.len()];
                    s += crate::direct::l2_difference(&m.z, &u, &p.field, kh, m.times[i]).powi(2);
                }
                s.sqrt()
            };
            acc += pn;
            out.parts.entry(p.name.clone()).or_default().push(pn);
        }
        if n > acc * (1.0 + 1e-12) + 1e-300 {
            out.attribution_ok = false;
        }
        out.total.push(d);
        out.direct_norm.push(n);
        out.sup = out.sup.max(d);
    }
    Ok(out)
}

impl CompareResult {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let names: Vec<&String> = self.parts.keys().collect();
        write!(w, "t,error,direct_norm")?;
        for n in &names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t:.10e},{:.10e},{:.10e}", self.total[i], self.direct_norm[i])?;
            for n in &names {
                write!(w, ",{:.10e}", self.parts[*n][i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

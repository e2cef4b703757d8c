//! Parsing of the `--problem` and `--solver` command-line grammars.

use anyhow::{anyhow, bail, Result};
use krylov_stab_core::krylov::{SolverMethod, SubsolveKind};
use krylov_stab_core::problems::{ProblemKind, ProblemSpec};

/// What to run: a built-in generator or a Matrix Market file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemArg {
    Ep3,
    Random(ProblemSpec),
    Nullsym { order: usize, nullity: usize },
}

impl ProblemArg {
    /// Grammar: `ep3`, `random:<m>x<n>[,density=<f>][,rankdef=<k>][,consistent]`,
    /// or `nullsym:<order>[,nullity=<k>]`.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "ep3" {
            return Ok(ProblemArg::Ep3);
        }
        if let Some(rest) = text.strip_prefix("random:") {
            let mut parts = rest.split(',');
            let dims = parts.next().ok_or_else(|| anyhow!("missing dimensions"))?;
            let (m, n) = parse_dims(dims)?;
            let mut spec = ProblemSpec {
                kind: ProblemKind::RandomRect,
                nrows: m,
                ncols: n,
                density: 0.1,
                rank_deficiency: 0,
                rng_seed: 0,
                consistent: false,
            };
            for part in parts {
                if part == "consistent" {
                    spec.consistent = true;
                } else if let Some(v) = part.strip_prefix("density=") {
                    spec.density = v.parse()?;
                } else if let Some(v) = part.strip_prefix("rankdef=") {
                    spec.rank_deficiency = v.parse()?;
                } else {
                    bail!("unknown random problem option '{part}'");
                }
            }
            return Ok(ProblemArg::Random(spec));
        }
        if let Some(rest) = text.strip_prefix("nullsym:") {
            let mut parts = rest.split(',');
            let order: usize = parts
                .next()
                .ok_or_else(|| anyhow!("missing order"))?
                .parse()?;
            let mut nullity = 1;
            for part in parts {
                if let Some(v) = part.strip_prefix("nullity=") {
                    nullity = v.parse()?;
                } else {
                    bail!("unknown nullsym option '{part}'");
                }
            }
            return Ok(ProblemArg::Nullsym { order, nullity });
        }
        bail!("unknown problem '{text}' (expected ep3, random:.., or nullsym:..)")
    }
}

fn parse_dims(text: &str) -> Result<(usize, usize)> {
    let (m, n) = text
        .split_once('x')
        .ok_or_else(|| anyhow!("dimensions must look like <rows>x<cols>, got '{text}'"))?;
    Ok((m.parse()?, n.parse()?))
}

/// How the projected problem is solved; `Switching` selects the
/// plain-then-stabilized controller rather than a fixed subsolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Fixed(SubsolveKind),
    Switching,
}

/// One `--solver` entry: `<method>[:<subsolve>]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub name: String,
    pub method: SolverMethod,
    pub strategy: Strategy,
}

impl SolverSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let (method_str, subsolve_str) = match text.split_once(':') {
            Some((m, s)) => (m, Some(s)),
            None => (text, None),
        };
        let method = match method_str {
            "ab-gmres" => SolverMethod::AbGmres,
            "ba-gmres" => SolverMethod::BaGmres,
            "rr-ab-gmres" => SolverMethod::RrAbGmres,
            "gmres" => SolverMethod::Gmres,
            "lsqr" => SolverMethod::Lsqr,
            "lsmr" => SolverMethod::Lsmr,
            other => bail!("unknown solver '{other}'"),
        };
        let strategy = match subsolve_str {
            None => Strategy::Fixed(SubsolveKind::Plain),
            Some("plain") => Strategy::Fixed(SubsolveKind::Plain),
            Some("stabilized") => Strategy::Fixed(SubsolveKind::Stabilized),
            Some("tsvd") => Strategy::Fixed(SubsolveKind::Tsvd),
            Some("tikhonov-normal") => Strategy::Fixed(SubsolveKind::TikhonovNormal),
            Some("tikhonov-augmented") => Strategy::Fixed(SubsolveKind::TikhonovAugmented),
            Some("switching") => Strategy::Switching,
            Some(other) => bail!("unknown subsolve '{other}'"),
        };
        if matches!(method, SolverMethod::Lsqr | SolverMethod::Lsmr) && subsolve_str.is_some() {
            bail!("{method_str} does not take a subsolve");
        }
        if strategy == Strategy::Switching && method != SolverMethod::AbGmres {
            bail!("switching is only defined for ab-gmres");
        }
        Ok(SolverSpec {
            name: text.to_string(),
            method,
            strategy,
        })
    }

    /// File-system friendly form of the solver name.
    pub fn slug(&self) -> String {
        self.name.replace(':', "-")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ep3() {
        assert_eq!(ProblemArg::parse("ep3").unwrap(), ProblemArg::Ep3);
    }

    #[test]
    fn parses_random_with_options() {
        let arg = ProblemArg::parse("random:40x60,density=0.2,rankdef=6,consistent").unwrap();
        match arg {
            ProblemArg::Random(spec) => {
                assert_eq!((spec.nrows, spec.ncols), (40, 60));
                assert_eq!(spec.density, 0.2);
                assert_eq!(spec.rank_deficiency, 6);
                assert!(spec.consistent);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_nullsym() {
        assert_eq!(
            ProblemArg::parse("nullsym:12,nullity=3").unwrap(),
            ProblemArg::Nullsym {
                order: 12,
                nullity: 3
            }
        );
    }

    #[test]
    fn rejects_bad_problem() {
        assert!(ProblemArg::parse("banana").is_err());
        assert!(ProblemArg::parse("random:40").is_err());
        assert!(ProblemArg::parse("random:40x60,conditioned").is_err());
    }

    #[test]
    fn parses_solver_specs() {
        let s = SolverSpec::parse("ab-gmres:switching").unwrap();
        assert_eq!(s.method, SolverMethod::AbGmres);
        assert_eq!(s.strategy, Strategy::Switching);
        assert_eq!(s.slug(), "ab-gmres-switching");

        let s = SolverSpec::parse("lsqr").unwrap();
        assert_eq!(s.method, SolverMethod::Lsqr);

        let s = SolverSpec::parse("gmres:tikhonov-augmented").unwrap();
        assert_eq!(
            s.strategy,
            Strategy::Fixed(SubsolveKind::TikhonovAugmented)
        );
    }

    #[test]
    fn rejects_bad_solver_specs() {
        assert!(SolverSpec::parse("lsqr:plain").is_err());
        assert!(SolverSpec::parse("ba-gmres:switching").is_err());
        assert!(SolverSpec::parse("cg").is_err());
        assert!(SolverSpec::parse("ab-gmres:banana").is_err());
    }
}

//! Generator specs such as `nilpotent:7:4:2` or `scalars:[0.5,0.3+0.1i]`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hypermodel::{
    gen, linalg::MatrixText, Complex, MultiWeightSpec, Operator, OperatorTuple, COMMUTATION_TOL,
};

use crate::config::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub enum TupleSpec {
    Nilpotent {
        seed: u64,
        dim: usize,
        n: usize,
    },
    Scalars(Vec<Complex<f64>>),
    Multishift(Vec<usize>),
    CompressedMultishift {
        seed: u64,
        degrees: Vec<usize>,
    },
    Explicit(Vec<PathBuf>),
    RandomContraction {
        seed: u64,
        dim: usize,
        n: usize,
        radius: f64,
    },
    Unitaries {
        seed: u64,
        dim: usize,
        n: usize,
    },
    Mixed {
        seed: u64,
        u_dim: usize,
        j_dim: usize,
    },
    FourBlock {
        seed: u64,
    },
    PolynomialPair {
        seed: u64,
        dim: usize,
        lo: f64,
        hi: f64,
    },
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T, ConfigError> {
    s.trim()
        .parse()
        .map_err(|_| ConfigError(format!("bad {what}: {s:?}")))
}

fn fields<'a>(body: &'a str, count: usize, kind: &str) -> Result<Vec<&'a str>, ConfigError> {
    let parts: Vec<&str> = body.split(':').collect();
    if parts.len() != count {
        return Err(ConfigError(format!(
            "{kind} takes {count} fields, got {}",
            parts.len()
        )));
    }
    Ok(parts)
}

/// `[a,b]` or `a,b`; brackets must balance.
fn list(body: &str) -> Result<&str, ConfigError> {
    let b = body.trim();
    match (b.strip_prefix('['), b.ends_with(']')) {
        (Some(inner), true) => Ok(&inner[..inner.len() - 1]),
        (None, false) => Ok(b),
        _ => Err(ConfigError(format!("unbalanced brackets in {body:?}"))),
    }
}

/// `0.5`, `-0.2i`, `0.3+0.1i`, `0.3-0.1i`.
pub fn parse_complex(s: &str) -> Result<Complex<f64>, ConfigError> {
    let s = s.trim();
    let bad = || ConfigError(format!("bad complex number: {s:?}"));
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex::new(num(s, "number")?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let cut = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match cut {
        Some(k) => {
            let re: f64 = body[..k].parse().map_err(|_| bad())?;
            let im_text = &body[k..];
            let im: f64 = if im_text == "+" || im_text == "-" {
                format!("{im_text}1").parse().map_err(|_| bad())?
            } else {
                im_text.parse().map_err(|_| bad())?
            };
            Ok(Complex::new(re, im))
        }
        None => {
            let im: f64 = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                b => b.parse().map_err(|_| bad())?,
            };
            Ok(Complex::new(0.0, im))
        }
    }
}

impl TupleSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let (kind, body) = text
            .split_once(':')
            .ok_or_else(|| ConfigError(format!("tuple spec needs a kind: {text:?}")))?;
        let spec = match kind.trim() {
            "nilpotent" => {
                let f = fields(body, 3, kind)?;
                TupleSpec::Nilpotent {
                    seed: num(f[0], "seed")?,
                    dim: num(f[1], "dim")?,
                    n: num(f[2], "n")?,
                }
            }
            "scalars" => TupleSpec::Scalars(
                list(body)?
                    .split(',')
                    .map(parse_complex)
                    .collect::<Result<_, _>>()?,
            ),
            "multishift" => TupleSpec::Multishift(
                list(body)?
                    .split(',')
                    .map(|d| num(d, "degree"))
                    .collect::<Result<_, _>>()?,
            ),
            "compressed-multishift" => {
                let (seed, degrees) = body
                    .split_once(':')
                    .ok_or_else(|| ConfigError("compressed-multishift:<seed>:<degrees>".into()))?;
                TupleSpec::CompressedMultishift {
                    seed: num(seed, "seed")?,
                    degrees: list(degrees)?
                        .split(',')
                        .map(|d| num(d, "degree"))
                        .collect::<Result<_, _>>()?,
                }
            }
            "explicit" => TupleSpec::Explicit(
                list(body)?
                    .split(',')
                    .map(|p| base_dir.join(p.trim()))
                    .collect(),
            ),
            "random-contraction" => {
                let f = fields(body, 4, kind)?;
                TupleSpec::RandomContraction {
                    seed: num(f[0], "seed")?,
                    dim: num(f[1], "dim")?,
                    n: num(f[2], "n")?,
                    radius: num(f[3], "radius")?,
                }
            }
            "unitaries" => {
                let f = fields(body, 3, kind)?;
                TupleSpec::Unitaries {
                    seed: num(f[0], "seed")?,
                    dim: num(f[1], "dim")?,
                    n: num(f[2], "n")?,
                }
            }
            "mixed" => {
                let f = fields(body, 3, kind)?;
                TupleSpec::Mixed {
                    seed: num(f[0], "seed")?,
                    u_dim: num(f[1], "dim")?,
                    j_dim: num(f[2], "dim")?,
                }
            }
            "four-block" => TupleSpec::FourBlock {
                seed: num(body, "seed")?,
            },
            "polynomial-pair" => {
                let f = fields(body, 4, kind)?;
                TupleSpec::PolynomialPair {
                    seed: num(f[0], "seed")?,
                    dim: num(f[1], "dim")?,
                    lo: num(f[2], "norm")?,
                    hi: num(f[3], "norm")?,
                }
            }
            other => return Err(ConfigError(format!("unknown tuple kind {other:?}"))),
        };
        Ok(spec)
    }

    /// Replaces the seed of seeded generators.
    pub fn reseed(&mut self, new: u64) {
        match self {
            TupleSpec::Nilpotent { seed, .. }
            | TupleSpec::CompressedMultishift { seed, .. }
            | TupleSpec::RandomContraction { seed, .. }
            | TupleSpec::Unitaries { seed, .. }
            | TupleSpec::Mixed { seed, .. }
            | TupleSpec::FourBlock { seed }
            | TupleSpec::PolynomialPair { seed, .. } => *seed = new,
            TupleSpec::Scalars(_) | TupleSpec::Multishift(_) | TupleSpec::Explicit(_) => {}
        }
    }

    pub fn build(&self, w: &MultiWeightSpec) -> Result<OperatorTuple, BuildError> {
        let t = match self {
            TupleSpec::Nilpotent { seed, dim, n } => gen::nilpotent_tuple(*seed, *dim, *n),
            TupleSpec::Scalars(ts) => gen::scalars(ts)?,
            TupleSpec::Multishift(d) => gen::multishift(w, d)?,
            TupleSpec::CompressedMultishift { seed, degrees } => {
                gen::compressed_multishift(*seed, w, degrees)?
            }
            TupleSpec::Explicit(paths) => {
                let mut ops = Vec::with_capacity(paths.len());
                for p in paths {
                    let text = crate::config::read_data(p)?;
                    let m: MatrixText = serde_json::from_str(&text)
                        .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                    ops.push(Operator::try_from(&m)?);
                }
                OperatorTuple::new(ops, COMMUTATION_TOL)?
            }
            TupleSpec::RandomContraction {
                seed,
                dim,
                n,
                radius,
            } => gen::random_contraction(*seed, *dim, *n, *radius)?,
            TupleSpec::Unitaries { seed, dim, n } => gen::commuting_unitaries(*seed, *dim, *n),
            TupleSpec::Mixed { seed, u_dim, j_dim } => gen::mixed_pair(*seed, *u_dim, *j_dim),
            TupleSpec::FourBlock { seed } => gen::four_block_pair(*seed),
            TupleSpec::PolynomialPair { seed, dim, lo, hi } => {
                gen::polynomial_pair(*seed, *dim, *lo, *hi)
            }
        };
        if t.n() != w.n() {
            return Err(BuildError::Config(ConfigError(format!(
                "tuple has {} operators, weights have {}",
                t.n(),
                w.n()
            ))));
        }
        Ok(t)
    }
}

#[derive(Debug)]
pub enum BuildError {
    Config(ConfigError),
    Math(hypermodel::Error),
}

impl From<ConfigError> for BuildError {
    fn from(e: ConfigError) -> Self {
        BuildError::Config(e)
    }
}

impl From<hypermodel::Error> for BuildError {
    fn from(e: hypermodel::Error) -> Self {
        BuildError::Math(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), Complex::new(0.5, 0.0));
        assert_eq!(parse_complex("0.3+0.1i").unwrap(), Complex::new(0.3, 0.1));
        assert_eq!(parse_complex("0.3-0.1i").unwrap(), Complex::new(0.3, -0.1));
        assert_eq!(parse_complex("-0.2i").unwrap(), Complex::new(0.0, -0.2));
        assert_eq!(
            parse_complex("1e-3+2e-2i").unwrap(),
            Complex::new(1e-3, 2e-2)
        );
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn specs_parse_and_reseed() {
        let d = Path::new(".");
        let mut s = TupleSpec::parse("nilpotent:7:4:2", d).unwrap();
        assert_eq!(
            s,
            TupleSpec::Nilpotent {
                seed: 7,
                dim: 4,
                n: 2
            }
        );
        s.reseed(9);
        assert_eq!(
            s,
            TupleSpec::Nilpotent {
                seed: 9,
                dim: 4,
                n: 2
            }
        );
        assert_eq!(
            TupleSpec::parse("multishift:4,4", d).unwrap(),
            TupleSpec::Multishift(vec![4, 4])
        );
        assert!(TupleSpec::parse("nilpotent:7:4", d).is_err());
        assert!(TupleSpec::parse("wat:1", d).is_err());
        assert!(TupleSpec::parse("scalars:[0.5", d).is_err());
    }

    #[test]
    fn radius_above_one_is_a_precondition_failure() {
        let w: MultiWeightSpec = "hardy,hardy".parse().unwrap();
        let s = TupleSpec::parse("random-contraction:3:4:2:1.2", Path::new(".")).unwrap();
        assert!(matches!(
            s.build(&w),
            Err(BuildError::Math(hypermodel::Error::NotContraction { .. }))
        ));
    }
}

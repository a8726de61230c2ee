use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anisoeig::radial::RadialWeight;
use anisoeig::{NormSpec, ScalarField};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Shooting solve on a Wulff shape
    SolveRadial,
    /// Field solve on a grid domain
    SolveDomain,
    /// Convex symmetrization of a field
    Symmetrize,
    /// Full comparison against the matched Wulff shape
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Euclidean,
    Ellipse,
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Disk,
    Square,
    Rectangle,
    Wulff,
    Annulus,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Constant,
    Radial,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "anisoeig",
    version,
    about = "Anisotropic (p,q)-Laplacian eigenvalues and symmetrization checks"
)]
pub struct Cli {
    /// What to run; may also be set as `command` in the config file
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// Flat TOML config; flags override its entries
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub options: Options,
}

/// Every tunable, shared by the flags and the config file.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,

    /// Gradient exponent (default 2)
    #[arg(long)]
    pub p: Option<f64>,
    /// Normalization exponent, 1 < q <= p (default 2)
    #[arg(long)]
    pub q: Option<f64>,

    #[arg(long, value_enum)]
    pub norm: Option<NormKind>,
    /// Ellipse matrix, row-major
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub matrix: Option<Vec<f64>>,
    /// Power-norm exponent
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Dimension (radial solves only; grids are planar)
    #[arg(long = "n")]
    #[serde(rename = "n")]
    pub dim: Option<usize>,

    #[arg(long, value_enum)]
    pub shape: Option<Shape>,
    /// Wulff radius (solve-radial, disk, wulff)
    #[arg(long = "R", alias = "radius")]
    #[serde(rename = "R", alias = "radius")]
    pub radius: Option<f64>,
    /// Square side
    #[arg(long)]
    pub side: Option<f64>,
    /// Rectangle width
    #[arg(long)]
    pub a: Option<f64>,
    /// Rectangle height
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub r_in: Option<f64>,
    #[arg(long)]
    pub r_out: Option<f64>,
    /// Grid field CSV (shape = csv)
    #[arg(long, value_name = "FILE")]
    pub domain: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub weight: Option<WeightKind>,
    #[arg(long)]
    pub weight_value: Option<f64>,
    /// Radial table `r,m` or grid field CSV
    #[arg(long, value_name = "FILE")]
    pub weight_file: Option<PathBuf>,

    #[arg(long)]
    pub h: Option<f64>,
    /// Exponents for the domination check and reverse Hölder constants
    #[arg(long, value_delimiter = ',')]
    pub r_list: Option<Vec<f64>>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Level sets sampled for isoperimetric deficits
    #[arg(long)]
    pub levels: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Options { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl Options {
    /// Fields of `self` win over `lower`.
    pub fn over(self, lower: Options) -> Options {
        overlay!(
            self,
            lower,
            command,
            p,
            q,
            norm,
            matrix,
            exponent,
            dim,
            shape,
            radius,
            side,
            a,
            b,
            r_in,
            r_out,
            domain,
            weight,
            weight_value,
            weight_file,
            h,
            r_list,
            out,
            seed,
            restarts,
            max_iters,
            nodes,
            levels,
            workers
        )
    }

    pub fn from_file(path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Validated settings with defaults filled in.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub command: Command,
    pub p: f64,
    pub q: f64,
    pub norm: NormSpec,
    pub shape: Shape,
    #[serde(rename = "R")]
    pub radius: f64,
    pub side: f64,
    pub a: f64,
    pub b: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub domain: Option<PathBuf>,
    pub weight: WeightKind,
    pub weight_value: f64,
    pub weight_file: Option<PathBuf>,
    pub h: f64,
    pub r_list: Vec<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub nodes: usize,
    pub levels: usize,
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{name} must be positive, got {v}");
    }
    Ok(v)
}

impl RunConfig {
    pub fn resolve(command: Option<Command>, opts: Options) -> Result<RunConfig> {
        let command = command
            .or(opts.command)
            .context("no command given (solve-radial, solve-domain, symmetrize or verify)")?;
        let p = opts.p.unwrap_or(2.0);
        let q = opts.q.unwrap_or(2.0);
        if !(p.is_finite() && p > 1.0 && q.is_finite() && q > 1.0) {
            bail!("exponents must satisfy p > 1 and q > 1, got p = {p}, q = {q}");
        }
        if q > p {
            bail!("q = {q} exceeds p = {p}: the first eigenvalue is only known to be simple for 1 < q <= p");
        }
        let planar = command != Command::SolveRadial;
        let dim = opts.dim.unwrap_or(2);
        if planar && dim != 2 {
            bail!("grid commands are planar; --n must be 2, got {dim}");
        }
        let norm = match opts.norm.unwrap_or(NormKind::Euclidean) {
            NormKind::Euclidean => NormSpec::euclidean(dim)?,
            NormKind::Ellipse => {
                let m = opts.matrix.clone().context("ellipse norm needs --matrix")?;
                NormSpec::ellipse(dim, &m)?
            }
            NormKind::Power => NormSpec::power(dim, opts.exponent.context("power norm needs --exponent")?)?,
        };
        let shape = opts.shape.unwrap_or(if opts.domain.is_some() { Shape::Csv } else { Shape::Disk });
        let r_list = opts.r_list.clone().unwrap_or_default();
        if let Some(r) = r_list.iter().find(|r| !(r.is_finite() && **r >= 1.0)) {
            bail!("r-list entries must be >= 1, got {r}");
        }
        let (r_in, r_out) = (opts.r_in.unwrap_or(0.5), opts.r_out.unwrap_or(1.0));
        if shape == Shape::Annulus && r_in.partial_cmp(&r_out) != Some(std::cmp::Ordering::Less) {
            bail!("annulus needs r-in < r-out, got {r_in} and {r_out}");
        }
        let weight = opts.weight.unwrap_or(if opts.weight_file.is_some() {
            WeightKind::Radial
        } else {
            WeightKind::Constant
        });
        if weight != WeightKind::Constant && opts.weight_file.is_none() {
            bail!("weight source {weight:?} needs --weight-file");
        }
        if shape == Shape::Csv && opts.domain.is_none() {
            bail!("shape csv needs --domain");
        }
        let restarts = opts.restarts.unwrap_or(1);
        if restarts == 0 {
            bail!("restarts must be at least 1");
        }
        if opts.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        Ok(RunConfig {
            command,
            p,
            q,
            norm,
            shape,
            radius: positive("R", opts.radius.unwrap_or(1.0))?,
            side: positive("side", opts.side.unwrap_or(1.0))?,
            a: positive("a", opts.a.unwrap_or(1.0))?,
            b: positive("b", opts.b.unwrap_or(0.5))?,
            r_in: positive("r-in", r_in)?,
            r_out: positive("r-out", r_out)?,
            domain: opts.domain,
            weight,
            weight_value: positive("weight-value", opts.weight_value.unwrap_or(1.0))?,
            weight_file: opts.weight_file,
            h: positive("h", opts.h.unwrap_or(1.0 / 64.0))?,
            r_list,
            out: opts.out.unwrap_or_else(|| PathBuf::from("anisoeig-out")),
            seed: opts.seed.unwrap_or(0),
            restarts,
            max_iters: opts.max_iters.unwrap_or(20_000),
            nodes: opts.nodes.unwrap_or(anisoeig::radial::DEFAULT_NODES),
            levels: opts.levels.unwrap_or(8),
            workers: opts.workers,
        })
    }

    /// The grid domain with its weight attached.
    pub fn domain_field(&self) -> Result<ScalarField> {
        let h = self.h;
        let dom = match self.shape {
            Shape::Disk => ScalarField::disk(self.radius, h)?,
            Shape::Square => ScalarField::square(self.side, h)?,
            Shape::Rectangle => ScalarField::rectangle(self.a, self.b, h)?,
            Shape::Wulff => ScalarField::wulff(&self.norm, self.radius, h)?,
            Shape::Annulus => ScalarField::annulus(self.r_in, self.r_out, h)?,
            Shape::Csv => {
                let path = self.domain.as_ref().expect("checked in resolve");
                return self.attach_weight(read_field(path)?, true);
            }
        };
        self.attach_weight(dom, false)
    }

    fn attach_weight(&self, dom: ScalarField, from_file: bool) -> Result<ScalarField> {
        match self.weight {
            // a CSV domain keeps its own weight column unless told otherwise
            WeightKind::Constant if from_file && self.weight_value == 1.0 => Ok(dom),
            WeightKind::Constant => {
                let c = self.weight_value;
                Ok(dom.map_weight(|_, _| c)?)
            }
            WeightKind::Radial => {
                let table = self.radial_weight()?;
                let spec = &self.norm;
                Ok(dom.map_weight(|x, y| table.eval(spec.polar_unchecked(&[x, y])))?)
            }
            WeightKind::Csv => {
                let path = self.weight_file.as_ref().expect("checked in resolve");
                let w = read_field(path)?;
                if (w.nx(), w.ny()) != (dom.nx(), dom.ny()) || w.h() != dom.h() {
                    bail!(
                        "weight grid in {} ({}x{}, h = {}) does not match the domain grid ({}x{}, h = {})",
                        path.display(),
                        w.nx(),
                        w.ny(),
                        w.h(),
                        dom.nx(),
                        dom.ny(),
                        dom.h()
                    );
                }
                Ok(dom.with_weight(w.weight().to_vec())?)
            }
        }
    }

    /// Weight for radial solves.
    pub fn radial_weight(&self) -> Result<RadialWeight> {
        match self.weight {
            WeightKind::Constant => Ok(RadialWeight::constant(self.weight_value)?),
            WeightKind::Radial => {
                let path = self.weight_file.as_ref().expect("checked in resolve");
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read weight table {}", path.display()))?;
                let (mut r, mut m) = (Vec::new(), Vec::new());
                for (n, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                        continue;
                    }
                    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                    let parse = |s: &str| -> Result<f64> {
                        s.parse()
                            .with_context(|| format!("{} line {}: bad number `{s}`", path.display(), n + 1))
                    };
                    if cols.len() != 2 {
                        bail!("{} line {}: expected `r,m`", path.display(), n + 1);
                    }
                    r.push(parse(cols[0])?);
                    m.push(parse(cols[1])?);
                }
                RadialWeight::table(r, m).with_context(|| format!("bad weight table {}", path.display()))
            }
            WeightKind::Csv => bail!("a grid weight field cannot drive a radial solve"),
        }
    }
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    ScalarField::read_csv(BufReader::new(file)).with_context(|| format!("bad field file {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(args: &[&str]) -> (Option<Command>, Options) {
        let cli = Cli::try_parse_from(std::iter::once("anisoeig").chain(args.iter().copied())).unwrap();
        (cli.command, cli.options)
    }

    #[test]
    fn flags_win_over_file() {
        let file: Options =
            toml::from_str("command = \"verify\"\np = 3.0\nq = 2.0\nh = 0.05\nr-list = [2.0, 4.0]").unwrap();
        let (cmd, flags) = opts(&["--p", "2.5"]);
        let cfg = RunConfig::resolve(cmd, flags.over(file)).unwrap();
        assert_eq!(cfg.command, Command::Verify);
        assert_eq!((cfg.p, cfg.q, cfg.h), (2.5, 2.0, 0.05));
        assert_eq!(cfg.r_list, vec![2.0, 4.0]);
    }

    #[test]
    fn q_above_p_cites_simplicity() {
        let (cmd, o) = opts(&["solve-domain", "--p", "2", "--q", "3"]);
        let err = RunConfig::resolve(cmd, o).unwrap_err().to_string();
        assert!(err.contains("simple"), "{err}");
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<Options>("pp = 2.0").is_err());
    }

    #[test]
    fn ellipse_needs_matrix() {
        let (cmd, o) = opts(&["verify", "--norm", "ellipse"]);
        assert!(RunConfig::resolve(cmd, o).is_err());
        let (cmd, o) =
            opts(&["verify", "--norm", "ellipse", "--matrix", "4,0,0,1", "--shape", "wulff", "--R", "0.5"]);
        let cfg = RunConfig::resolve(cmd, o).unwrap();
        assert_eq!(cfg.norm.variant_name(), "ellipse");
        assert_eq!(cfg.shape, Shape::Wulff);
    }

    #[test]
    fn missing_command_is_an_error() {
        let (cmd, o) = opts(&["--p", "2"]);
        assert!(RunConfig::resolve(cmd, o).is_err());
    }

    #[test]
    fn radial_accepts_three_dimensions_grid_does_not() {
        let (cmd, o) = opts(&["solve-radial", "--n", "3"]);
        assert!(RunConfig::resolve(cmd, o).is_ok());
        let (cmd, o) = opts(&["solve-domain", "--n", "3"]);
        assert!(RunConfig::resolve(cmd, o).is_err());
    }
}

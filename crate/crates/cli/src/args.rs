use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ni_core::ni::SweepConfig;
use ni_core::numerics::Tolerances;
use ni_core::stability::{MarginPart, StabilityConfig, MARGINAL_BAND};

#[derive(Debug, Parser)]
#[command(name = "nitool", version, about = "Negative-imaginary classification and DC-loop-gain stability analysis")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Equality / residual tolerance.
    #[arg(long, global = true, default_value_t = Tolerances::default().eq_tol)]
    pub tol_eq: f64,
    /// Eigenvalue sign tolerance.
    #[arg(long, global = true, default_value_t = Tolerances::default().psd_tol)]
    pub tol_psd: f64,
    /// Largest real part an eigenvalue may have and still count as stable.
    #[arg(long, global = true, allow_hyphen_values = true, default_value_t = Tolerances::default().hurwitz_margin)]
    pub hurwitz_margin: f64,
    /// Frequency grid as `wmin:wmax:points` (logarithmic).
    #[arg(long, global = true, value_parser = parse_sweep)]
    pub sweep: Option<SweepConfig>,
    /// Also sweep `|det(R − R*)|` when deciding strictness.
    #[arg(long, global = true)]
    pub strict_grid: bool,
    /// Half-width of the band around 1 reported as marginal.
    #[arg(long, global = true, default_value_t = MARGINAL_BAND)]
    pub marginal_band: f64,
}

impl Default for Options {
    fn default() -> Self {
        let tol = Tolerances::default();
        Self {
            json: false,
            tol_eq: tol.eq_tol,
            tol_psd: tol.psd_tol,
            hurwitz_margin: tol.hurwitz_margin,
            sweep: None,
            strict_grid: false,
            marginal_band: MARGINAL_BAND,
        }
    }
}

impl Options {
    pub fn config(&self) -> StabilityConfig {
        let mut sweep = self.sweep.unwrap_or_default();
        sweep.determinant_sweep = self.strict_grid;
        StabilityConfig {
            tol: Tolerances { eq_tol: self.tol_eq, psd_tol: self.tol_psd, hurwitz_margin: self.hurwitz_margin },
            sweep,
            marginal_band: self.marginal_band,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a system as Ni, StrictNi, NotNi or Inconclusive.
    Classify { file: PathBuf },
    /// DC-loop-gain stability test of a positive-feedback pair.
    Stability {
        /// System in the non-strict role.
        #[arg(long = "c-role")]
        c_role: PathBuf,
        /// System in the strict role.
        #[arg(long = "cs-role")]
        cs_role: PathBuf,
    },
    /// Largest admissible uncertainty DC gain.
    Margin {
        file: PathBuf,
        #[arg(long, value_enum)]
        part: Part,
    },
    /// Frequency response and imaginary-part spectrum as CSV.
    Sweep {
        file: PathBuf,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in worked examples.
    #[command(subcommand)]
    Example(Example),
}

#[derive(Debug, Subcommand)]
pub enum Example {
    /// Two masses with an uncertain spring and damper.
    TwoMass {
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

impl From<Part> for MarginPart {
    fn from(p: Part) -> Self {
        match p {
            Part::I => MarginPart::I,
            Part::II => MarginPart::II,
        }
    }
}

pub fn parse_sweep(s: &str) -> Result<SweepConfig, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected wmin:wmax:points, got `{s}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|e| format!("wmin `{lo}`: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("wmax `{hi}`: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("points `{n}`: {e}"))?;
    SweepConfig::new(lo, hi, n).map_err(|e| e.to_string())
}

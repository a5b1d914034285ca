use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use trade_topology::{CountryCode, Symmetrization, UpdateRule};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "trade-topology",
    version,
    about = "Hierarchy and shock response of trade networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Yearly cophenetic correlation, plus total trade and trade/GDP when GDP is given.
    CccSeries,
    /// Newick tree and flat cluster assignment for one year.
    Dendrogram,
    /// Trade share matrix for one year, ordered by the dendrogram.
    ShareMatrix,
    /// Propagate a GDP shock from the epicenter to steady state.
    Shock,
    /// Shock, then restore the epicenter and fit the recovery rate.
    Recover,
    /// KS test of CCC before versus after recession windows.
    RecessionsTest,
    /// Run every analysis over a year range.
    Pipeline,
}

/// Inclusive year range written `A:B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected A:B, got {s:?}"))?;
        let first = a
            .trim()
            .parse()
            .map_err(|_| format!("bad start year {a:?}"))?;
        let last = b
            .trim()
            .parse()
            .map_err(|_| format!("bad end year {b:?}"))?;
        if first > last {
            return Err(format!("empty year range {s}"));
        }
        Ok(YearRange { first, last })
    }
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Trade CSV: year,reporter,partner,value_usd
    #[arg(long, global = true, value_name = "PATH")]
    pub trade: Option<PathBuf>,
    /// GDP CSV: year,country,gdp_usd
    #[arg(long, global = true, value_name = "PATH")]
    pub gdp: Option<PathBuf>,
    /// Recession windows CSV: label,start,end (YYYY-MM)
    #[arg(long, global = true, value_name = "PATH")]
    pub recessions: Option<PathBuf>,
    /// Single year to analyse
    #[arg(long, global = true, value_name = "N")]
    pub year: Option<i32>,
    /// Inclusive year range A:B
    #[arg(long, global = true, value_name = "A:B")]
    pub years: Option<YearRange>,
    /// How directed flows combine into bilateral trade
    #[arg(
        long,
        global = true,
        default_value = "sum",
        value_name = "sum|max|mean"
    )]
    pub mode: Symmetrization,
    /// Country receiving the initial shock
    #[arg(long, global = true, default_value = "USA", value_name = "CODE")]
    pub epicenter: CountryCode,
    /// Fractional GDP loss imposed on the epicenter
    #[arg(long, global = true, default_value_t = 0.054, value_name = "F")]
    pub shock: f64,
    /// Steady-state threshold on the largest relative GDP change per step
    #[arg(long, global = true, default_value_t = 1e-10, value_name = "T")]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 100_000, value_name = "N")]
    pub max_steps: usize,
    /// GDP update rule
    #[arg(
        long,
        global = true,
        default_value = "multiplicative",
        value_name = "multiplicative|literal"
    )]
    pub update: UpdateRule,
    /// Number of flat clusters cut from the dendrogram [default: 6]
    #[arg(long, global = true, value_name = "K")]
    pub cut: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    /// Format of tabular outputs
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "trade-topology",
            "shock",
            "--trade",
            "t.csv",
            "--year",
            "2007",
            "--shock",
            "0.1",
            "--mode",
            "max",
            "--update",
            "literal",
            "--format",
            "json",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Shock);
        assert_eq!(cli.opts.year, Some(2007));
        assert_eq!(cli.opts.shock, 0.1);
        assert_eq!(cli.opts.mode, Symmetrization::Max);
        assert_eq!(cli.opts.update, UpdateRule::LiteralAdditive);
        assert_eq!(cli.opts.format, Format::Json);
        assert_eq!(cli.opts.epicenter.as_str(), "USA");
    }

    #[test]
    fn year_ranges() {
        assert_eq!(
            "1969:2007".parse::<YearRange>().unwrap(),
            YearRange {
                first: 1969,
                last: 2007
            }
        );
        assert!("2007:1969".parse::<YearRange>().is_err());
        assert!("2007".parse::<YearRange>().is_err());
        assert!(Cli::try_parse_from(["trade-topology", "pipeline", "--years", "x:1"]).is_err());
        assert!(Cli::try_parse_from(["trade-topology", "pipeline", "--mode", "median"]).is_err());
        assert!(Cli::try_parse_from(["trade-topology", "pipeline", "--epicenter", "US"]).is_err());
    }
}

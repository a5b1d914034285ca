use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use trade_topology::hclust;
use trade_topology::ingest::{self, build_network};
use trade_topology::metrics;
use trade_topology::shockprop::{self, fit_recovery, init_state, run_recovery, run_to_steady};
use trade_topology::stats;
use trade_topology::{
    CccPoint, GdpTable, IngestError, RecessionWindow, RecoveryFit, ShockConfig, ShockError,
    SimulationTrace, StatsError, TradeNetwork, TradeTable,
};

use crate::args::{Command, Options};
use crate::output::{fmt_float, json_float, json_opt, render_json, Cell, OutDir, Table};
use crate::Failure;

/// Cluster count used when `--cut` is not given.
pub const DEFAULT_CUT: usize = 6;

pub fn dispatch(command: Command, opts: &Options) -> Result<(), Failure> {
    match command {
        Command::CccSeries => cmd_ccc_series(opts),
        Command::Dendrogram => cmd_dendrogram(opts),
        Command::ShareMatrix => cmd_share_matrix(opts),
        Command::Shock => cmd_shock(opts),
        Command::Recover => cmd_recover(opts),
        Command::RecessionsTest => cmd_recessions_test(opts),
        Command::Pipeline => cmd_pipeline(opts),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))
}

fn parse_failure(path: &Path, e: IngestError) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn load_trade(opts: &Options) -> Result<TradeTable, Failure> {
    let path = opts
        .trade
        .as_deref()
        .ok_or_else(|| Failure::input("--trade is required"))?;
    ingest::parse_trade_csv(open(path)?).map_err(|e| parse_failure(path, e))
}

fn load_gdp(opts: &Options) -> Result<Option<GdpTable>, Failure> {
    opts.gdp
        .as_deref()
        .map(|path| ingest::parse_gdp_csv(open(path)?).map_err(|e| parse_failure(path, e)))
        .transpose()
}

fn require_gdp(opts: &Options) -> Result<GdpTable, Failure> {
    load_gdp(opts)?.ok_or_else(|| Failure::input("--gdp is required"))
}

fn load_recessions(opts: &Options) -> Result<Option<Vec<RecessionWindow>>, Failure> {
    opts.recessions
        .as_deref()
        .map(|path| ingest::parse_recessions(open(path)?).map_err(|e| parse_failure(path, e)))
        .transpose()
}

fn single_year(opts: &Options) -> Result<i32, Failure> {
    opts.year
        .ok_or_else(|| Failure::input("--year is required for this command"))
}

/// Years selected by `--year`/`--years`, restricted to years present in the data.
fn selected_years(opts: &Options, trade: &TradeTable) -> Result<Vec<i32>, Failure> {
    if opts.year.is_some() && opts.years.is_some() {
        return Err(Failure::input("--year and --years are mutually exclusive"));
    }
    let present = trade.years();
    Ok(match (opts.year, opts.years) {
        (Some(y), _) => present.into_iter().filter(|p| *p == y).collect(),
        (None, Some(range)) => present.into_iter().filter(|p| range.contains(*p)).collect(),
        (None, None) => present,
    })
}

fn networks(opts: &Options, trade: &TradeTable) -> Result<Vec<TradeNetwork>, Failure> {
    selected_years(opts, trade)?
        .into_iter()
        .map(|year| {
            build_network(&trade.records, year, opts.mode)
                .map_err(|e| Failure::empty(e.to_string()))
        })
        .collect()
}

fn network_for_year(
    opts: &Options,
    trade: &TradeTable,
    year: i32,
) -> Result<TradeNetwork, Failure> {
    build_network(&trade.records, year, opts.mode).map_err(|e| match e {
        IngestError::EmptyYear(_) => Failure::empty(e.to_string()),
        other => Failure::input(other.to_string()),
    })
}

fn shock_config(opts: &Options) -> Result<ShockConfig, Failure> {
    if !(opts.shock > 0.0 && opts.shock < 1.0) {
        return Err(Failure::input(format!(
            "--shock {} must lie in (0, 1)",
            opts.shock
        )));
    }
    if !(opts.tol >= 0.0) {
        return Err(Failure::input(format!(
            "--tol {} must be nonnegative",
            opts.tol
        )));
    }
    Ok(ShockConfig {
        epicenter: opts.epicenter.clone(),
        shock_fraction: opts.shock,
        tolerance: opts.tol,
        max_steps: opts.max_steps,
        update_rule: opts.update,
    })
}

fn ccc_table(series: &[CccPoint]) -> Table {
    let mut t = Table::new(["year", "ccc", "n_countries"]);
    for p in series {
        t.push(vec![p.year.into(), p.ccc.into(), p.n_countries.into()]);
    }
    t
}

/// Writes the CCC series and, with GDP, the trade volume tables. Returns the series.
fn write_ccc_outputs(
    opts: &Options,
    out: &OutDir,
    nets: &[TradeNetwork],
    gdp: Option<&GdpTable>,
) -> Result<Vec<CccPoint>, Failure> {
    let series = metrics::ccc_series(nets);
    if series.is_empty() {
        return Err(Failure::empty("no year yields a cophenetic correlation"));
    }
    out.write_table("ccc_series", &ccc_table(&series), opts.format)?;
    if let Some(gdp) = gdp {
        let mut ratio = Table::new(["year", "trade_gdp_ratio"]);
        let mut total = Table::new(["year", "total_trade_usd"]);
        for net in nets {
            total.push(vec![net.year().into(), metrics::total_trade(net).into()]);
            match metrics::trade_gdp_ratio(net, gdp) {
                Ok(r) => ratio.push(vec![net.year().into(), r.into()]),
                Err(e) => log::warn!("no trade/GDP ratio for {}: {e}", net.year()),
            }
        }
        out.write_table("trade_gdp_ratio", &ratio, opts.format)?;
        out.write_table("total_trade", &total, opts.format)?;
    }
    Ok(series)
}

pub fn cmd_ccc_series(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let gdp = load_gdp(opts)?;
    let nets = networks(opts, &trade)?;
    write_ccc_outputs(opts, &OutDir::new(&opts.out), &nets, gdp.as_ref())?;
    Ok(())
}

fn labels(net: &TradeNetwork) -> Vec<&str> {
    net.countries().iter().map(|c| c.as_str()).collect()
}

fn write_tree(out: &OutDir, net: &TradeNetwork) -> Result<hclust::Dendrogram, Failure> {
    let d = hclust::distances_from_network(net).map_err(|e| Failure::empty(e.to_string()))?;
    let dend = hclust::average_linkage(&d).map_err(|e| Failure::empty(e.to_string()))?;
    let newick = hclust::to_newick_with(&dend, &labels(net), fmt_float)
        .map_err(|e| Failure::input(e.to_string()))?;
    out.write(&format!("tree_{}.nwk", net.year()), &format!("{newick}\n"))?;
    Ok(dend)
}

pub fn cmd_dendrogram(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let year = single_year(opts)?;
    let net = network_for_year(opts, &trade, year)?;
    let out = OutDir::new(&opts.out);
    let k = match opts.cut {
        Some(k) if k == 0 || k > net.len().max(1) => {
            return Err(Failure::input(format!(
                "--cut {k} outside 1..={}",
                net.len()
            )));
        }
        Some(k) => k,
        None if net.len() < DEFAULT_CUT => {
            log::warn!(
                "only {} countries in {year}; cutting into {} clusters",
                net.len(),
                net.len()
            );
            net.len()
        }
        None => DEFAULT_CUT,
    };
    let dend = write_tree(&out, &net)?;
    let clusters = hclust::cut_at_count(&dend, k).map_err(|e| Failure::input(e.to_string()))?;
    let mut table = Table::new(["country", "cluster"]);
    for (country, cluster) in net.countries().iter().zip(clusters) {
        table.push(vec![country.as_str().into(), cluster.into()]);
    }
    out.write_table(&format!("clusters_{year}"), &table, opts.format)?;
    Ok(())
}

pub fn cmd_share_matrix(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let year = single_year(opts)?;
    let net = network_for_year(opts, &trade, year)?;
    let d = hclust::distances_from_network(&net).map_err(|e| Failure::empty(e.to_string()))?;
    let dend = hclust::average_linkage(&d).map_err(|e| Failure::empty(e.to_string()))?;
    let shares =
        metrics::ordered_share_matrix(&net, &dend).map_err(|e| Failure::empty(e.to_string()))?;
    let mut table =
        Table::new(std::iter::once("country").chain(shares.countries.iter().map(|c| c.as_str())));
    for (i, country) in shares.countries.iter().enumerate() {
        let mut row = vec![Cell::from(country.as_str())];
        row.extend(shares.row(i).iter().map(|v| Cell::from(*v)));
        table.push(row);
    }
    OutDir::new(&opts.out).write_table(&format!("share_matrix_{year}"), &table, opts.format)?;
    Ok(())
}

fn trace_table(trace: &SimulationTrace) -> Table {
    let mut t = Table::new(["step", "country", "gdp"]);
    for (step, gdp) in trace.steps.iter().enumerate() {
        for (country, y) in trace.countries.iter().zip(gdp) {
            t.push(vec![step.into(), country.as_str().into(), (*y).into()]);
        }
    }
    t
}

#[derive(Debug, Default)]
struct Summary {
    world_gdp_change: Option<f64>,
    impact_ratio: Option<f64>,
    fit: Option<RecoveryFit>,
    steps: usize,
    converged: bool,
}

impl Summary {
    fn of_shock(trace: &SimulationTrace, config: &ShockConfig) -> Self {
        let warn = |what: &str, e: ShockError| log::warn!("{what} unavailable: {e}");
        Summary {
            world_gdp_change: shockprop::world_gdp_change(trace)
                .map_err(|e| warn("world GDP change", e))
                .ok(),
            impact_ratio: shockprop::impact_ratio(trace, &config.epicenter)
                .map_err(|e| warn("impact ratio", e))
                .ok(),
            fit: None,
            steps: trace.iterations(),
            converged: trace.converged,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "world_gdp_change": json_opt(self.world_gdp_change),
            "impact_ratio": json_opt(self.impact_ratio),
            "lambda": json_opt(self.fit.map(|f| f.lambda)),
            "a": json_opt(self.fit.map(|f| f.a)),
            "y_inf": json_opt(self.fit.map(|f| f.y_inf)),
            "steps": self.steps,
            "converged": self.converged,
        })
    }
}

fn write_run(
    out: &OutDir,
    opts: &Options,
    stem: &str,
    year: i32,
    trace: &SimulationTrace,
    summary: &Summary,
) -> Result<(), Failure> {
    out.write_table(
        &format!("{stem}_trace_{year}"),
        &trace_table(trace),
        opts.format,
    )?;
    out.write(
        &format!("{stem}_summary_{year}.json"),
        &render_json(&summary.to_json()),
    )?;
    Ok(())
}

fn shock_failure(e: ShockError) -> Failure {
    match e {
        ShockError::MissingGdp { .. }
        | ShockError::UnknownEpicenter(_)
        | ShockError::InvalidConfig(_) => Failure::input(e.to_string()),
        ShockError::NoConvergence { .. } => Failure::convergence(e.to_string()),
        _ => Failure::empty(e.to_string()),
    }
}

/// Outcome of a shock run that reached the simulation stage.
enum ShockRun {
    Converged(SimulationTrace),
    Stalled(Box<SimulationTrace>, Failure),
}

fn shock_run(
    trade: &TradeTable,
    gdp: &GdpTable,
    year: i32,
    config: &ShockConfig,
) -> Result<(trade_topology::EconomyState, ShockRun), Failure> {
    let state = init_state(&trade.records, year, gdp).map_err(shock_failure)?;
    match run_to_steady(&state, config) {
        Ok(trace) => Ok((state, ShockRun::Converged(trace))),
        Err(ShockError::NoConvergence { steps, trace }) => {
            let msg = format!("shock for {year} did not converge in {steps} steps");
            Ok((state, ShockRun::Stalled(trace, Failure::convergence(msg))))
        }
        Err(e) => Err(shock_failure(e)),
    }
}

pub fn cmd_shock(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let gdp = require_gdp(opts)?;
    let year = single_year(opts)?;
    let config = shock_config(opts)?;
    let out = OutDir::new(&opts.out);
    match shock_run(&trade, &gdp, year, &config)?.1 {
        ShockRun::Converged(trace) => write_run(
            &out,
            opts,
            "shock",
            year,
            &trace,
            &Summary::of_shock(&trace, &config),
        ),
        ShockRun::Stalled(trace, failure) => {
            write_run(
                &out,
                opts,
                "shock",
                year,
                &trace,
                &Summary::of_shock(&trace, &config),
            )?;
            Err(failure)
        }
    }
}

fn epicenter_gdp(
    state: &trade_topology::EconomyState,
    config: &ShockConfig,
) -> Result<f64, Failure> {
    state
        .index_of(&config.epicenter)
        .map(|e| state.gdp()[e])
        .ok_or_else(|| Failure::input(format!("epicenter {} not in economy", config.epicenter)))
}

pub fn cmd_recover(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let gdp = require_gdp(opts)?;
    let year = single_year(opts)?;
    let config = shock_config(opts)?;
    let out = OutDir::new(&opts.out);
    let (initial, run) = shock_run(&trade, &gdp, year, &config)?;
    let shock = match run {
        ShockRun::Converged(trace) => trace,
        ShockRun::Stalled(trace, failure) => {
            write_run(
                &out,
                opts,
                "shock",
                year,
                &trace,
                &Summary::of_shock(&trace, &config),
            )?;
            return Err(failure);
        }
    };
    let mut summary = Summary::of_shock(&shock, &config);
    let restore_to = epicenter_gdp(&initial, &config)?;
    let (trace, failure) = match run_recovery(shock.final_state(), restore_to, &config) {
        Ok(trace) => (trace, None),
        Err(ShockError::NoConvergence { steps, trace }) => (
            *trace,
            Some(Failure::convergence(format!(
                "recovery for {year} did not converge in {steps} steps"
            ))),
        ),
        Err(e) => return Err(shock_failure(e)),
    };
    summary.fit = fit_recovery(&trace)
        .map_err(|e| log::warn!("no recovery fit for {year}: {e}"))
        .ok();
    summary.steps = trace.iterations();
    summary.converged = trace.converged;
    write_run(&out, opts, "recovery", year, &trace, &summary)?;
    failure.map_or(Ok(()), Err)
}

fn shift_json(shift: &stats::RecessionShift, windows: &[RecessionWindow]) -> Value {
    json!({
        "D": json_float(shift.two_sided.d_statistic),
        "p": json_float(shift.two_sided.p_value),
        "method": shift.two_sided.method.as_str(),
        "D_plus": json_float(shift.d_plus),
        "one_sided_p": json_float(shift.one_sided_p),
        "windows": windows.iter().map(|w| w.label.as_str()).collect::<Vec<_>>(),
        "before": shift.before.iter().map(|v| json_float(*v)).collect::<Vec<_>>(),
        "after": shift.after.iter().map(|v| json_float(*v)).collect::<Vec<_>>(),
    })
}

fn write_recession_test(
    out: &OutDir,
    series: &[CccPoint],
    windows: &[RecessionWindow],
) -> Result<(), Failure> {
    let shift = stats::recession_ccc_shift(series, windows).map_err(|e| match e {
        StatsError::MissingYear(_) | StatsError::EmptySample => Failure::empty(e.to_string()),
        other => Failure::input(other.to_string()),
    })?;
    out.write(
        "recessions_test.json",
        &render_json(&shift_json(&shift, windows)),
    )?;
    Ok(())
}

pub fn cmd_recessions_test(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let windows =
        load_recessions(opts)?.ok_or_else(|| Failure::input("--recessions is required"))?;
    let series = metrics::ccc_series(&networks(opts, &trade)?);
    write_recession_test(&OutDir::new(&opts.out), &series, &windows)
}

/// Structure and response of one year, as written to `fig4a`/`fig4b`.
struct YearResponse {
    year: i32,
    ccc: f64,
    impact_ratio: Option<f64>,
    world_gdp_change: Option<f64>,
    lambda: Option<f64>,
}

fn year_response(
    trade: &TradeTable,
    gdp: &GdpTable,
    point: &CccPoint,
    config: &ShockConfig,
) -> Result<YearResponse, Failure> {
    let year = point.year;
    let (initial, run) = shock_run(trade, gdp, year, config)?;
    let shock = match run {
        ShockRun::Converged(trace) => trace,
        ShockRun::Stalled(_, failure) => return Err(failure),
    };
    let summary = Summary::of_shock(&shock, config);
    let recovery = run_recovery(
        shock.final_state(),
        epicenter_gdp(&initial, config)?,
        config,
    )
    .map_err(shock_failure)?;
    let lambda = fit_recovery(&recovery)
        .map_err(|e| log::warn!("no recovery fit for {year}: {e}"))
        .ok()
        .map(|f| f.lambda);
    Ok(YearResponse {
        year,
        ccc: point.ccc,
        impact_ratio: summary.impact_ratio,
        world_gdp_change: summary.world_gdp_change,
        lambda,
    })
}

pub fn cmd_pipeline(opts: &Options) -> Result<(), Failure> {
    let trade = load_trade(opts)?;
    let gdp = load_gdp(opts)?;
    let windows = load_recessions(opts)?;
    let config = shock_config(opts)?;
    let out = OutDir::new(&opts.out);
    let nets = networks(opts, &trade)?;
    let series = write_ccc_outputs(opts, &out, &nets, gdp.as_ref())?;
    let mut first_failure: Option<Failure> = None;
    let mut note = |r: Result<(), Failure>| {
        if let Err(f) = r {
            log::error!("{f}");
            first_failure.get_or_insert(f);
        }
    };

    for net in &nets {
        note(write_tree(&out, net).map(drop));
    }

    match gdp.as_ref() {
        None => log::warn!("no GDP table given; skipping shock and recovery stages"),
        Some(gdp) => {
            let responses: Vec<Result<YearResponse, Failure>> = series
                .par_iter()
                .map(|p| year_response(&trade, gdp, p, &config))
                .collect();
            let mut fig4a = Table::new(["year", "ccc", "impact_ratio"]);
            let mut fig4b = Table::new(["year", "ccc", "world_gdp_change", "lambda"]);
            for (point, response) in series.iter().zip(responses) {
                match response {
                    Ok(r) => {
                        fig4a.push(vec![r.year.into(), r.ccc.into(), r.impact_ratio.into()]);
                        fig4b.push(vec![
                            r.year.into(),
                            r.ccc.into(),
                            r.world_gdp_change.into(),
                            r.lambda.into(),
                        ]);
                    }
                    Err(f) if f.code == Failure::INPUT => {
                        log::warn!("skipping shock for {}: {f}", point.year);
                    }
                    Err(f) => note(Err(Failure {
                        message: format!("{}: {}", point.year, f.message),
                        ..f
                    })),
                }
            }
            note(out.write_table("fig4a", &fig4a, opts.format).map(drop));
            note(out.write_table("fig4b", &fig4b, opts.format).map(drop));
        }
    }

    match windows {
        None => log::warn!("no recession windows given; skipping recession test"),
        Some(windows) => note(write_recession_test(&out, &series, &windows)),
    }
    first_failure.map_or(Ok(()), Err)
}

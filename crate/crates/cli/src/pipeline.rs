use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fs::File;

use contagion_core::corisk::{average_pd, corisk_pairwise, corisk_timeseries, CoRiskMatrix};
use contagion_core::ingest::{
    country_panel, load_country_map, load_panel, log_transform, split_periods, summarize, Level,
    PanelSchema, PanelSeries, PeriodSpec, SummaryRow,
};
use contagion_core::lpm::{anneal, period_response, risk_index, AnnealResult};
use contagion_core::netmetrics::{
    centrality_suite, distance_graph, fragility, min_arborescence, net_corisk_graph, nodes_from,
    topo_sources, Arborescence, CentralityTable, GraphJson, GraphSnapshot, TopoOrder,
};
use contagion_core::pcorr::{
    adjacency, density, partial_correlation, significance_mask, AdjacencySnapshot,
    PartialCorrMatrix,
};
use contagion_core::stats::{
    bootstrap_tau_increase, kendall_tau, paired_t_test, Alternative, TestResult,
};
use contagion_core::{seed, Error};
use serde::Serialize;

use crate::config::{CentralityGraph, KendallLevel, RunConfig, Transform};
use crate::output::{file_sha256, slug, Artifacts, InputEntry, CROSS_PERIOD_DIR};
use crate::CliError;

const LEVELS: [Level; 2] = [Level::Bank, Level::Country];

fn level_name(level: Level) -> &'static str {
    match level {
        Level::Bank => "bank",
        Level::Country => "country",
    }
}

struct PeriodData {
    spec: PeriodSpec,
    slug: String,
    bank: PanelSeries,
    country: PanelSeries,
}

impl PeriodData {
    fn panel(&self, level: Level) -> &PanelSeries {
        match level {
            Level::Bank => &self.bank,
            Level::Country => &self.country,
        }
    }
}

struct Analysis {
    pc: PartialCorrMatrix,
    adj: AdjacencySnapshot,
    cr: CoRiskMatrix,
}

struct Network {
    full: GraphSnapshot,
    arb: Arborescence,
    topo: TopoOrder,
    centrality: CentralityTable,
    net: GraphSnapshot,
}

/// Loaded inputs plus lazily computed, shared intermediate results.
pub struct Context {
    pub cfg: RunConfig,
    inputs: BTreeMap<String, InputEntry>,
    panel: PanelSeries,
    periods: Vec<PeriodData>,
    analyses: Vec<[OnceCell<Analysis>; 2]>,
    networks: Vec<[OnceCell<Network>; 2]>,
    fit: OnceCell<AnnealResult>,
}

fn lvl(level: Level) -> usize {
    match level {
        Level::Bank => 0,
        Level::Country => 1,
    }
}

impl Context {
    pub fn load(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let panel_path = cfg.panel_path()?;
        let countries_path = cfg.countries_path()?;
        let open = |p: &std::path::Path| {
            File::open(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let loaded = load_panel(open(&panel_path)?, &PanelSchema::default())?;
        let map = load_country_map(open(&countries_path)?)?;
        let panel = loaded.panel.with_countries(&map)?;
        let mut slugs = std::collections::BTreeSet::new();
        for p in &cfg.periods {
            let s = slug(&p.name);
            if s.is_empty() || s == CROSS_PERIOD_DIR || !slugs.insert(s.clone()) {
                return Err(CliError::Validation(format!(
                    "periods: name {:?} gives an empty, reserved or duplicate directory {s:?}",
                    p.name
                )));
            }
        }
        let periods = split_periods(&panel, &cfg.periods)?
            .into_iter()
            .zip(&cfg.periods)
            .map(|(bank, spec)| {
                Ok(PeriodData {
                    spec: spec.clone(),
                    slug: slug(&spec.name),
                    country: country_panel(&bank)?,
                    bank,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let mut inputs = BTreeMap::new();
        for (key, rel, full) in [
            ("panel", &cfg.input.panel, &panel_path),
            ("countries", &cfg.input.countries, &countries_path),
        ] {
            let path = rel.clone().expect("checked above");
            inputs.insert(
                key.to_string(),
                InputEntry {
                    path,
                    sha256: file_sha256(full)?,
                },
            );
        }
        let k = periods.len();
        Ok(Context {
            cfg,
            inputs,
            panel,
            analyses: (0..k).map(|_| Default::default()).collect(),
            networks: (0..k).map(|_| Default::default()).collect(),
            fit: OnceCell::new(),
            periods,
        })
    }

    pub fn inputs(&self) -> &BTreeMap<String, InputEntry> {
        &self.inputs
    }

    fn period_index(&self, name: &str) -> usize {
        self.periods
            .iter()
            .position(|p| p.spec.name == name)
            .expect("period names validated")
    }

    fn response(&self, panel: &PanelSeries) -> Result<nalgebra::DMatrix<f64>, Error> {
        match self.cfg.pcorr.transform {
            Transform::Log => log_transform(panel, self.cfg.pcorr.pd_floor),
            Transform::Raw => Ok(panel.values.clone()),
        }
    }

    fn analysis(&self, k: usize, level: Level) -> Result<&Analysis, CliError> {
        let cell = &self.analyses[k][lvl(level)];
        if let Some(a) = cell.get() {
            return Ok(a);
        }
        let panel = self.periods[k].panel(level);
        let c = &self.cfg.pcorr;
        let pc = significance_mask(
            &partial_correlation(&self.response(panel)?, c.ridge)?,
            c.alpha,
        )?;
        let adj = adjacency(&pc, c.threshold)?;
        let cr = corisk_pairwise(&average_pd(panel), &pc)?;
        Ok(cell.get_or_init(|| Analysis { pc, adj, cr }))
    }

    fn network(&self, k: usize, level: Level) -> Result<&Network, CliError> {
        let cell = &self.networks[k][lvl(level)];
        if let Some(n) = cell.get() {
            return Ok(n);
        }
        let a = self.analysis(k, level)?;
        let nodes = nodes_from(&self.periods[k].panel(level).institutions);
        let full = distance_graph(&a.cr, nodes.clone())?;
        let arb = min_arborescence(&full)?;
        let topo = topo_sources(&arb.tree)?;
        let centrality = match self.cfg.netmetrics.centrality_graph {
            CentralityGraph::Mst => centrality_suite(&arb.tree)?,
            CentralityGraph::Full => centrality_suite(&full)?,
        };
        let lap: Vec<f64> = centrality.rows.iter().map(|r| r.laplacian).collect();
        let net = net_corisk_graph(&a.cr, &lap, nodes)?;
        Ok(cell.get_or_init(|| Network {
            full,
            arb,
            topo,
            centrality,
            net,
        }))
    }

    fn fit(&self) -> Result<&AnnealResult, CliError> {
        if let Some(f) = self.fit.get() {
            return Ok(f);
        }
        let logs = self
            .periods
            .iter()
            .map(|p| log_transform(&p.bank, self.cfg.pcorr.pd_floor))
            .collect::<Result<Vec<_>, _>>()?;
        let y = period_response(&logs, self.cfg.lpm.aggregate)?;
        let x = (0..self.periods.len())
            .map(|k| Ok(self.analysis(k, Level::Bank)?.adj.x.clone()))
            .collect::<Result<Vec<_>, CliError>>()?;
        let result = anneal(y, x, &self.cfg.schedule(), None)?;
        Ok(self.fit.get_or_init(|| result))
    }

    fn period_names(&self) -> Vec<String> {
        self.periods.iter().map(|p| p.spec.name.clone()).collect()
    }
}

fn cross(name: &str) -> String {
    format!("{CROSS_PERIOD_DIR}/{name}")
}

pub fn summarize_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let write = |art: &mut Artifacts, dir: &str, panel: &PanelSeries| -> Result<(), CliError> {
        for level in LEVELS {
            let rows: Vec<SummaryRow> = summarize(panel, level)?;
            art.csv_rows(&format!("{dir}/summary_{}.csv", level_name(level)), &rows)?;
        }
        Ok(())
    };
    write(art, CROSS_PERIOD_DIR, &ctx.panel)?;
    for p in &ctx.periods {
        write(art, &p.slug, &p.bank)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AdjacencyJson {
    tickers: Vec<String>,
    threshold: f64,
    edges: usize,
    density: f64,
    x: Vec<Vec<u8>>,
}

#[derive(Serialize)]
struct CountRow<'a> {
    period: &'a str,
    level: &'a str,
    entities: usize,
    significant_pairs: usize,
    total_pairs: usize,
    threshold_edges: usize,
    density: f64,
}

pub fn pcorr_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let mut counts = Vec::new();
    for (k, p) in ctx.periods.iter().enumerate() {
        for level in LEVELS {
            let a = ctx.analysis(k, level)?;
            let tickers = p.panel(level).tickers();
            let name = level_name(level);
            art.json(
                &format!("{}/pcorr_{name}.json", p.slug),
                &a.pc.to_json(&tickers),
            )?;
            let n = a.adj.n();
            art.json(
                &format!("{}/adjacency_{name}.json", p.slug),
                &AdjacencyJson {
                    tickers,
                    threshold: a.adj.threshold,
                    edges: a.adj.edge_count(),
                    density: density(&a.adj),
                    x: (0..n)
                        .map(|i| (0..n).map(|j| u8::from(a.adj.x[(i, j)])).collect())
                        .collect(),
                },
            )?;
            counts.push(CountRow {
                period: &p.spec.name,
                level: name,
                entities: n,
                significant_pairs: a.pc.significant_pairs()?,
                total_pairs: n * (n - 1) / 2,
                threshold_edges: a.adj.edge_count(),
                density: density(&a.adj),
            });
        }
    }
    art.csv_rows(&cross("significant_counts.csv"), &counts)
}

pub fn corisk_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    for (k, p) in ctx.periods.iter().enumerate() {
        for level in LEVELS {
            let a = ctx.analysis(k, level)?;
            let panel = p.panel(level);
            let name = level_name(level);
            art.json(
                &format!("{}/corisk_{name}.json", p.slug),
                &a.cr.to_json(&panel.tickers()),
            )?;
            let series = corisk_timeseries(panel, &a.pc, ctx.cfg.corisk.variant)?;
            art.csv(&format!("{}/corisk_timeseries_{name}.csv", p.slug), |buf| {
                series.write_csv(buf)
            })?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MstJson {
    root: String,
    weight: f64,
    #[serde(flatten)]
    graph: GraphJson,
}

#[derive(Serialize)]
struct TopoJson {
    order: Vec<String>,
    sources: Vec<String>,
}

#[derive(Serialize)]
struct FragilityRow<'a> {
    period: &'a str,
    level: &'a str,
    graph: &'a str,
    fragility: f64,
}

pub fn mst_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (k, p) in ctx.periods.iter().enumerate() {
        for level in LEVELS {
            let net = ctx.network(k, level)?;
            let name = level_name(level);
            let ids = net.full.ids();
            art.json(
                &format!("{}/distance_graph_{name}.json", p.slug),
                &net.full.to_json(),
            )?;
            art.json(
                &format!("{}/mst_{name}.json", p.slug),
                &MstJson {
                    root: ids[net.arb.root].clone(),
                    weight: net.arb.weight,
                    graph: net.arb.tree.to_json(),
                },
            )?;
            let label = |v: &[usize]| v.iter().map(|&i| ids[i].clone()).collect();
            art.json(
                &format!("{}/topo_{name}.json", p.slug),
                &TopoJson {
                    order: label(&net.topo.order),
                    sources: label(&net.topo.sources),
                },
            )?;
            for (graph, g) in [("full", &net.full), ("mst", &net.arb.tree)] {
                rows.push(FragilityRow {
                    period: &p.spec.name,
                    level: name,
                    graph,
                    fragility: fragility(g)?,
                });
            }
        }
    }
    art.csv_rows(&cross("fragility.csv"), &rows)
}

pub fn centrality_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    for (k, p) in ctx.periods.iter().enumerate() {
        for level in LEVELS {
            let net = ctx.network(k, level)?;
            let name = level_name(level);
            art.csv(&format!("{}/centrality_{name}.csv", p.slug), |buf| {
                net.centrality.write_csv(buf)
            })?;
            art.json(
                &format!("{}/net_corisk_{name}.json", p.slug),
                &net.net.to_json(),
            )?;
        }
    }
    Ok(())
}

pub fn lpm_fit_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let fit = ctx.fit()?;
    let schedule = ctx.cfg.schedule();
    art.json(
        &cross("lpm_fit.json"),
        &fit.to_json(&ctx.panel.tickers(), &ctx.period_names(), &schedule),
    )?;
    art.csv(&cross("lpm_trace.csv"), |buf| {
        fit.write_trace_csv(&schedule, buf)
    })
}

#[derive(Serialize)]
struct RiskRow<'a> {
    period: &'a str,
    ticker: &'a str,
    risk_index: f64,
}

pub fn risk_index_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let fit = ctx.fit()?;
    let r = risk_index(&fit.best);
    let tickers = ctx.panel.tickers();
    let mut rows = Vec::new();
    for (t, p) in ctx.periods.iter().enumerate() {
        for (i, ticker) in tickers.iter().enumerate() {
            rows.push(RiskRow {
                period: &p.spec.name,
                ticker,
                risk_index: r.values[(i, t)],
            });
        }
    }
    art.csv_rows(&cross("risk_index.csv"), &rows)
}

#[derive(Serialize)]
struct TtestRow {
    greater: String,
    lesser: String,
    #[serde(flatten)]
    result: TestResult,
}

pub fn ttest_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for c in ctx.cfg.comparisons() {
        let (g, l) = (ctx.period_index(&c.greater), ctx.period_index(&c.lesser));
        let a = ctx.analysis(g, Level::Bank)?.cr.vectorize();
        let b = ctx.analysis(l, Level::Bank)?.cr.vectorize();
        let result = paired_t_test(&a, &b, Alternative::Greater, ctx.cfg.stats.alpha)?;
        rows.push(TtestRow {
            greater: c.greater,
            lesser: c.lesser,
            result,
        });
    }
    art.json(&cross("ttest.json"), &rows)
}

#[derive(Serialize)]
struct KendallRow {
    pair: [String; 2],
    pre_tau: Option<f64>,
    post_tau: Option<f64>,
    #[serde(flatten)]
    result: TestResult,
}

#[derive(Serialize)]
struct KendallJson {
    pre: String,
    post: Vec<String>,
    level: KendallLevel,
    results: Vec<KendallRow>,
}

pub fn kendall_stage(ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let kc = &ctx.cfg.stats.kendall;
    if ctx.periods.len() < 2 && kc.post.is_empty() {
        return Err(CliError::Validation(
            "stats.kendall: need at least two periods".into(),
        ));
    }
    let pre = kc
        .pre
        .clone()
        .unwrap_or_else(|| ctx.periods[0].spec.name.clone());
    let post = if kc.post.is_empty() {
        vec![ctx.periods[1].spec.name.clone()]
    } else {
        kc.post.clone()
    };
    let level = match kc.level {
        KendallLevel::Bank => Level::Bank,
        KendallLevel::Country => Level::Country,
    };
    let pre_panel = ctx.periods[ctx.period_index(&pre)].panel(level);
    let post_panels: Vec<&PanelSeries> = post
        .iter()
        .map(|n| ctx.periods[ctx.period_index(n)].panel(level))
        .collect();
    let pooled = |j: usize| -> Vec<f64> { post_panels.iter().flat_map(|p| p.column(j)).collect() };
    let tickers = pre_panel.tickers();
    let master = seed::derive(ctx.cfg.seed, "kendall");
    let mut results = Vec::new();
    let mut pair_index = 0u64;
    for a in 0..tickers.len() {
        for b in a + 1..tickers.len() {
            let (px, py) = (pre_panel.column(a), pre_panel.column(b));
            let (qx, qy) = (pooled(a), pooled(b));
            let s = seed::derive_indexed(master, "pair", pair_index);
            pair_index += 1;
            let result = bootstrap_tau_increase(
                &px,
                &py,
                &qx,
                &qy,
                ctx.cfg.stats.resamples,
                ctx.cfg.stats.alpha,
                s,
            )?;
            results.push(KendallRow {
                pair: [tickers[a].clone(), tickers[b].clone()],
                pre_tau: kendall_tau(&px, &py)?,
                post_tau: kendall_tau(&qx, &qy)?,
                result,
            });
        }
    }
    art.json(
        &cross("kendall.json"),
        &KendallJson {
            pre,
            post,
            level: kc.level,
            results,
        },
    )
}

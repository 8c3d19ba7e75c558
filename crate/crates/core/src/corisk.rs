//! CoRisk contagion measures on a significant-partial-correlation network.
//!
//! `c[i][j] = 1 - (1 - APD_i)^rho_ij` is the effect of bank `i` on bank `j`,
//! so row sums are outgoing totals and column sums incoming totals.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PanelSeries;
use crate::pcorr::{rows, PartialCorrMatrix};

/// How CoRisk_out is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutVariant {
    /// The printed product form, which collapses to `prod_i (1 - PD_j)^rho_ij`.
    Literal,
    /// Sum of pairwise CoRisk_ji over neighbours.
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoRiskMatrix {
    pub c: DMatrix<f64>,
    pub apd: Vec<f64>,
    /// Pairs present in the network (significant mask).
    pub present: DMatrix<bool>,
}

impl CoRiskMatrix {
    pub fn n(&self) -> usize {
        self.apd.len()
    }

    /// Row sums: aggregate CoRisk transmitted by each bank.
    pub fn out_totals(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.c.row(i).sum()).collect()
    }

    /// Column sums: aggregate CoRisk received by each bank.
    pub fn in_totals(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.c.column(j).sum()).collect()
    }

    /// Row-major flattening including the zero diagonal (N² entries).
    pub fn vectorize(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.c[(i, j)])
            .collect()
    }

    pub fn to_json(&self, tickers: &[String]) -> CoRiskJson {
        CoRiskJson {
            tickers: tickers.to_vec(),
            apd: self.apd.clone(),
            corisk: rows(&self.c),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoRiskJson {
    pub tickers: Vec<String>,
    pub apd: Vec<f64>,
    pub corisk: Vec<Vec<f64>>,
}

/// Mean PD of each institution over the panel.
pub fn average_pd(panel: &PanelSeries) -> Vec<f64> {
    let n = panel.n_dates() as f64;
    (0..panel.n_institutions())
        .map(|j| panel.values.column(j).sum() / n)
        .collect()
}

/// `1 - (1 - pd)^rho`, with `pd = 1` handled as the limit.
fn pairwise(pd: f64, rho: f64, node: usize) -> Result<f64> {
    let base = 1.0 - pd;
    if base <= 0.0 {
        if rho < 0.0 {
            return Err(Error::InfiniteCoRisk { node });
        }
        return Ok(if rho > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - base.powf(rho))
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn check_pd(pd: &[f64]) -> Result<()> {
    if let Some(v) = pd.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("PD outside [0,1]: {v}")));
    }
    Ok(())
}

pub fn corisk_pairwise(apd: &[f64], pc: &PartialCorrMatrix) -> Result<CoRiskMatrix> {
    let mask = pc.mask()?;
    let n = pc.n();
    check_len("apd", apd.len(), n)?;
    check_pd(apd)?;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && mask[(i, j)] {
                c[(i, j)] = pairwise(apd[i], pc.rho[(i, j)], i)?;
            }
        }
    }
    Ok(CoRiskMatrix {
        c,
        apd: apd.to_vec(),
        present: DMatrix::from_fn(n, n, |i, j| i != j && mask[(i, j)]),
    })
}

/// Risk received by each bank from its neighbours at one date.
pub fn corisk_in(pd: &[f64], pc: &PartialCorrMatrix) -> Result<Vec<f64>> {
    let mask = pc.mask()?;
    let n = pc.n();
    check_len("pd", pd.len(), n)?;
    check_pd(pd)?;
    (0..n)
        .map(|j| {
            let mut log_prod = 0.0;
            for i in (0..n).filter(|&i| i != j && mask[(i, j)]) {
                let rho = pc.rho[(i, j)];
                let base = 1.0 - pd[i];
                if base <= 0.0 && rho < 0.0 {
                    return Err(Error::InfiniteCoRisk { node: i });
                }
                if rho != 0.0 {
                    log_prod += rho * base.ln();
                }
            }
            Ok(1.0 - log_prod.exp())
        })
        .collect()
}

/// Risk transmitted by each bank to its neighbours at one date.
pub fn corisk_out(pd: &[f64], pc: &PartialCorrMatrix, variant: OutVariant) -> Result<Vec<f64>> {
    let mask = pc.mask()?;
    let n = pc.n();
    check_len("pd", pd.len(), n)?;
    check_pd(pd)?;
    (0..n)
        .map(|j| {
            let nbrs = (0..n).filter(|&i| i != j && mask[(i, j)]);
            match variant {
                OutVariant::Literal => {
                    let exponent: f64 = nbrs.map(|i| pc.rho[(i, j)]).sum();
                    let base = 1.0 - pd[j];
                    if base <= 0.0 {
                        if exponent < 0.0 {
                            return Err(Error::InfiniteCoRisk { node: j });
                        }
                        return Ok(if exponent > 0.0 { 0.0 } else { 1.0 });
                    }
                    Ok(base.powf(exponent))
                }
                OutVariant::Sum => nbrs
                    .map(|i| pairwise(pd[j], pc.rho[(j, i)], j))
                    .sum::<Result<f64>>(),
            }
        })
        .collect()
}

/// Per-date CoRisk_in and CoRisk_out for every institution.
#[derive(Debug, Clone, PartialEq)]
pub struct CoRiskSeries {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// rows = dates, columns = institutions
    pub inflow: DMatrix<f64>,
    pub outflow: DMatrix<f64>,
}

impl CoRiskSeries {
    /// CSV rows `date,ticker,corisk_in,corisk_out`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["date", "ticker", "corisk_in", "corisk_out"])?;
        for (r, d) in self.dates.iter().enumerate() {
            for (j, t) in self.tickers.iter().enumerate() {
                wtr.write_record([
                    d.to_string(),
                    t.clone(),
                    self.inflow[(r, j)].to_string(),
                    self.outflow[(r, j)].to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn corisk_timeseries(
    panel: &PanelSeries,
    pc: &PartialCorrMatrix,
    variant: OutVariant,
) -> Result<CoRiskSeries> {
    let (t, n) = (panel.n_dates(), panel.n_institutions());
    let mut inflow = DMatrix::zeros(t, n);
    let mut outflow = DMatrix::zeros(t, n);
    for r in 0..t {
        let pd = panel.row(r);
        let ci = corisk_in(&pd, pc)?;
        let co = corisk_out(&pd, pc, variant)?;
        for j in 0..n {
            inflow[(r, j)] = ci[j];
            outflow[(r, j)] = co[j];
        }
    }
    Ok(CoRiskSeries {
        dates: panel.dates.clone(),
        tickers: panel.tickers(),
        inflow,
        outflow,
    })
}

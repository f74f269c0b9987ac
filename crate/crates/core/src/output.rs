//! Tabular output shared by the command-line tools.

use std::io::{self, Write};

use serde::Serialize;

use crate::engine::{EngineState, RunSummary};
use crate::model::{Metric, Params, SlotEvents};
use crate::validation::{Method, PointEvaluation};

pub const ROW_HEADER: [&str; 9] = [
    "lambda1",
    "lambda2",
    "method",
    "metric",
    "value",
    "uncertainty",
    "slots",
    "seed",
    "cap",
];
pub const TRACE_HEADER: [&str; 9] = ["t", "data", "energy", "C", "B", "actuated", "I", "A", "AI"];

/// One metric value from one computation route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub method: Method,
    pub metric: Metric,
    pub value: f64,
    pub uncertainty: f64,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
    pub cap: Option<u64>,
}

impl OutputRow {
    pub fn new(p: &Params, method: Method, metric: Metric, value: f64, uncertainty: f64) -> Self {
        Self {
            lambda1: p.lambda1(),
            lambda2: p.lambda2(),
            method,
            metric,
            value,
            uncertainty,
            slots: None,
            seed: None,
            cap: None,
        }
    }

    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        [
            fmt_g9(self.lambda1),
            fmt_g9(self.lambda2),
            self.method.to_string(),
            self.metric.to_string(),
            fmt_g9(self.value),
            fmt_g9(self.uncertainty),
            opt(self.slots),
            opt(self.seed),
            opt(self.cap),
        ]
    }
}

/// Rows for one simulation run.
pub fn sim_rows(p: &Params, run: &RunSummary, metrics: &[Metric]) -> Vec<OutputRow> {
    metrics
        .iter()
        .map(|&m| {
            let avg = match m {
                Metric::Aoi => run.aoi(),
                Metric::Aoa => run.aoa(),
                Metric::Aoai => run.aoai(),
            };
            OutputRow {
                slots: Some(run.slots),
                seed: Some(run.seed),
                ..OutputRow::new(p, Method::Sim, m, avg.mean, avg.stderr)
            }
        })
        .collect()
}

/// Rows for an evaluated grid point, routes in [`Method::ALL`] order and
/// metrics in [`Metric::ALL`] order.
pub fn point_rows(pt: &PointEvaluation) -> Vec<OutputRow> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        for &metric in method.metrics() {
            let Some(est) = pt.estimate(method, metric) else {
                continue;
            };
            let mut row = OutputRow::new(&pt.params, method, metric, est.value, est.uncertainty);
            match method {
                Method::Sim => {
                    let run = pt.sim.as_ref().expect("estimate implies a run");
                    row.slots = Some(run.slots);
                    row.seed = Some(run.seed);
                }
                Method::Chain => row.cap = pt.chain.map(|c| c.cap),
                _ => {}
            }
            rows.push(row);
        }
    }
    rows
}

/// Writes `rows` as CSV with [`ROW_HEADER`], or as one JSON object per line.
pub fn write_rows(w: &mut dyn Write, rows: &[OutputRow], json: bool) -> io::Result<()> {
    if json {
        for r in rows {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        return Ok(());
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ROW_HEADER)?;
    for r in rows {
        out.write_record(r.fields())?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
struct TraceRow {
    t: u64,
    data: u8,
    energy: u8,
    #[serde(rename = "C")]
    cache: u8,
    #[serde(rename = "B")]
    battery: u8,
    actuated: u8,
    #[serde(rename = "I")]
    aoi: u64,
    #[serde(rename = "A")]
    aoa: u64,
    #[serde(rename = "AI")]
    aoai: u64,
}

impl TraceRow {
    fn fields(&self) -> [u64; 9] {
        [
            self.t,
            self.data.into(),
            self.energy.into(),
            self.cache.into(),
            self.battery.into(),
            self.actuated.into(),
            self.aoi,
            self.aoa,
            self.aoai,
        ]
    }
}

/// Writes a replayed trace, one line per slot.
pub fn write_trace(
    w: &mut dyn Write,
    events: &[SlotEvents],
    trace: &[(EngineState, bool)],
    json: bool,
) -> io::Result<()> {
    let rows = events.iter().zip(trace).map(|(ev, (s, act))| TraceRow {
        t: s.slot,
        data: ev.data_arrived.into(),
        energy: ev.energy_arrived.into(),
        cache: s.system.cache().into(),
        battery: s.system.battery().into(),
        actuated: (*act).into(),
        aoi: s.ages.aoi,
        aoa: s.ages.aoa,
        aoai: s.ages.aoai,
    });
    if json {
        for r in rows {
            serde_json::to_writer(&mut *w, &r)?;
            writeln!(w)?;
        }
        return Ok(());
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in rows {
        out.write_record(r.fields().iter().map(u64::to_string))?;
    }
    out.flush()
}

/// `printf("%.9g")`: nine significant digits, trailing zeros dropped,
/// exponent form below 1e-4 and from 1e9 up.
pub fn fmt_g9(v: f64) -> String {
    const P: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        // reference strings from C printf("%.9g")
        let cases = [
            (2.0, "2"),
            (34.0 / 15.0, "2.26666667"),
            (22.0 / 9.0, "2.44444444"),
            (0.1, "0.1"),
            (0.3, "0.3"),
            (9.755381604696673, "9.7553816"),
            (1e-7, "1e-07"),
            (1.234e-5, "1.234e-05"),
            (0.0001, "0.0001"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (999999999.6, "1e+09"),
            (-0.5, "-0.5"),
            (0.0, "0"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_g9(v), want, "{v}");
        }
    }

    #[test]
    fn csv_rows() {
        let p = Params::new(0.5, 0.5).unwrap();
        let rows = [
            OutputRow::new(&p, Method::Analytic, Metric::Aoa, 34.0 / 15.0, 0.0),
            OutputRow {
                cap: Some(240),
                ..OutputRow::new(&p, Method::Chain, Metric::Aoa, 34.0 / 15.0, 1e-12)
            },
        ];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, false).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda1,lambda2,method,metric,value,uncertainty,slots,seed,cap\n\
             0.5,0.5,analytic,aoa,2.26666667,0,,,\n\
             0.5,0.5,chain,aoa,2.26666667,1e-12,,,240\n"
        );
    }

    #[test]
    fn json_rows_use_csv_keys() {
        let p = Params::new(0.5, 0.25).unwrap();
        let mut buf = Vec::new();
        write_rows(
            &mut buf,
            &[OutputRow::new(&p, Method::Analytic, Metric::Aoi, 2.0, 0.0)],
            true,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = ROW_HEADER.to_vec();
        want.sort();
        let mut keys_sorted = keys.clone();
        keys_sorted.sort();
        assert_eq!(keys_sorted, want);
        assert_eq!(v["method"], "analytic");
        assert!(v["slots"].is_null());
    }
}

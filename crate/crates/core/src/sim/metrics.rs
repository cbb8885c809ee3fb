//! Windowed delay/density sampling and the metrics CSV layout.

use std::io::Write;

use super::{ExitEvent, Network};

/// Windowed delay measurement; `no_sample` is set when nobody left in the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample {
    pub value: f64,
    pub samples: usize,
    pub no_sample: bool,
}

impl DelaySample {
    pub fn from_sum(sum: f64, n: usize) -> Self {
        if n == 0 {
            Self { value: 0.0, samples: 0, no_sample: true }
        } else {
            Self { value: sum / n as f64, samples: n, no_sample: false }
        }
    }

    pub fn as_option(&self) -> Option<f64> {
        (!self.no_sample).then_some(self.value)
    }
}

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSample {
    /// End of the sampling window, simulation seconds.
    pub t: f64,
    /// Mean over measured intersections with exits in the window (s/km).
    pub avg_delay: Option<f64>,
    /// Time-averaged density over the window (veh/km).
    pub avg_density: f64,
    pub per_intersection: Vec<(Option<f64>, f64)>,
}

/// Accumulates per-step observations and emits one [`MetricsSample`] per window.
#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    measured: Vec<usize>,
    window: f64,
    window_start: f64,
    delay_sum: Vec<f64>,
    delay_n: Vec<usize>,
    density_sum: Vec<f64>,
    steps: usize,
    samples: Vec<MetricsSample>,
}

impl MetricsRecorder {
    /// `measured` lists the intersection indices reported, in column order.
    pub fn new(measured: Vec<usize>, window: f64) -> Self {
        assert!(window > 0.0, "sampling window must be positive");
        let n = measured.len();
        Self {
            measured,
            window,
            window_start: 0.0,
            delay_sum: vec![0.0; n],
            delay_n: vec![0; n],
            density_sum: vec![0.0; n],
            steps: 0,
            samples: Vec::new(),
        }
    }

    /// Feeds the exits of the step that just finished and samples densities.
    pub fn observe(&mut self, net: &Network, exits: &[ExitEvent]) {
        for e in exits {
            if let Some(k) = self.measured.iter().position(|&m| m == e.intersection) {
                self.delay_sum[k] += e.delay_s_per_km;
                self.delay_n[k] += 1;
            }
        }
        for (k, &ix) in self.measured.iter().enumerate() {
            let d = net.measure_density(ix);
            self.density_sum[k] += d.iter().sum::<f64>() / 4.0;
        }
        self.steps += 1;
        let now = net.time();
        if now - self.window_start >= self.window - 1e-9 {
            self.flush(now);
        }
    }

    /// Closes the current window at time `t` (no-op when it is empty).
    pub fn flush(&mut self, t: f64) {
        if self.steps == 0 {
            return;
        }
        let per: Vec<(Option<f64>, f64)> = (0..self.measured.len())
            .map(|k| {
                let delay = DelaySample::from_sum(self.delay_sum[k], self.delay_n[k]).as_option();
                (delay, self.density_sum[k] / self.steps as f64)
            })
            .collect();
        let delays: Vec<f64> = per.iter().filter_map(|p| p.0).collect();
        let avg_delay = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
        let avg_density = per.iter().map(|p| p.1).sum::<f64>() / per.len().max(1) as f64;
        self.samples.push(MetricsSample { t, avg_delay, avg_density, per_intersection: per });
        self.window_start = t;
        self.delay_sum.iter_mut().for_each(|x| *x = 0.0);
        self.delay_n.iter_mut().for_each(|x| *x = 0);
        self.density_sum.iter_mut().for_each(|x| *x = 0.0);
        self.steps = 0;
    }

    pub fn samples(&self) -> &[MetricsSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<MetricsSample> {
        self.samples
    }
}

/// Mean of the windowed delays that have samples, and mean density over all windows.
pub fn time_averages(samples: &[MetricsSample]) -> (f64, f64) {
    let delays: Vec<f64> = samples.iter().filter_map(|s| s.avg_delay).collect();
    let delay = if delays.is_empty() { 0.0 } else { delays.iter().sum::<f64>() / delays.len() as f64 };
    let density = if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s.avg_density).sum::<f64>() / samples.len() as f64
    };
    (delay, density)
}

pub const BASE_COLUMNS: [&str; 3] = ["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km"];

/// Header for the metrics stream: base columns then `delay_<id>,density_<id>` pairs.
pub fn csv_header(intersection_ids: &[String]) -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for id in intersection_ids {
        h.push(format!("delay_{id}"));
        h.push(format!("density_{id}"));
    }
    h
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Shortest round-trip decimal rendering.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// Fields of one row, aligned with [`csv_header`]. Missing delays are empty.
pub fn csv_fields(sample: &MetricsSample) -> Vec<String> {
    let mut row = vec![fmt_num(sample.t), fmt_opt(sample.avg_delay), fmt_num(sample.avg_density)];
    for &(d, rho) in &sample.per_intersection {
        row.push(fmt_opt(d));
        row.push(fmt_num(rho));
    }
    row
}

pub fn write_csv<W: Write>(out: W, intersection_ids: &[String], samples: &[MetricsSample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(intersection_ids))?;
    for s in samples {
        w.write_record(csv_fields(s))?;
    }
    w.flush()?;
    Ok(())
}

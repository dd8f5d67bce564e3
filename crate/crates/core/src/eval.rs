//! Projection-based SIR/SAR metrics, per-node scene metrics, node selectors
//! and corpus aggregates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::FftConvolver;
use crate::error::{Error, Result};
use crate::signal::TimeSignal;

/// Metric values are clamped to ±this many dB.
pub const METRIC_CAP_DB: f64 = 100.0;
pub const DEFAULT_FILTER_LEN: usize = 512;
const GRAM_LOADING: f64 = 1e-12;

fn db_ratio(num: f64, den: f64) -> f64 {
    let v = if den <= 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else if num <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (num / den).log10()
    };
    v.clamp(-METRIC_CAP_DB, METRIC_CAP_DB)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Spectra of two real reference signals, zero-padded so that circular
/// correlations up to `max_lag` are exact.
struct ReferenceSpectra {
    fft_len: usize,
    target: Vec<Complex<f64>>,
    interferer: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ReferenceSpectra {
    fn new(target: &[f64], interferer: &[f64], max_lag: usize) -> Self {
        let fft_len = (target.len() + max_lag).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let (t, i) = Self::two_real(&*forward, target, interferer, fft_len);
        Self {
            fft_len,
            target: t,
            interferer: i,
            forward,
            inverse,
        }
    }

    /// Spectra of two real signals from one complex transform.
    fn two_real(fft: &dyn Fft<f64>, a: &[f64], b: &[f64], len: usize) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let mut z = vec![Complex::new(0.0, 0.0); len];
        for (k, v) in z.iter_mut().enumerate() {
            *v = Complex::new(a.get(k).copied().unwrap_or(0.0), b.get(k).copied().unwrap_or(0.0));
        }
        fft.process(&mut z);
        let mut fa = vec![Complex::new(0.0, 0.0); len];
        let mut fb = vec![Complex::new(0.0, 0.0); len];
        for k in 0..len {
            let zk = z[k];
            let zr = z[(len - k) % len].conj();
            fa[k] = (zk + zr) * 0.5;
            fb[k] = (zk - zr) * Complex::new(0.0, -0.5);
        }
        (fa, fb)
    }

    /// Inverse transform of two Hermitian spectra, returning both real
    /// sequences at lags `−max_lag..=max_lag` (index `τ + max_lag`).
    fn correlate_pair(&self, x: Vec<Complex<f64>>, y: &[Complex<f64>], max_lag: usize) -> (Vec<f64>, Vec<f64>) {
        let mut buf = x;
        for (b, v) in buf.iter_mut().zip(y) {
            *b += Complex::new(-v.im, v.re);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        let n = self.fft_len as isize;
        let at = |lag: isize| buf[lag.rem_euclid(n) as usize] * scale;
        let lags = -(max_lag as isize)..=max_lag as isize;
        (lags.clone().map(|t| at(t).re).collect(), lags.map(|t| at(t).im).collect())
    }
}

/// Dense lower-triangular Cholesky factor of a symmetric positive definite
/// matrix, stored row-major.
struct RealCholesky {
    n: usize,
    l: Vec<f64>,
}

impl RealCholesky {
    fn new(a: &[f64], n: usize) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = &l[j * n..j * n + j];
            let d = a[j * n + j] - dot(row_j, row_j);
            if !(d > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "reference signals are linearly dependent (pivot {j})"
                )));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let row_j = &head[j * n..j * n + j];
            for (r, row_i) in tail.chunks_exact_mut(n).enumerate() {
                let i = j + 1 + r;
                row_i[j] = (a[i * n + j] - dot(&row_i[..j], row_j)) / djj;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves with the leading `m × m` block of the factor.
    fn solve_leading(&self, b: &[f64], m: usize) -> Vec<f64> {
        let n = self.n;
        let mut y = b[..m].to_vec();
        for i in 0..m {
            let s = dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        for i in (0..m).rev() {
            let mut s = y[i];
            for k in (i + 1)..m {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// The orthogonal decomposition `estimate = s_target + e_interf + e_artif`
/// over the estimate padded by `filter_len − 1` zeros.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirSar {
    pub sir_db: f64,
    pub sar_db: f64,
}

/// Least-squares projector onto the span of a target reference, an
/// interfering reference and their first `filter_len` delays. The Gram
/// matrix is factored once and reused for every estimate.
pub struct BssProjector {
    target: Vec<f64>,
    interferer: Vec<f64>,
    filter_len: usize,
    spectra: ReferenceSpectra,
    chol: RealCholesky,
}

impl BssProjector {
    pub fn new(target: &[f64], interferer: &[f64], filter_len: usize) -> Result<Self> {
        if target.len() != interferer.len() || target.is_empty() {
            return Err(Error::Size(format!(
                "references of {} and {} samples",
                target.len(),
                interferer.len()
            )));
        }
        if filter_len == 0 {
            return Err(Error::Config("filter length must be positive".into()));
        }
        let (es, en) = (energy(target), energy(interferer));
        if es == 0.0 || en == 0.0 {
            return Err(Error::DegenerateInput("zero-energy reference".into()));
        }
        let l = filter_len;
        let max_lag = l - 1;
        let spectra = ReferenceSpectra::new(target, interferer, max_lag);
        let auto_s: Vec<Complex<f64>> = spectra.target.iter().map(|v| Complex::new(v.norm_sqr(), 0.0)).collect();
        let auto_n: Vec<Complex<f64>> = spectra.interferer.iter().map(|v| Complex::new(v.norm_sqr(), 0.0)).collect();
        let (r_ss, r_nn) = spectra.correlate_pair(auto_s, &auto_n, max_lag);
        let cross: Vec<Complex<f64>> = spectra.target.iter().zip(&spectra.interferer).map(|(a, b)| a.conj() * b).collect();
        let zero = vec![Complex::new(0.0, 0.0); spectra.fft_len];
        let (r_sn, _) = spectra.correlate_pair(cross, &zero, max_lag);
        let n = 2 * l;
        let mut g = vec![0.0; n * n];
        // Entry (i, j) between delays i and j is the correlation at lag i − j.
        for i in 0..l {
            for j in 0..l {
                let lag = i as isize - j as isize + max_lag as isize;
                let lag = lag as usize;
                g[i * n + j] = r_ss[lag];
                g[(l + i) * n + (l + j)] = r_nn[lag];
                g[i * n + (l + j)] = r_sn[lag];
                g[(l + j) * n + i] = r_sn[lag];
            }
        }
        for i in 0..l {
            g[i * n + i] += GRAM_LOADING * es;
            g[(l + i) * n + (l + i)] += GRAM_LOADING * en;
        }
        let chol = RealCholesky::new(&g, n)?;
        Ok(Self {
            target: target.to_vec(),
            interferer: interferer.to_vec(),
            filter_len,
            spectra,
            chol,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    fn fit(&self, estimate: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if energy(estimate) == 0.0 {
            return Err(Error::DegenerateInput("zero-energy estimate".into()));
        }
        let mut e = estimate.to_vec();
        e.resize(self.len(), 0.0);
        let l = self.filter_len;
        let sp = &self.spectra;
        let mut fe: Vec<Complex<f64>> = (0..sp.fft_len)
            .map(|k| Complex::new(e.get(k).copied().unwrap_or(0.0), 0.0))
            .collect();
        sp.forward.process(&mut fe);
        let xs: Vec<Complex<f64>> = sp.target.iter().zip(&fe).map(|(a, b)| a.conj() * b).collect();
        let xn: Vec<Complex<f64>> = sp.interferer.iter().zip(&fe).map(|(a, b)| a.conj() * b).collect();
        let (ce_s, ce_n) = sp.correlate_pair(xs, &xn, l - 1);
        let mut d = Vec::with_capacity(2 * l);
        d.extend_from_slice(&ce_s[l - 1..]);
        d.extend_from_slice(&ce_n[l - 1..]);
        let c_all = self.chol.solve_leading(&d, 2 * l);
        let c_target = self.chol.solve_leading(&d, l);
        Ok((e, d, [c_target, c_all].concat()))
    }

    /// SIR and SAR in dB, from projection energies.
    pub fn sir_sar(&self, estimate: &[f64]) -> Result<SirSar> {
        let (e, d, c) = self.fit(estimate)?;
        let l = self.filter_len;
        let p_target: f64 = d[..l].iter().zip(&c[..l]).map(|(a, b)| a * b).sum();
        let p_all: f64 = d.iter().zip(&c[l..]).map(|(a, b)| a * b).sum();
        let total = energy(&e);
        let interf = (p_all - p_target).max(0.0);
        let artif = (total - p_all).max(0.0);
        Ok(SirSar {
            sir_db: db_ratio(p_target, interf),
            sar_db: db_ratio(p_all, artif),
        })
    }

    /// Explicit decomposition signals (length `len + filter_len − 1`).
    pub fn decompose(&self, estimate: &[f64]) -> Result<Decomposition> {
        let (e, _, c) = self.fit(estimate)?;
        let l = self.filter_len;
        let out_len = self.len() + l - 1;
        let conv_s = FftConvolver::new(&self.target, l);
        let conv_n = FftConvolver::new(&self.interferer, l);
        let s_target = conv_s.convolve(&c[..l], out_len);
        let all_s = conv_s.convolve(&c[l..2 * l], out_len);
        let all_n = conv_n.convolve(&c[2 * l..], out_len);
        let mut padded = e;
        padded.resize(out_len, 0.0);
        let e_interf: Vec<f64> = (0..out_len).map(|i| all_s[i] + all_n[i] - s_target[i]).collect();
        let e_artif: Vec<f64> = (0..out_len).map(|i| padded[i] - s_target[i] - e_interf[i]).collect();
        Ok(Decomposition {
            s_target,
            e_interf,
            e_artif,
        })
    }
}

/// One-shot SIR/SAR of `estimate` against `[target, interferer]`.
pub fn bss_eval(estimate: &[f64], target: &[f64], interferer: &[f64], filter_len: usize) -> Result<SirSar> {
    BssProjector::new(target, interferer, filter_len)?.sir_sar(estimate)
}

/// The signals needed to score one node.
#[derive(Clone, Debug)]
pub struct NodeReferences {
    pub speech_image: TimeSignal,
    pub noise_image: TimeSignal,
    pub mixture: TimeSignal,
    /// Direct-path delays (samples) of target and noise to the reference mic.
    pub direct_delay: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct SceneReferences {
    pub scene_id: String,
    pub nodes: Vec<NodeReferences>,
    pub dry_target: TimeSignal,
    pub dry_noise: TimeSignal,
}

/// One row of the evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scene_id: String,
    /// Counted from 1.
    pub node: usize,
    pub step: u8,
    pub input_sir_cnv: f64,
    pub output_sir_cnv: f64,
    pub delta_sir_cnv: f64,
    pub sar_cnv: f64,
    pub sar_dry: f64,
}

fn delayed(x: &[f64], delay: f64, len: usize) -> Vec<f64> {
    let shift = delay.round().max(0.0) as usize;
    (0..len).map(|i| if i >= shift && i - shift < x.len() { x[i - shift] } else { 0.0 }).collect()
}

/// Scores the outputs of every node. `outputs[k]` holds the step-1 and
/// step-2 waveforms of node `k`.
pub fn scene_metrics(
    refs: &SceneReferences,
    outputs: &[[TimeSignal; 2]],
    filter_len: usize,
) -> Result<Vec<EvalRow>> {
    if outputs.len() != refs.nodes.len() {
        return Err(Error::Pairing(format!(
            "scene {}: {} node outputs for {} nodes",
            refs.scene_id,
            outputs.len(),
            refs.nodes.len()
        )));
    }
    let mut rows = Vec::with_capacity(2 * outputs.len());
    for (k, (node, outs)) in refs.nodes.iter().zip(outputs).enumerate() {
        let len = node.speech_image.len();
        let cnv = BssProjector::new(node.speech_image.samples(), node.noise_image.samples(), filter_len)?;
        let dry = BssProjector::new(
            &delayed(refs.dry_target.samples(), node.direct_delay.0, len),
            &delayed(refs.dry_noise.samples(), node.direct_delay.1, len),
            filter_len,
        )?;
        let input = cnv.sir_sar(node.mixture.samples())?;
        for (step, out) in outs.iter().enumerate() {
            let m = cnv.sir_sar(out.samples())?;
            let d = dry.sir_sar(out.samples())?;
            rows.push(EvalRow {
                scene_id: refs.scene_id.clone(),
                node: k + 1,
                step: step as u8 + 1,
                input_sir_cnv: input.sir_db,
                output_sir_cnv: m.sir_db,
                delta_sir_cnv: m.sir_db - input.sir_db,
                sar_cnv: m.sar_db,
                sar_dry: d.sar_db,
            });
        }
    }
    Ok(rows)
}

/// Which node(s) of each scene enter an aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    BestOutput,
    BestInput,
    WorstInput,
    PerNode,
}

impl Selector {
    pub const ALL: [Selector; 4] = [Selector::BestOutput, Selector::BestInput, Selector::WorstInput, Selector::PerNode];

    pub fn short(self) -> &'static str {
        match self {
            Selector::BestOutput => "bo",
            Selector::BestInput => "bi",
            Selector::WorstInput => "wi",
            Selector::PerNode => "all",
        }
    }
}

/// Rows of `step` chosen by `selector`, one per scene except for
/// [`Selector::PerNode`]. Ties go to the lowest node index.
pub fn select(rows: &[EvalRow], step: u8, selector: Selector) -> Vec<&EvalRow> {
    let mut by_scene: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.step == step) {
        by_scene.entry(&r.scene_id).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, mut nodes) in by_scene {
        nodes.sort_by_key(|r| r.node);
        let pick = |key: fn(&EvalRow) -> f64, max: bool| {
            let mut best = nodes[0];
            for r in &nodes[1..] {
                let better = if max { key(r) > key(best) } else { key(r) < key(best) };
                if better {
                    best = r;
                }
            }
            best
        };
        match selector {
            Selector::BestOutput => out.push(pick(|r| r.output_sir_cnv, true)),
            Selector::BestInput => out.push(pick(|r| r.input_sir_cnv, true)),
            Selector::WorstInput => out.push(pick(|r| r.input_sir_cnv, false)),
            Selector::PerNode => out.extend(nodes),
        }
    }
    out
}

/// Mean and half-width of the 95 % normal-approximation interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Interval {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                half_width: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        };
        Self { mean, half_width, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub input_sir_cnv: Interval,
    pub output_sir_cnv: Interval,
    pub delta_sir_cnv: Interval,
    pub sar_cnv: Interval,
    pub sar_dry: Interval,
}

pub fn aggregate(rows: &[EvalRow], step: u8, selector: Selector) -> MetricSummary {
    let chosen = select(rows, step, selector);
    let col = |f: fn(&EvalRow) -> f64| Interval::of(&chosen.iter().map(|r| f(r)).collect::<Vec<_>>());
    MetricSummary {
        input_sir_cnv: col(|r| r.input_sir_cnv),
        output_sir_cnv: col(|r| r.output_sir_cnv),
        delta_sir_cnv: col(|r| r.delta_sir_cnv),
        sar_cnv: col(|r| r.sar_cnv),
        sar_dry: col(|r| r.sar_dry),
    }
}

/// Summary for every step present and every selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_scenes: usize,
    /// Keyed by `step<k>`, then by selector.
    pub steps: BTreeMap<String, BTreeMap<Selector, MetricSummary>>,
}

pub fn summarize(rows: &[EvalRow]) -> CorpusSummary {
    let mut steps_present: Vec<u8> = rows.iter().map(|r| r.step).collect();
    steps_present.sort_unstable();
    steps_present.dedup();
    let mut scenes: Vec<&str> = rows.iter().map(|r| r.scene_id.as_str()).collect();
    scenes.sort_unstable();
    scenes.dedup();
    let steps = steps_present
        .into_iter()
        .map(|s| {
            let per = Selector::ALL.iter().map(|&sel| (sel, aggregate(rows, s, sel))).collect();
            (format!("step{s}"), per)
        })
        .collect();
    CorpusSummary {
        n_scenes: scenes.len(),
        steps,
    }
}

/// Text table with one row per (run label, selector): ΔSIR_cnv, SAR_cnv and
/// SAR_dry for each step, as `mean ± half-width`.
pub fn format_table(runs: &[(String, Vec<EvalRow>)], selectors: &[Selector]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<4} {:>5}  {:>16} {:>16} {:>16}",
        "run", "sel", "step", "dSIR_cnv", "SAR_cnv", "SAR_dry"
    );
    for (label, rows) in runs {
        let mut steps: Vec<u8> = rows.iter().map(|r| r.step).collect();
        steps.sort_unstable();
        steps.dedup();
        for &sel in selectors {
            for &step in &steps {
                let s = aggregate(rows, step, sel);
                let f = |i: Interval| format!("{:.2} ± {:.2}", i.mean, i.half_width);
                let _ = writeln!(
                    out,
                    "{:<12} {:<4} {:>5}  {:>16} {:>16} {:>16}",
                    label,
                    sel.short(),
                    step,
                    f(s.delta_sir_cnv),
                    f(s.sar_cnv),
                    f(s.sar_dry)
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn packed_correlations_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = white(&mut rng, 300);
        let n = white(&mut rng, 300);
        let e = white(&mut rng, 280);
        let sp = ReferenceSpectra::new(&s, &n, 7);
        let auto: Vec<Complex<f64>> = sp.target.iter().map(|v| Complex::new(v.norm_sqr(), 0.0)).collect();
        let cross: Vec<Complex<f64>> = sp.target.iter().zip(&sp.interferer).map(|(a, b)| a.conj() * b).collect();
        let (r_ss, r_sn) = sp.correlate_pair(auto, &cross, 7);
        let direct = |a: &[f64], b: &[f64], lag: isize| -> f64 {
            (0..a.len() as isize)
                .filter(|m| (0..b.len() as isize).contains(&(m + lag)))
                .map(|m| a[m as usize] * b[(m + lag) as usize])
                .sum()
        };
        for (k, lag) in (-7isize..=7).enumerate() {
            assert!((r_ss[k] - direct(&s, &s, lag)).abs() < 1e-9);
            assert!((r_sn[k] - direct(&s, &n, lag)).abs() < 1e-9);
        }
        let mut fe: Vec<Complex<f64>> = (0..sp.fft_len).map(|k| Complex::new(e.get(k).copied().unwrap_or(0.0), 0.0)).collect();
        sp.forward.process(&mut fe);
        let xn: Vec<Complex<f64>> = sp.interferer.iter().zip(&fe).map(|(a, b)| a.conj() * b).collect();
        let zero = vec![Complex::new(0.0, 0.0); sp.fft_len];
        let (c_ne, _) = sp.correlate_pair(xn, &zero, 7);
        for (k, lag) in (-7isize..=7).enumerate() {
            assert!((c_ne[k] - direct(&n, &e, lag)).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_is_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = white(&mut rng, 2000);
        let n = white(&mut rng, 2000);
        let m = bss_eval(&s, &s, &n, 16).unwrap();
        assert_eq!(m.sir_db, METRIC_CAP_DB);
        assert_eq!(m.sar_db, METRIC_CAP_DB);
        let half: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
        let h = bss_eval(&half, &s, &n, 16).unwrap();
        assert_eq!(h.sir_db, METRIC_CAP_DB);
        assert_eq!(h.sar_db, METRIC_CAP_DB);
    }

    /// With one tap the projections reduce to ordinary least squares onto
    /// two vectors, solved here by the 2×2 normal equations.
    #[test]
    fn single_tap_matches_direct_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = white(&mut rng, 4000);
        let n = white(&mut rng, 4000);
        let scale = (energy(&s) / energy(&n)).sqrt();
        let n: Vec<f64> = n.iter().map(|v| v * scale).collect();
        let art = white(&mut rng, 4000);
        let est: Vec<f64> = (0..4000).map(|i| s[i] + n[i] + 0.1 * art[i]).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (ss, nn, sn) = (dot(&s, &s), dot(&n, &n), dot(&s, &n));
        let (se, ne) = (dot(&s, &est), dot(&n, &est));
        let det = ss * nn - sn * sn;
        let (a, b) = ((nn * se - sn * ne) / det, (ss * ne - sn * se) / det);
        let p_all = a * se + b * ne;
        let p_target = se * se / ss;
        let want_sir = 10.0 * (p_target / (p_all - p_target)).log10();
        let want_sar = 10.0 * (p_all / (dot(&est, &est) - p_all)).log10();
        let m = bss_eval(&est, &s, &n, 1).unwrap();
        assert!((m.sir_db - want_sir).abs() < 1e-6);
        assert!((m.sar_db - want_sar).abs() < 1e-6);
        assert!(m.sir_db.abs() < 0.2);
    }

    #[test]
    fn decomposition_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = white(&mut rng, 1500);
        let n = white(&mut rng, 1500);
        let art = white(&mut rng, 1500);
        let est: Vec<f64> = (0..1500).map(|i| 0.8 * s[i] + 0.3 * n[i] + 0.2 * art[i]).collect();
        let p = BssProjector::new(&s, &n, 32).unwrap();
        let d = p.decompose(&est).unwrap();
        let total = energy(&est);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!(dot(&d.s_target, &d.e_interf).abs() <= 1e-6 * total);
        assert!(dot(&d.s_target, &d.e_artif).abs() <= 1e-6 * total);
        assert!(dot(&d.e_interf, &d.e_artif).abs() <= 1e-6 * total);
        let sum = energy(&d.s_target) + energy(&d.e_interf) + energy(&d.e_artif);
        assert!((sum - total).abs() <= 1e-6 * total);
        let m = p.sir_sar(&est).unwrap();
        assert!((m.sir_db - db_ratio(energy(&d.s_target), energy(&d.e_interf))).abs() < 1e-6);
    }

    #[test]
    fn zero_estimate_is_degenerate() {
        let s = vec![1.0, 0.0, 2.0, 1.0];
        let n = vec![0.0, 1.0, 0.5, -1.0];
        assert!(matches!(bss_eval(&[0.0; 4], &s, &n, 1), Err(Error::DegenerateInput(_))));
        assert!(matches!(bss_eval(&s, &[0.0; 4], &n, 1), Err(Error::DegenerateInput(_))));
    }

    fn row(scene: &str, node: usize, step: u8, input: f64, output: f64) -> EvalRow {
        EvalRow {
            scene_id: scene.into(),
            node,
            step,
            input_sir_cnv: input,
            output_sir_cnv: output,
            delta_sir_cnv: output - input,
            sar_cnv: 10.0,
            sar_dry: 5.0,
        }
    }

    #[test]
    fn selectors() {
        let rows = vec![
            row("a", 1, 2, 0.0, 10.0),
            row("a", 2, 2, 5.0, 12.0),
            row("a", 3, 2, -3.0, 15.0),
            row("b", 1, 2, 2.0, 8.0),
            row("b", 2, 2, 2.0, 8.0),
        ];
        let pick = |sel| select(&rows, 2, sel).iter().map(|r| (r.scene_id.clone(), r.node)).collect::<Vec<_>>();
        assert_eq!(pick(Selector::BestOutput), vec![("a".into(), 3), ("b".into(), 1)]);
        assert_eq!(pick(Selector::BestInput), vec![("a".into(), 2), ("b".into(), 1)]);
        assert_eq!(pick(Selector::WorstInput), vec![("a".into(), 3), ("b".into(), 1)]);
        assert_eq!(select(&rows, 2, Selector::PerNode).len(), 5);
        assert!(select(&rows, 1, Selector::PerNode).is_empty());
    }

    #[test]
    fn duplicated_scene_has_zero_width() {
        let rows: Vec<_> = (0..10).map(|i| row(&format!("s{i}"), 1, 1, 1.0, 4.0)).collect();
        let s = aggregate(&rows, 1, Selector::BestOutput);
        assert_eq!(s.delta_sir_cnv.mean, 3.0);
        assert_eq!(s.delta_sir_cnv.half_width, 0.0);
        assert_eq!(s.delta_sir_cnv.n, 10);
    }

    #[test]
    fn interval_matches_formula() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let i = Interval::of(&v);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((i.half_width - 1.96 * sd / 2.0).abs() < 1e-12);
        assert_eq!(Interval::of(&[7.0]).half_width, 0.0);
    }

    #[test]
    fn table_layout() {
        let rows = vec![row("a", 1, 1, 0.0, 3.0), row("a", 1, 2, 0.0, 5.0)];
        let t = format_table(&[("SN".into(), rows.clone()), ("MN".into(), rows)], &[Selector::BestInput, Selector::WorstInput]);
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 2 * 2);
        assert!(lines[1].starts_with("SN") && lines[1].contains("bi"));
        assert!(lines[8].starts_with("MN") && lines[8].contains("wi"));
    }

    #[test]
    fn identity_enhancement_has_zero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = white(&mut rng, 3000);
        let n = white(&mut rng, 3000);
        let y: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + 0.7 * b).collect();
        let sig = |v: Vec<f64>| TimeSignal::at_pipeline_rate(v).unwrap();
        let n7: Vec<f64> = n.iter().map(|v| 0.7 * v).collect();
        let refs = SceneReferences {
            scene_id: "x".into(),
            nodes: vec![NodeReferences {
                speech_image: sig(s.clone()),
                noise_image: sig(n7.clone()),
                mixture: sig(y.clone()),
                direct_delay: (0.0, 0.0),
            }],
            dry_target: sig(s),
            dry_noise: sig(n7),
        };
        let rows = scene_metrics(&refs, &[[sig(y.clone()), sig(y)]], 64).unwrap();
        for r in &rows {
            assert!(r.delta_sir_cnv.abs() < 0.1);
            assert_eq!(r.delta_sir_cnv, r.output_sir_cnv - r.input_sir_cnv);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn attenuating_noise_raises_sir(seed in any::<u64>(), g in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = white(&mut rng, 1200);
            let n = white(&mut rng, 1200);
            let p = BssProjector::new(&s, &n, 8).unwrap();
            let a: Vec<f64> = s.iter().zip(&n).map(|(x, y)| x + y).collect();
            let b: Vec<f64> = s.iter().zip(&n).map(|(x, y)| x + g * y).collect();
            prop_assert!(p.sir_sar(&b).unwrap().sir_db > p.sir_sar(&a).unwrap().sir_db);
        }

        #[test]
        fn common_scaling_keeps_best_output(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = white(&mut rng, 1000);
            let n = white(&mut rng, 1000);
            let p = BssProjector::new(&s, &n, 4).unwrap();
            let outs: Vec<Vec<f64>> = (0..4).map(|k| {
                let art = white(&mut rng, 1000);
                (0..1000).map(|i| s[i] + (0.2 + 0.2 * k as f64) * n[i] + 0.05 * art[i]).collect()
            }).collect();
            let rows = |scale: f64| -> Vec<EvalRow> {
                outs.iter().enumerate().map(|(k, o)| {
                    let o: Vec<f64> = o.iter().map(|v| v * scale).collect();
                    row("s", k + 1, 2, 0.0, p.sir_sar(&o).unwrap().sir_db)
                }).collect()
            };
            let a = rows(1.0);
            let b = rows(c);
            prop_assert_eq!(select(&a, 2, Selector::BestOutput)[0].node, select(&b, 2, Selector::BestOutput)[0].node);
        }
    }
}

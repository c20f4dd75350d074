//! Limited-memory quasi-Newton minimizer with backtracking line search and
//! a windowed relative-change stopping rule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop when the best-so-far loss changed by less than
    /// `convergence_rel_change` (relative) over this many iterations.
    pub convergence_window: usize,
    pub convergence_rel_change: f64,
    /// Number of curvature pairs kept for the inverse-Hessian estimate.
    pub history_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500,
            convergence_window: 50,
            convergence_rel_change: 1e-4,
            history_size: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.convergence_window == 0 {
            return Err(Error::Config("convergence window must be >= 1".into()));
        }
        if self.convergence_rel_change <= 0.0 {
            return Err(Error::Config("convergence threshold must be > 0".into()));
        }
        Ok(())
    }
}

/// Differentiable objective over a flat parameter vector.
pub trait Energy {
    fn loss(&self, x: &[f64]) -> Result<f64>;
    fn loss_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// No descent step representable; the iterate is at numerical rest.
    LineSearchExhausted,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub trace: Vec<TracePoint>,
    pub reason: StopReason,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_finite(f: f64, g: &[f64], what: &str) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss in {what}: {f}")));
    }
    if let Some(v) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient in {what}: {v}")));
    }
    Ok(())
}

/// Two-loop recursion: approximate `-H g` from the stored curvature pairs.
fn search_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let sy = dot(s, y);
        let yy = dot(y, y);
        if yy > 0.0 {
            let scale = sy / yy;
            for qi in q.iter_mut() {
                *qi *= scale;
            }
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Minimize `energy` starting from `x0`.
///
/// Accepted losses are non-increasing (Armijo backtracking). The run stops
/// when the windowed best loss stalls, at the iteration cap, or when no
/// representable step decreases the loss.
pub fn minimize(energy: &dyn Energy, x0: &[f64], cfg: &SolverConfig) -> Result<MinimizeResult> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    let (mut f, mut g) = energy.loss_grad(&x)?;
    check_finite(f, &g, "initial point")?;

    let mut trace = vec![TracePoint {
        iteration: 0,
        loss: f,
        grad_norm: norm2(&g),
    }];
    let mut best = f;
    let mut best_history = vec![best];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut reason = StopReason::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        if norm_inf(&g) < 1e-15 {
            reason = StopReason::Converged;
            break;
        }
        let mut dir = search_direction(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // Not a descent direction: fall back to steepest descent.
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        let mut t = if history.is_empty() {
            1.0 / norm_inf(&dir).max(1.0)
        } else {
            1.0
        };

        let mut accepted: Option<(Vec<f64>, f64, Option<Vec<f64>>)> = None;
        for bt in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            // First trial is usually accepted: evaluate with gradient so
            // acceptance needs no second pass.
            let (f_trial, g_trial) = if bt == 0 {
                let (ft, gt) = energy.loss_grad(&trial)?;
                (ft, Some(gt))
            } else {
                (energy.loss(&trial)?, None)
            };
            if f_trial.is_finite() && f_trial <= f + ARMIJO_C1 * t * slope {
                accepted = Some((trial, f_trial, g_trial));
                break;
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, g_cached)) = accepted else {
            reason = StopReason::LineSearchExhausted;
            break;
        };
        let g_new = match g_cached {
            Some(g) => g,
            None => energy.loss_grad(&x_new)?.1,
        };
        check_finite(f_new, &g_new, &format!("iteration {iteration}"))?;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if history.len() == cfg.history_size {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        x = x_new;
        f = f_new;
        g = g_new;
        best = best.min(f);
        trace.push(TracePoint {
            iteration,
            loss: f,
            grad_norm: norm2(&g),
        });
        best_history.push(best);

        if iteration >= cfg.convergence_window {
            let before = best_history[iteration - cfg.convergence_window];
            let change = before - best;
            if change < cfg.convergence_rel_change * before.abs().max(f64::MIN_POSITIVE) {
                reason = StopReason::Converged;
                break;
            }
        }
    }

    Ok(MinimizeResult {
        x,
        loss: f,
        trace,
        reason,
    })
}

/// Render a trace as the CSV emitted next to stylized frames.
pub fn trace_to_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("iteration,loss,grad_norm\n");
    for p in trace {
        out.push_str(&format!("{},{},{}\n", p.iteration, p.loss, p.grad_norm));
    }
    out
}

//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    /// Steps shorter than this end the integration.
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

/// Why an integration stopped before the requested end time.
#[derive(Clone, Debug, PartialEq)]
pub enum Halt {
    /// The right-hand side was undefined however small the step.
    Undefined { t: f64 },
    /// The stop predicate fired after an accepted step.
    Event { t: f64 },
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub rejected: usize,
    pub halt: Option<Halt>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end`. `f` returns `None` where
/// it is undefined; such trial steps are rejected and shortened, and the
/// run halts once the step falls below `min_step`.
pub fn dopri5<F>(f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64]) -> Option<Vec<f64>>,
{
    dopri5_until(f, |_, _| false, t0, y0, t_end, opts)
}

/// As [`dopri5`], stopping after the first accepted step where `stop` holds.
pub fn dopri5_until<F, S>(f: F, stop: S, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64]) -> Option<Vec<f64>>,
    S: Fn(f64, &[f64]) -> bool,
{
    if !(t_end >= t0) {
        return Err(Error::param("t_end", "must not precede the start time"));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.initial_step > 0.0) {
        return Err(Error::param("ode options", "tolerances and initial step must be positive"));
    }
    let n = y0.len();
    let mut sol = OdeSolution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        rejected: 0,
        halt: None,
    };
    let Some(mut k0) = f(t0, y0) else {
        sol.halt = Some(Halt::Undefined { t: t0 });
        return Ok(sol);
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.initial_step.min(opts.max_step);
    let mut steps = 0;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::NoConvergence {
                method: "dopri5",
                iterations: steps,
                residual: t_end - t,
            });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        match trial(&f, t, &y, &k0, h) {
            Some((y5, k7, err)) => {
                let scaled = (0..n)
                    .map(|i| {
                        let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                        (err[i] / sc).powi(2)
                    })
                    .sum::<f64>();
                let e = (scaled / n.max(1) as f64).sqrt();
                if e <= 1.0 {
                    t = if last { t_end } else { t + h };
                    y = y5;
                    k0 = k7;
                    sol.t.push(t);
                    sol.y.push(y.clone());
                    if stop(t, &y) {
                        sol.halt = Some(Halt::Event { t });
                        break;
                    }
                    let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (h * grow).min(opts.max_step);
                } else {
                    sol.rejected += 1;
                    h *= (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
            None => {
                sol.rejected += 1;
                h *= 0.25;
            }
        }
        if h < opts.min_step && t < t_end {
            sol.halt = Some(Halt::Undefined { t });
            break;
        }
    }
    Ok(sol)
}

type Trial = (Vec<f64>, Vec<f64>, Vec<f64>);

fn trial<F>(f: &F, t: f64, y: &[f64], k0: &[f64], h: f64) -> Option<Trial>
where
    F: Fn(f64, &[f64]) -> Option<Vec<f64>>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k0.to_vec());
    for s in 1..7 {
        let ys: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
            .collect();
        let ks = f(t + C[s] * h, &ys)?;
        if ks.iter().any(|v| !v.is_finite()) {
            return None;
        }
        k.push(ks);
    }
    let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B[s] * k[s][i]).sum::<f64>()).collect();
    let err: Vec<f64> = (0..n).map(|i| h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>()).collect();
    Some((y5, k.pop().expect("seven stages"), err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sol = dopri5(|_, y| Some(vec![-2.0 * y[0]]), 0.0, &[1.0], 3.0, &OdeOptions::default()).unwrap();
        let end = *sol.y.last().unwrap().first().unwrap();
        assert_eq!(*sol.t.last().unwrap(), 3.0);
        assert!((end - (-6.0f64).exp()).abs() < 1e-11, "{end}");
        assert!(sol.halt.is_none());
    }

    #[test]
    fn oscillator_conserves_energy() {
        let sol = dopri5(|_, y| Some(vec![y[1], -y[0]]), 0.0, &[1.0, 0.0], 20.0, &OdeOptions::default()).unwrap();
        let y = sol.y.last().unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn undefined_region_halts() {
        let rhs = |t: f64, _: &[f64]| (t < 1.0).then(|| vec![1.0]);
        let sol = dopri5(rhs, 0.0, &[0.0], 5.0, &OdeOptions::default()).unwrap();
        let Some(Halt::Undefined { t }) = sol.halt else {
            panic!("expected a halt")
        };
        assert!((t - 1.0).abs() < 1e-6, "{t}");
    }

    #[test]
    fn stop_predicate_fires_near_square_root_edge() {
        // y' = sqrt(1 - y) reaches y = 1 at t = 2.
        let rhs = |_: f64, y: &[f64]| (y[0] <= 1.0).then(|| vec![(1.0 - y[0]).sqrt()]);
        let sol = dopri5_until(rhs, |_, y| y[0] > 1.0 - 1e-8, 0.0, &[0.0], 5.0, &OdeOptions::default()).unwrap();
        let Some(Halt::Event { t }) = sol.halt else {
            panic!("expected an event, got {:?}", sol.halt)
        };
        assert!((t - 2.0).abs() < 1e-3, "{t}");
    }

    #[test]
    fn rejects_reversed_interval() {
        assert!(dopri5(|_, y| Some(y.to_vec()), 1.0, &[1.0], 0.0, &OdeOptions::default()).is_err());
    }
}

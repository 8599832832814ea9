use crate::error::Result;

/// Result of the outcome/propensity weighting search.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSearch {
    pub best: f64,
    pub best_score: f64,
    /// Every `(alpha, score)` evaluated, in order.
    pub visited: Vec<(f64, f64)>,
}

const EXTREME: f64 = 1e-6;

fn tidy(a: f64) -> f64 {
    (a * 1e12).round() / 1e12
}

/// Next value when moving up: 0.1 steps to 0.9, then 0.99, 0.999, ...
pub fn step_up(alpha: f64) -> f64 {
    if alpha < 0.9 - 1e-9 {
        tidy(((alpha + 0.1) * 10.0).round() / 10.0)
    } else {
        tidy(1.0 - (1.0 - alpha) / 10.0)
    }
}

/// Next value when moving down: 0.1 steps to 0.1, then 0.01, 0.001, ...
pub fn step_down(alpha: f64) -> f64 {
    if alpha > 0.1 + 1e-9 {
        tidy(((alpha - 0.1) * 10.0).round() / 10.0)
    } else {
        tidy(alpha / 10.0)
    }
}

/// Greedy search over the outcome-loss weight, lower scores being better.
///
/// Starts at 0.5, probes one step in each direction, then keeps stepping the
/// better improving direction until a step fails to improve. Returns 0.5 when
/// neither neighbour beats it.
pub fn coefficient_search(mut score: impl FnMut(f64) -> Result<f64>) -> Result<AlphaSearch> {
    let start = 0.5;
    let s0 = score(start)?;
    let mut visited = vec![(start, s0)];
    let (up, down) = (step_up(start), step_down(start));
    let s_up = score(up)?;
    visited.push((up, s_up));
    let s_down = score(down)?;
    visited.push((down, s_down));

    let (mut best, dir_up) = if s_up < s0 && s_up <= s_down {
        ((up, s_up), true)
    } else if s_down < s0 {
        ((down, s_down), false)
    } else {
        return Ok(AlphaSearch {
            best: start,
            best_score: s0,
            visited,
        });
    };

    loop {
        let next = if dir_up { step_up(best.0) } else { step_down(best.0) };
        if next <= EXTREME || next >= 1.0 - EXTREME {
            break;
        }
        let s = score(next)?;
        visited.push((next, s));
        if s < best.1 {
            best = (next, s);
        } else {
            break;
        }
    }
    Ok(AlphaSearch {
        best: best.0,
        best_score: best.1,
        visited,
    })
}

use rand::seq::index;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{shape, Result};
use crate::rng;

/// Magnitude floor in the relative-error denominator, so coordinates with a
/// vanishing gradient are judged on absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares reverse-mode gradients of a scalar graph with central
/// differences, all in double precision.
///
/// `graph` receives a fresh tape and one leaf per entry of `inputs` and must
/// return a scalar node. Up to `max_coords` coordinates per input are probed
/// (all of them when the input is smaller). Returns the largest relative
/// error seen.
pub fn grad_check<F>(graph: F, inputs: &[Tensor<f64>], epsilon: f64, max_coords: usize, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor<f64>]| -> Result<(Tape<f64>, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = graph(&mut tape, &vars)?;
        if tape.value(out).len() != 1 {
            return shape("grad_check needs a scalar graph output");
        }
        Ok((tape, vars, out))
    };
    let (tape, vars, out) = eval(inputs)?;
    let grads = tape.backward(out)?;
    let mut worst = 0.0f64;
    let mut r = rng::rng_for(seed, &[0x6C4E]);
    let mut work = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let n = inputs[i].len();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            index::sample(&mut r, n, max_coords).into_vec()
        };
        let zero = Tensor::zeros(inputs[i].shape());
        let analytic = grads.get(*var).unwrap_or(&zero);
        for c in coords {
            let orig = work[i].data()[c];
            work[i].data_mut()[c] = orig + epsilon;
            let (tp, _, op) = eval(&work)?;
            let fp = tp.value(op).item();
            work[i].data_mut()[c] = orig - epsilon;
            let (tm, _, om) = eval(&work)?;
            let fm = tm.value(om).item();
            work[i].data_mut()[c] = orig;
            let numeric = (fp - fm) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.data()[c], numeric));
        }
    }
    Ok(worst)
}

use super::{Gradients, Params};
use crate::error::Result;

/// Largest relative error between the analytic gradient of `f` and a
/// central difference with step `h`, over every entry of every parameter.
/// The denominator is floored at `1e-6` so exact zeros compare absolutely.
pub fn max_fd_rel_error(params: &Params, h: f64, f: impl Fn(&Params) -> Result<(f64, Gradients)>) -> Result<f64> {
    let (_, grads) = f(params)?;
    let mut worst: f64 = 0.0;
    let mut work = params.clone();
    for id in params.ids() {
        let ana = grads.dense(id, params);
        for i in 0..params.get(id).len() {
            let orig = work.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + h;
            let up = f(&work)?.0;
            work.get_mut(id).data_mut()[i] = orig - h;
            let down = f(&work)?.0;
            work.get_mut(id).data_mut()[i] = orig;
            let num = (up - down) / (2.0 * h);
            let a = ana.data()[i];
            worst = worst.max((num - a).abs() / num.abs().max(a.abs()).max(1e-6));
        }
    }
    Ok(worst)
}

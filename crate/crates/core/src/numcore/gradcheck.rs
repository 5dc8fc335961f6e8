use super::{NodeId, NumError, Tape, Tensor};

/// Compares reverse-mode gradients of `build` against central finite
/// differences with step `h`, returning the largest relative error over
/// every parameter entry. The relative error of an entry is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// `build` receives a fresh tape and the leaf ids of `params` (in order) and
/// must return the scalar loss node.
pub fn finite_diff_check<F>(build: F, params: &[Tensor], h: f64) -> Result<f64, NumError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, NumError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let eval = |values: &[Tensor]| -> Result<f64, NumError> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|v| tape.param(v.clone())).collect();
        let loss = build(&mut tape, &ids)?;
        tape.scalar(loss)
    };

    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|v| tape.param(v.clone())).collect();
    let loss = build(&mut tape, &ids)?;
    let grads = tape.backward(loss)?;

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, id) in ids.iter().enumerate() {
        let analytic = grads.get(*id).expect("every param has a gradient");
        for j in 0..params[pi].len() {
            let orig = params[pi].data()[j];
            work[pi].data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work[pi].data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.data()[j];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

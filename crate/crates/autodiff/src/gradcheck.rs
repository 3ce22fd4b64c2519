//! Central finite-difference checks of analytic gradients.

use crate::graph::{BoundParams, Graph, Var};
use crate::{AutodiffError, ParamSet, Tensor};

/// Finite-difference step used by every check.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so components whose true
/// gradient is ~0 are judged on absolute error at this scale.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor name, flat index)` of the worst component.
    pub worst: Option<(String, usize)>,
    pub tolerance: f64,
    pub passed: bool,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` (aligned with `params`) against central differences
/// of `value` at step [`FD_STEP`].
pub fn check_gradients(
    params: &ParamSet,
    analytic: &[Tensor],
    tol: f64,
    mut value: impl FnMut(&ParamSet) -> f64,
) -> GradCheckReport {
    let base = params.flatten();
    let flat_analytic: Vec<f64> = analytic.iter().flat_map(|t| t.data().iter().copied()).collect();
    assert_eq!(flat_analytic.len(), base.len(), "analytic gradient misaligned with params");

    let mut names = Vec::with_capacity(base.len());
    for (name, t) in params.iter() {
        for i in 0..t.len() {
            names.push((name, i));
        }
    }

    let mut probe = params.clone();
    let mut shifted = base.clone();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    for k in 0..base.len() {
        shifted[k] = base[k] + FD_STEP;
        probe.set_flat(&shifted).expect("same size");
        let plus = value(&probe);
        shifted[k] = base[k] - FD_STEP;
        probe.set_flat(&shifted).expect("same size");
        let minus = value(&probe);
        shifted[k] = base[k];

        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = relative_error(flat_analytic[k], numeric);
        if !(err <= max_rel_error) {
            max_rel_error = err;
            worst = Some((names[k].0.to_string(), names[k].1));
        }
    }
    GradCheckReport {
        max_rel_error,
        worst,
        tolerance: tol,
        passed: max_rel_error < tol,
        checked: base.len(),
    }
}

/// Checks the graph-computed gradient of the scalar built by `build`.
pub fn grad_check<F>(params: &ParamSet, tol: f64, build: F) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Graph, &BoundParams) -> Var,
{
    let mut graph = Graph::new();
    let bound = graph.bind(params);
    let loss = build(&mut graph, &bound);
    let analytic = graph.backward(loss)?.for_params(&bound);
    Ok(check_gradients(params, &analytic, tol, |p| {
        let mut g = Graph::new();
        let b = g.bind(p);
        let l = build(&mut g, &b);
        g.value(l).data()[0]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Activation, Mlp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_passes_tight_tolerance() {
        let mut params = ParamSet::new();
        params.add("x", Tensor::row_vector(vec![0.3, -1.2, 2.5]));
        let report = grad_check(&params, 1e-6, |g, b| {
            let s = g.square(b.var(0));
            g.sum(s)
        })
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn corrupted_backward_rule_fails() {
        let mut params = ParamSet::new();
        params.add("x", Tensor::row_vector(vec![0.3, -1.2, 2.5]));
        let value = |p: &ParamSet| p.flatten().iter().map(|v| v * v).sum::<f64>();
        // d/dx x² reported as x instead of 2x
        let wrong = vec![params.get(crate::ParamId(0)).clone()];
        let report = check_gradients(&params, &wrong, 1e-4, value);
        assert!(!report.passed);
        assert!(report.max_rel_error > 0.4);
    }

    #[test]
    fn mlp_softmax_kl_composite_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let mlp = Mlp::new(&mut params, "q", &[4, 6, 3], Activation::Relu, &mut rng);
        let input = Tensor::from_vec(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let prior = [0.1, 0.3, 0.6];
        let reference = Tensor::from_vec(5, 3, vec![0.2, 0.3, 0.5].repeat(5)).unwrap();
        let report = grad_check(&params, 1e-4, |g, b| {
            let x = g.leaf(input.clone());
            let q = mlp.forward(g, b, x).unwrap();
            let q = g.scale(q, 1.0 / 0.5);
            // KL(reference || prior-weighted softmax) plus the soft backup term
            let p = g.weighted_softmax(q, &prior);
            let logp = g.log(p);
            let r = g.leaf(reference.clone());
            let cross = g.mul(r, logp);
            let cross = g.sum(cross);
            let lse = g.weighted_log_sum_exp(q, &prior);
            let lse = g.mean(lse);
            let neg = g.scale(cross, -1.0);
            g.add(neg, lse)
        })
        .unwrap();
        assert!(report.passed, "{report:?}");
    }
}

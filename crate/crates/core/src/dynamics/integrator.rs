//! Fixed-step fourth-order Runge-Kutta-Gill integration.

use std::f64::consts::FRAC_1_SQRT_2;

const GILL_A: f64 = FRAC_1_SQRT_2 - 0.5; // -1/2 + 1/sqrt(2)
const GILL_B: f64 = 1.0 - FRAC_1_SQRT_2;
const GILL_C: f64 = -FRAC_1_SQRT_2;
const GILL_D: f64 = 1.0 + FRAC_1_SQRT_2;

/// Advances `y` from `t` to `t + dt` with one Runge-Kutta-Gill step.
///
/// `rhs(t, y)` returns `dy/dt`. Errors from the right-hand side are passed
/// through unchanged.
pub fn rkg4_step<const N: usize, E, F>(y: &[f64; N], t: f64, dt: f64, mut rhs: F) -> Result<[f64; N], E>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let half = 0.5 * dt;

    let k1 = scale(rhs(t, y)?, dt);
    let y1 = combine(y, &[(0.5, &k1)]);
    let k2 = scale(rhs(t + half, &y1)?, dt);
    let y2 = combine(y, &[(GILL_A, &k1), (GILL_B, &k2)]);
    let k3 = scale(rhs(t + half, &y2)?, dt);
    let y3 = combine(y, &[(GILL_C, &k2), (GILL_D, &k3)]);
    let k4 = scale(rhs(t + dt, &y3)?, dt);

    let mut out = *y;
    for i in 0..N {
        out[i] += (k1[i] + 2.0 * GILL_B * k2[i] + 2.0 * GILL_D * k3[i] + k4[i]) / 6.0;
    }
    Ok(out)
}

#[inline]
fn scale<const N: usize>(mut v: [f64; N], h: f64) -> [f64; N] {
    v.iter_mut().for_each(|c| *c *= h);
    v
}

#[inline]
fn combine<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (w, k) in terms {
        for i in 0..N {
            out[i] += w * k[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn decay(_: f64, y: &[f64; 1]) -> Result<[f64; 1], Infallible> {
        Ok([-y[0]])
    }

    fn integrate(dt: f64, t_end: f64) -> f64 {
        let steps = (t_end / dt).round() as usize;
        let mut y = [1.0];
        for k in 0..steps {
            y = rkg4_step(&y, k as f64 * dt, dt, decay).unwrap();
        }
        y[0]
    }

    #[test]
    fn single_step_matches_fourth_order_taylor() {
        let h: f64 = 0.01;
        let y = rkg4_step(&[1.0], 0.0, h, decay).unwrap()[0];
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((y - taylor).abs() < 1e-15);
        assert!((y - 0.990_049_834).abs() < 1e-9);
        assert!((y - (-h).exp()).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_is_preserved_exactly() {
        let y = [0.25, -3.0, 7.5];
        let out = rkg4_step(&y, 0.0, 0.1, |_, _| Ok::<_, Infallible>([0.0; 3])).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn halving_the_step_cuts_the_error_sixteenfold() {
        let exact = (-1.0f64).exp();
        let e1 = (integrate(0.02, 1.0) - exact).abs();
        let e2 = (integrate(0.01, 1.0) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn time_argument_reaches_stage_points() {
        let mut seen = Vec::new();
        rkg4_step(&[0.0], 1.0, 0.5, |t, _| {
            seen.push(t);
            Ok::<_, Infallible>([1.0])
        })
        .unwrap();
        assert_eq!(seen, vec![1.0, 1.25, 1.25, 1.5]);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<[f64; 1], &str> = rkg4_step(&[1.0], 0.0, 0.1, |_, _| Err("boom"));
        assert_eq!(r, Err("boom"));
    }
}

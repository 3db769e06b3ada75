//! Selection events {y : Ay <= b} and the truncation interval of a contrast.
//!
//! Events are stored in a factored form: each block holds a small product
//! matrix M (for screening, X'; for matching pursuit, a per-step projected
//! design) and a list of rows, each a signed combination of one or two rows
//! of M together with a right-hand side. A screening event has
//! k(2(p-k)+1) rows but only needs the two m-vectors My and M eta to stream
//! every row, so A is never materialized except for debugging.
//!
//! Conditioning on the selection event constrains a contrast eta'y to an
//! interval [V-, V+] determined by the component of y orthogonal to eta;
//! `truncation_interval` computes it in one streaming pass per block.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One polytope row expressed as a signed combination of product-matrix rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowCombo {
    /// c * M[i] . y <= rhs
    One(usize, f64),
    /// ci * M[i] . y + cj * M[j] . y <= rhs
    Two(usize, f64, usize, f64),
}

impl RowCombo {
    #[inline]
    fn eval(&self, v: &DVector<f64>) -> f64 {
        match *self {
            RowCombo::One(i, c) => c * v[i],
            RowCombo::Two(i, ci, j, cj) => ci * v[i] + cj * v[j],
        }
    }

    fn max_index(&self) -> usize {
        match *self {
            RowCombo::One(i, _) => i,
            RowCombo::Two(i, _, j, _) => i.max(j),
        }
    }
}

/// A group of rows sharing one product matrix.
#[derive(Debug, Clone)]
pub struct RowBlock {
    /// m x n matrix applied to y once per block.
    pub product: DMatrix<f64>,
    /// Rows as (combination, rhs) pairs.
    pub rows: Vec<(RowCombo, f64)>,
}

/// A polyhedral selection event in R^n.
#[derive(Debug, Clone)]
pub struct SelectionEvent {
    dim: usize,
    blocks: Vec<RowBlock>,
}

/// Truncation of a contrast eta'y implied by an event, given the orthogonal
/// component of the generating y.
///
/// `v_minus <= eta'y <= v_plus` holds for the generating response, `v_zero`
/// is the minimum slack over rows orthogonal to eta (nonnegative on the
/// event up to ties), and `scale` is the pivot variance sigma2 * ||eta||^2.
#[derive(Debug, Clone)]
pub struct TruncationInterval {
    pub v_minus: f64,
    pub v_plus: f64,
    pub v_zero: f64,
    pub eta: DVector<f64>,
    pub scale: f64,
}

impl SelectionEvent {
    /// Event with no rows (all of R^n).
    pub fn empty(dim: usize) -> Self {
        SelectionEvent { dim, blocks: Vec::new() }
    }

    /// Event from an explicit (A, b) pair.
    pub fn from_explicit(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "SelectionEvent::from_explicit",
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let rows = (0..a.nrows()).map(|i| (RowCombo::One(i, 1.0), b[i])).collect();
        let dim = a.ncols();
        let mut event = SelectionEvent::empty(dim);
        event.add_block(RowBlock { product: a, rows })?;
        Ok(event)
    }

    /// Append a block after validating its shape against the event.
    pub fn add_block(&mut self, block: RowBlock) -> Result<()> {
        if block.product.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "SelectionEvent::add_block",
                expected: self.dim,
                got: block.product.ncols(),
            });
        }
        if let Some(bad) =
            block.rows.iter().map(|(c, _)| c.max_index()).find(|&i| i >= block.product.nrows())
        {
            return Err(Error::DimensionMismatch {
                context: "SelectionEvent::add_block (row index)",
                expected: block.product.nrows(),
                got: bad,
            });
        }
        if !block.rows.is_empty() {
            self.blocks.push(block);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_count(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn blocks(&self) -> &[RowBlock] {
        &self.blocks
    }

    /// Materialize (A, b). Debugging aid; quadratic in the row count.
    pub fn to_explicit(&self) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.row_count();
        let mut a = DMatrix::zeros(m, self.dim);
        let mut b = DVector::zeros(m);
        let mut r = 0;
        for block in &self.blocks {
            for (combo, rhs) in &block.rows {
                match *combo {
                    RowCombo::One(i, c) => {
                        for t in 0..self.dim {
                            a[(r, t)] = c * block.product[(i, t)];
                        }
                    }
                    RowCombo::Two(i, ci, j, cj) => {
                        for t in 0..self.dim {
                            a[(r, t)] = ci * block.product[(i, t)] + cj * block.product[(j, t)];
                        }
                    }
                }
                b[r] = *rhs;
                r += 1;
            }
        }
        (a, b)
    }

    /// Dump the explicit rows as CSV (a_1, ..., a_n, b per line).
    pub fn write_explicit_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (a, b) = self.to_explicit();
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("a{j}")).collect();
        header.push("b".to_string());
        writeln!(w, "{}", header.join(","))?;
        for r in 0..a.nrows() {
            let mut cells: Vec<String> = (0..self.dim).map(|j| format!("{}", a[(r, j)])).collect();
            cells.push(format!("{}", b[r]));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// True iff Ay <= b + tol * (1 + ||y||) row-wise.
pub fn contains(event: &SelectionEvent, y: &DVector<f64>, tol: f64) -> bool {
    debug_assert_eq!(y.len(), event.dim);
    let slack_allow = tol * (1.0 + y.norm());
    for block in &event.blocks {
        let w = &block.product * y;
        for (combo, rhs) in &block.rows {
            if combo.eval(&w) > rhs + slack_allow {
                return false;
            }
        }
    }
    true
}

/// Concatenate the rows of two events over the same space.
pub fn compose_events(e1: &SelectionEvent, e2: &SelectionEvent) -> Result<SelectionEvent> {
    if e1.dim != e2.dim {
        return Err(Error::DimensionMismatch {
            context: "compose_events",
            expected: e1.dim,
            got: e2.dim,
        });
    }
    let mut out = SelectionEvent::empty(e1.dim);
    for block in e1.blocks.iter().chain(e2.blocks.iter()) {
        out.add_block(block.clone())?;
    }
    Ok(out)
}

// Rows with |a'eta| below this fraction of the largest |a'eta| count as
// orthogonal to eta. Ties at this scale land in V0 instead of producing
// astronomically wide (or inverted) V-/V+ bounds.
const ALPHA_ZERO_REL_TOL: f64 = 1e-12;

// Allowed constraint violation for the generating y, relative to row and
// response scale; beyond this the (event, y) pair is considered mismatched.
const EVENT_SLACK_REL_TOL: f64 = 1e-8;

/// Truncation of eta'y implied by `event`, holding the orthogonal component
/// of `y` fixed.
///
/// Streams every row twice: once to find the largest |a'eta| (which sets the
/// zero-classification tolerance) and once to fold each row into V-, V+, or
/// V0. Each block's products M*eta and M*y are computed once.
pub fn truncation_interval(
    event: &SelectionEvent,
    eta: &DVector<f64>,
    sigma2: f64,
    y: &DVector<f64>,
) -> Result<TruncationInterval> {
    if eta.len() != event.dim || y.len() != event.dim {
        return Err(Error::DimensionMismatch {
            context: "truncation_interval",
            expected: event.dim,
            got: if eta.len() != event.dim { eta.len() } else { y.len() },
        });
    }
    let nsq = eta.norm_squared();
    if nsq == 0.0 {
        return Err(Error::ZeroContrast);
    }
    let eta_y = eta.dot(y);
    let y_scale = 1.0 + y.norm();

    let per_block: Vec<(DVector<f64>, DVector<f64>)> =
        event.blocks.iter().map(|b| (&b.product * eta, &b.product * y)).collect();

    let mut max_a_eta = 0.0_f64;
    for (block, (u, _)) in event.blocks.iter().zip(&per_block) {
        for (combo, _) in &block.rows {
            max_a_eta = max_a_eta.max(combo.eval(u).abs());
        }
    }
    let zero_tol = ALPHA_ZERO_REL_TOL * max_a_eta;

    let mut v_minus = f64::NEG_INFINITY;
    let mut v_plus = f64::INFINITY;
    let mut v_zero = f64::INFINITY;
    let mut row_index = 0;
    for (block, (u, w)) in event.blocks.iter().zip(&per_block) {
        for (combo, rhs) in &block.rows {
            let a_eta = combo.eval(u);
            let a_y = combo.eval(w);
            let slack = rhs - a_y;
            if slack < -EVENT_SLACK_REL_TOL * y_scale * (1.0 + a_eta.abs() / nsq.sqrt()) {
                return Err(Error::EventViolated { row: row_index, slack });
            }
            if a_eta.abs() <= zero_tol {
                v_zero = v_zero.min(slack);
            } else {
                let alpha = a_eta / nsq;
                let bound = slack / alpha + eta_y;
                if alpha < 0.0 {
                    v_minus = v_minus.max(bound);
                } else {
                    v_plus = v_plus.min(bound);
                }
            }
            row_index += 1;
        }
    }

    Ok(TruncationInterval { v_minus, v_plus, v_zero, eta: eta.clone(), scale: sigma2 * nsq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    #[test]
    fn single_row_along_eta() {
        let eta = vec3(1.0, 0.0, 0.0);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.5]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let y = vec3(0.3, 7.0, -1.0);
        let ti = truncation_interval(&event, &eta, 1.0, &y).unwrap();
        assert_relative_eq!(ti.v_plus, 2.5, max_relative = 1e-14);
        assert_eq!(ti.v_minus, f64::NEG_INFINITY);
        assert_eq!(ti.v_zero, f64::INFINITY);
        assert_relative_eq!(ti.scale, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn two_sided_box() {
        let eta = vec3(1.0, 0.0, 0.0);
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![3.0, 1.0]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let y = vec3(0.0, 0.0, 0.0);
        let ti = truncation_interval(&event, &eta, 1.0, &y).unwrap();
        assert_relative_eq!(ti.v_minus, -1.0, max_relative = 1e-14);
        assert_relative_eq!(ti.v_plus, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn orthogonal_row_feeds_v_zero() {
        let eta = vec3(1.0, 0.0, 0.0);
        let a = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let y = vec3(5.0, 0.3, 0.0);
        let ti = truncation_interval(&event, &eta, 1.0, &y).unwrap();
        assert_eq!(ti.v_minus, f64::NEG_INFINITY);
        assert_eq!(ti.v_plus, f64::INFINITY);
        assert_relative_eq!(ti.v_zero, 0.7, max_relative = 1e-14);
    }

    #[test]
    fn violated_event_is_reported() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![-1.0]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let eta = vec3(1.0, 0.0, 0.0);
        let y = vec3(0.0, 0.0, 0.0);
        match truncation_interval(&event, &eta, 1.0, &y) {
            Err(Error::EventViolated { row: 0, .. }) => {}
            other => panic!("expected EventViolated, got {other:?}"),
        }
    }

    #[test]
    fn zero_contrast_rejected() {
        let event = SelectionEvent::empty(3);
        let y = vec3(1.0, 2.0, 3.0);
        match truncation_interval(&event, &DVector::zeros(3), 1.0, &y) {
            Err(Error::ZeroContrast) => {}
            other => panic!("expected ZeroContrast, got {other:?}"),
        }
    }

    #[test]
    fn empty_event_contains_everything() {
        let event = SelectionEvent::empty(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let y = DVector::from_fn(3, |_, _| rng.sample(StandardNormal));
            assert!(contains(&event, &y, 0.0));
        }
        let ti =
            truncation_interval(&event, &vec3(0.0, 1.0, 0.0), 2.0, &vec3(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(ti.v_minus, f64::NEG_INFINITY);
        assert_eq!(ti.v_plus, f64::INFINITY);
        assert_relative_eq!(ti.scale, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn compose_with_empty_preserves_rows() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let composed = compose_events(&event, &SelectionEvent::empty(3)).unwrap();
        assert_eq!(composed.row_count(), 2);
        let (a1, b1) = event.to_explicit();
        let (a2, b2) = composed.to_explicit();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let e1 = SelectionEvent::empty(3);
        let e2 = SelectionEvent::empty(4);
        assert!(matches!(compose_events(&e1, &e2), Err(Error::DimensionMismatch { .. })));
    }

    // Random implicit event (mixed One/Two combos) whose rhs values are
    // chosen so y0 is feasible with positive slack.
    fn random_implicit_event(rng: &mut ChaCha8Rng, n: usize, y0: &DVector<f64>) -> SelectionEvent {
        let mut event = SelectionEvent::empty(n);
        for _ in 0..2 {
            let m = 4 + (rng.random::<u32>() % 3) as usize;
            let product = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = &product * y0;
            let mut rows = Vec::new();
            for _ in 0..12 {
                let combo = if rng.random::<bool>() {
                    let i = rng.random_range(0..m);
                    let c = rng.sample::<f64, _>(StandardNormal);
                    RowCombo::One(i, c)
                } else {
                    let i = rng.random_range(0..m);
                    let j = rng.random_range(0..m);
                    RowCombo::Two(i, rng.sample(StandardNormal), j, rng.sample(StandardNormal))
                };
                let slack: f64 = rng.random::<f64>() * 2.0;
                rows.push((combo, combo.eval(&w) + slack));
            }
            event.add_block(RowBlock { product, rows }).unwrap();
        }
        event
    }

    #[test]
    fn implicit_matches_explicit_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = 6;
            let y0 = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let eta = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let event = random_implicit_event(&mut rng, n, &y0);
            let (a, b) = event.to_explicit();
            let explicit = SelectionEvent::from_explicit(a, b).unwrap();
            let t1 = truncation_interval(&event, &eta, 1.3, &y0).unwrap();
            let t2 = truncation_interval(&explicit, &eta, 1.3, &y0).unwrap();
            for (x1, x2) in [
                (t1.v_minus, t2.v_minus),
                (t1.v_plus, t2.v_plus),
                (t1.v_zero, t2.v_zero),
                (t1.scale, t2.scale),
            ] {
                if x1.is_finite() || x2.is_finite() {
                    assert_relative_eq!(x1, x2, max_relative = 1e-12);
                } else {
                    assert_eq!(x1, x2);
                }
            }
            // The generating response always sits inside its own interval.
            let obs = eta.dot(&y0);
            assert!(t1.v_minus <= obs && obs <= t1.v_plus);
            assert!(t1.v_zero >= -1e-8 * y0.norm());
        }
    }

    #[test]
    fn contains_of_composition_is_conjunction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = 5;
            let y0 = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let e1 = random_implicit_event(&mut rng, n, &y0);
            let e2 = random_implicit_event(&mut rng, n, &y0);
            let both = compose_events(&e1, &e2).unwrap();
            for _ in 0..20 {
                let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)) * 2.0;
                assert_eq!(
                    contains(&both, &y, 1e-12),
                    contains(&e1, &y, 1e-12) && contains(&e2, &y, 1e-12)
                );
            }
        }
    }

    #[test]
    fn csv_dump_round_trips_rows() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.25, 2.0]);
        let b = DVector::from_vec(vec![0.5, -1.0]);
        let event = SelectionEvent::from_explicit(a, b).unwrap();
        let mut buf = Vec::new();
        event.write_explicit_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a0,a1,b");
        assert_eq!(lines[1], "1,-0.5,0.5");
        assert_eq!(lines[2], "0.25,2,-1");
    }
}

//! Minimal reverse-mode differentiation over a thread-local tape.
//!
//! A [`Var`] is a primal value plus a slot on the tape. Every arithmetic
//! operation records at most two (parent, local derivative) pairs; the
//! backward sweep accumulates adjoints in reverse order. Constants are not
//! recorded.
//!
//! [`gradient`] owns the tape for the duration of one evaluation, so calls
//! must not be nested on the same thread.

use std::cell::RefCell;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::Real;

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
}

#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    slot: u32,
}

impl Var {
    fn push(val: f64, parents: [u32; 2], partials: [f64; 2]) -> Var {
        let slot = TAPE.with(|t| {
            let mut t = t.borrow_mut();
            let slot = t.len() as u32;
            t.push(Node { parents, partials });
            slot
        });
        Var { val, slot }
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Var {
        if self.slot == CONST {
            Var { val, slot: CONST }
        } else {
            Var::push(val, [self.slot, CONST], [d, 0.0])
        }
    }

    #[inline]
    fn binary(a: Var, b: Var, val: f64, da: f64, db: f64) -> Var {
        match (a.slot == CONST, b.slot == CONST) {
            (true, true) => Var { val, slot: CONST },
            (false, true) => Var::push(val, [a.slot, CONST], [da, 0.0]),
            (true, false) => Var::push(val, [b.slot, CONST], [db, 0.0]),
            (false, false) => Var::push(val, [a.slot, b.slot], [da, db]),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.slot == CONST
    }
}

/// Number of nodes currently recorded on this thread's tape.
pub fn tape_len() -> usize {
    TAPE.with(|t| t.borrow().len())
}

/// Evaluates `f` at `x` and returns the value together with `∂f/∂x`.
pub fn gradient<F>(x: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: FnOnce(&[Var]) -> Var,
{
    TAPE.with(|t| t.borrow_mut().clear());
    let inputs: Vec<Var> = x
        .iter()
        .map(|&v| Var::push(v, [CONST, CONST], [0.0, 0.0]))
        .collect();
    let out = f(&inputs);
    let grad = TAPE.with(|t| {
        let tape = t.borrow();
        let mut adj = vec![0.0; tape.len()];
        if out.slot != CONST {
            adj[out.slot as usize] = 1.0;
            for i in (0..=out.slot as usize).rev() {
                let a = adj[i];
                if a == 0.0 {
                    continue;
                }
                let node = tape[i];
                for k in 0..2 {
                    let p = node.parents[k];
                    if p != CONST {
                        adj[p as usize] += a * node.partials[k];
                    }
                }
            }
        }
        adj.truncate(x.len());
        adj
    });
    TAPE.with(|t| t.borrow_mut().clear());
    (out.val, grad)
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, o: Var) -> Var {
        Var::binary(self, o, self.val + o.val, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, o: Var) -> Var {
        Var::binary(self, o, self.val - o.val, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, o: Var) -> Var {
        Var::binary(self, o, self.val * o.val, o.val, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, o: Var) -> Var {
        let q = self.val / o.val;
        Var::binary(self, o, q, 1.0 / o.val, -q / o.val)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        self.unary(-self.val, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    #[inline]
    fn add(self, c: f64) -> Var {
        self.unary(self.val + c, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    #[inline]
    fn sub(self, c: f64) -> Var {
        self.unary(self.val - c, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    #[inline]
    fn mul(self, c: f64) -> Var {
        self.unary(self.val * c, c)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    #[inline]
    fn div(self, c: f64) -> Var {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl AddAssign for Var {
    #[inline]
    fn add_assign(&mut self, o: Var) {
        *self = *self + o;
    }
}

impl SubAssign for Var {
    #[inline]
    fn sub_assign(&mut self, o: Var) {
        *self = *self - o;
    }
}

impl MulAssign for Var {
    #[inline]
    fn mul_assign(&mut self, o: Var) {
        *self = *self * o;
    }
}

impl Real for Var {
    #[inline]
    fn cst(v: f64) -> Self {
        Var {
            val: v,
            slot: CONST,
        }
    }
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    #[inline]
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.unary(r, -r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn expr<T: Real>(x: &[T]) -> T {
        let a = x[0];
        let b = x[1];
        (a * b).sin() + (a / b).exp() - b.sqrt().ln() * a + (a * 3.0 - 1.0).cos() / b.recip()
            - -a.square()
    }

    #[test]
    fn matches_finite_differences() {
        let x = [0.7, 1.9];
        let (v, g) = gradient(&x, |xs| expr(xs));
        assert!((v - expr(&x)).abs() < 1e-14);
        let fd = central_diff(|p| expr(p), &x);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn constants_do_not_touch_the_tape() {
        let (_, g) = gradient(&[2.0], |xs| {
            let before = tape_len();
            let c = Var::cst(3.0) * Var::cst(4.0) + 1.0;
            assert!(c.is_constant());
            assert_eq!(tape_len(), before);
            xs[0] * c
        });
        assert_eq!(g, vec![13.0]);
    }

    #[test]
    fn unused_input_has_zero_gradient() {
        let (v, g) = gradient(&[1.0, 5.0], |xs| xs[0] * xs[0]);
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![2.0, 0.0]);
    }
}

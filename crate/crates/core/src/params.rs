//! Flat unconstrained parameter vectors.
//!
//! Model structs hold natural (constrained) values. Writing them out produces
//! an unconstrained vector: positive quantities are stored as logarithms.
//! Reading walks the same order and rebuilds the struct over any scalar type.

use crate::scalar::Real;

pub struct ParamWriter {
    out: Vec<f64>,
}

impl ParamWriter {
    pub fn new() -> Self {
        ParamWriter { out: Vec::new() }
    }

    pub fn raw(&mut self, v: f64) {
        self.out.push(v);
    }

    pub fn positive(&mut self, v: f64) {
        self.out.push(v.ln());
    }

    pub fn raw_slice(&mut self, vs: &[f64]) {
        self.out.extend_from_slice(vs);
    }

    pub fn positive_slice(&mut self, vs: &[f64]) {
        self.out.extend(vs.iter().map(|v| v.ln()));
    }

    pub fn finish(self) -> Vec<f64> {
        self.out
    }
}

impl Default for ParamWriter {
    fn default() -> Self {
        Self::new()
    }
}

pub struct ParamReader<'a, T> {
    src: &'a [T],
    pos: usize,
}

impl<'a, T: Real> ParamReader<'a, T> {
    pub fn new(src: &'a [T]) -> Self {
        ParamReader { src, pos: 0 }
    }

    pub fn raw(&mut self) -> T {
        let v = self.src[self.pos];
        self.pos += 1;
        v
    }

    pub fn positive(&mut self) -> T {
        self.raw().exp()
    }

    pub fn raw_vec(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.raw()).collect()
    }

    pub fn positive_vec(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.positive()).collect()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos == self.src.len()
    }
}

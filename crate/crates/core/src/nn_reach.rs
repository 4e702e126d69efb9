//! Taylor-model propagation through a ReLU network.
//!
//! Each layer maps the Taylor-model vector through its affine part (exact on
//! the polynomials, rounding bounded into the remainders) and then encloses
//! every ReLU neuron. Neurons whose input range is one-signed pass through
//! exactly; the rest are replaced by a Bernstein interpolant composed with
//! the neuron's Taylor model.
//!
//! Remainders are tracked two ways. The direct route transports the
//! remainder interval vector through every weight matrix. The symbolic route
//! keeps each remainder box as a source together with the accumulated linear
//! map applied to it, and only multiplies out `M_k · E_k` when a neuron needs
//! a concrete value (a straddling ReLU) or at the output. The polynomial
//! parts, and therefore the interpolation ranges, are shared by both routes;
//! only the remainder differs. Where both are concrete they are intersected,
//! so the symbolic result is never wider than the direct one.

use crate::bernstein::bernstein_enclose_relu;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::network::{Activation, NetworkSpec};
use crate::taylor::{affine_combination, Polynomial, TaylorModel, TaylorModelVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationSettings {
    pub bp_order: usize,
    pub tm_degree: u32,
    pub symbolic_remainder: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            bp_order: 2,
            tm_degree: 2,
            symbolic_remainder: true,
        }
    }
}

/// Linear map applied to one remainder source box.
#[derive(Clone, Debug)]
enum Transport {
    /// Diagonal (row `j` scales entry `j` of the box).
    Diagonal(Vec<Interval>),
    Dense { cols: usize, data: Vec<Interval> },
}

impl Transport {
    fn identity(n: usize) -> Self {
        Transport::Diagonal(vec![Interval::point(1.0); n])
    }

    fn zero_row(&mut self, j: usize) {
        match self {
            Transport::Diagonal(d) => d[j] = Interval::ZERO,
            Transport::Dense { cols, data, .. } => {
                for v in &mut data[j * *cols..(j + 1) * *cols] {
                    *v = Interval::ZERO;
                }
            }
        }
    }

    /// `W · self` for a point matrix `W` (`out x in`, row-major).
    fn left_multiply(&self, w: &[f64], out: usize, inp: usize) -> Transport {
        match self {
            Transport::Diagonal(d) => {
                let mut data = Vec::with_capacity(out * inp);
                for j in 0..out {
                    for (i, di) in d.iter().enumerate() {
                        data.push(*di * w[j * inp + i]);
                    }
                }
                Transport::Dense { cols: inp, data }
            }
            Transport::Dense { cols, data, .. } => {
                let cols = *cols;
                let mut res = vec![Interval::ZERO; out * cols];
                for j in 0..out {
                    let row = &mut res[j * cols..(j + 1) * cols];
                    for i in 0..inp {
                        let wji = w[j * inp + i];
                        if wji == 0.0 {
                            continue;
                        }
                        let src = &data[i * cols..(i + 1) * cols];
                        for (r, m) in row.iter_mut().zip(src) {
                            if *m != Interval::ZERO {
                                *r = *r + *m * wji;
                            }
                        }
                    }
                }
                Transport::Dense { cols, data: res }
            }
        }
    }

    /// Row `j` of the map applied to `source`.
    fn apply_row(&self, j: usize, source: &[Interval]) -> Interval {
        match self {
            Transport::Diagonal(d) => d[j] * source[j],
            Transport::Dense { cols, data, .. } => data[j * cols..(j + 1) * cols]
                .iter()
                .zip(source)
                .fold(Interval::ZERO, |acc, (m, e)| {
                    if *m == Interval::ZERO || *e == Interval::ZERO {
                        acc
                    } else {
                        acc + *m * *e
                    }
                }),
        }
    }
}

/// Queue of `(transport matrix, source box)` pairs whose products sum to
/// the remainder of the current layer.
#[derive(Clone, Debug)]
pub struct SymbolicRemainderState {
    transports: Vec<Transport>,
    sources: Vec<Vec<Interval>>,
}

impl SymbolicRemainderState {
    fn new(initial: Vec<Interval>) -> Self {
        let n = initial.len();
        SymbolicRemainderState {
            transports: vec![Transport::identity(n)],
            sources: vec![initial],
        }
    }

    /// Pushes the affine map `W` through every queued transport and opens a
    /// fresh source box for this layer's local remainders.
    fn push_affine(&mut self, w: &[f64], out: usize, inp: usize, local: Vec<Interval>) {
        for t in &mut self.transports {
            *t = t.left_multiply(w, out, inp);
        }
        self.transports.push(Transport::identity(out));
        self.sources.push(local);
    }

    /// Concrete remainder of neuron `j`.
    fn evaluate(&self, j: usize) -> Interval {
        self.transports
            .iter()
            .zip(&self.sources)
            .fold(Interval::ZERO, |acc, (t, s)| acc + t.apply_row(j, s))
    }

    /// Replaces neuron `j`'s remainder by a fresh local value.
    fn reset(&mut self, j: usize, value: Interval) {
        let last = self.transports.len() - 1;
        for t in &mut self.transports[..last] {
            t.zero_row(j);
        }
        self.sources[last][j] = value;
        // the layer-local transport is always diagonal
        if let Transport::Diagonal(d) = &mut self.transports[last] {
            d[j] = Interval::point(1.0);
        }
    }

    pub fn depth(&self) -> usize {
        self.transports.len()
    }
}

/// Statistics of one propagation, for diagnostics and tests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub active: usize,
    pub inactive: usize,
    pub straddling: usize,
}

/// Encloses `{net(s) : s ∈ input}` by a Taylor-model vector.
pub fn nn_tm_propagate(
    net: &NetworkSpec,
    input: &TaylorModelVector,
    settings: &PropagationSettings,
) -> Result<TaylorModelVector> {
    propagate_with_stats(net, input, settings).map(|(v, _)| v)
}

/// Overlap of two enclosures of one quantity; `a` if rounding left them
/// disjoint.
fn tighter(a: Interval, b: Interval) -> Interval {
    a.intersect(&b).unwrap_or(a)
}

pub fn propagate_with_stats(
    net: &NetworkSpec,
    input: &TaylorModelVector,
    settings: &PropagationSettings,
) -> Result<(TaylorModelVector, PropagationStats)> {
    if input.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: input.dim(),
        });
    }
    if settings.bp_order < 1 {
        return Err(Error::InvalidOrder(settings.bp_order));
    }
    let domain = input.domain();
    let degree = settings.tm_degree.max(1);
    let mut polys: Vec<Polynomial> = input.components.iter().map(|c| c.poly.clone()).collect();
    let mut direct: Vec<Interval> = input.components.iter().map(|c| c.remainder).collect();
    let mut symbolic = settings
        .symbolic_remainder
        .then(|| SymbolicRemainderState::new(direct.clone()));
    let mut stats = PropagationStats::default();

    for layer in &net.layers {
        // affine part
        let mut next_polys = Vec::with_capacity(layer.rows);
        let mut rounding = Vec::with_capacity(layer.rows);
        let mut next_direct = Vec::with_capacity(layer.rows);
        let refs: Vec<&Polynomial> = polys.iter().collect();
        for j in 0..layer.rows {
            let row = layer.row(j);
            let (p, r) = affine_combination(row, &refs, layer.bias[j], &domain);
            let transported = row
                .iter()
                .zip(&direct)
                .fold(Interval::ZERO, |acc, (&w, rem)| {
                    if w == 0.0 || *rem == Interval::ZERO {
                        acc
                    } else {
                        acc + *rem * w
                    }
                });
            next_polys.push(p);
            rounding.push(r);
            next_direct.push(transported + r);
        }
        if let Some(sym) = symbolic.as_mut() {
            sym.push_affine(&layer.weights, layer.rows, layer.cols, rounding);
        }
        polys = next_polys;
        direct = next_direct;

        match layer.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for j in 0..layer.rows {
                    let range = polys[j].range(&domain) + direct[j];
                    let enc = bernstein_enclose_relu(range, settings.bp_order)?;
                    if range.lo() >= 0.0 {
                        stats.active += 1;
                        continue;
                    }
                    if range.hi() <= 0.0 {
                        stats.inactive += 1;
                        polys[j] = Polynomial::zero();
                        direct[j] = Interval::ZERO;
                        if let Some(sym) = symbolic.as_mut() {
                            sym.reset(j, Interval::ZERO);
                        }
                        continue;
                    }
                    stats.straddling += 1;
                    // the direct and symbolic remainders share one polynomial part
                    let base = TaylorModel::new(std::mem::take(&mut polys[j]), direct[j], domain);
                    let mut rems = vec![direct[j]];
                    if let Some(sym) = symbolic.as_ref() {
                        rems.push(sym.evaluate(j));
                    }
                    let (poly, out) = base.compose_many(&rems, &enc.poly, degree);
                    if let Some(sym) = symbolic.as_mut() {
                        // both bound the same error term, so their overlap does too
                        sym.reset(j, tighter(out[1], out[0]) + enc.error_bound);
                    }
                    polys[j] = poly;
                    direct[j] = out[0] + enc.error_bound;
                }
            }
        }
    }

    let components = polys
        .into_iter()
        .enumerate()
        .map(|(j, p)| {
            let rem = match &symbolic {
                Some(sym) => tighter(sym.evaluate(j), direct[j]),
                None => direct[j],
            };
            TaylorModel::new(p, rem, domain)
        })
        .collect();
    Ok((TaylorModelVector::new(components)?, stats))
}

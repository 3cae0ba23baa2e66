//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is built fresh for every example (or minibatch): leaves are
//! inputs, constants or parameters pulled from a [`ParamStore`]; every
//! primitive application appends one node. Because nodes are appended in
//! evaluation order the tape is always topologically sorted, and
//! [`Graph::backward`] is a single reverse sweep.

use crate::autodiff::params::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `W·x`
    MatVec,
    /// `Wᵀ·x`
    MatVecT,
    MatMul,
    Outer,
    Add,
    Sub,
    /// Elementwise product.
    Mul,
    Scale(f64),
    /// Concatenation of vectors.
    Concat,
    Reshape(Vec<usize>),
    Sigmoid,
    Tanh,
    Softmax,
    /// Vector to diagonal matrix.
    Diag,
    /// Elementwise mean over equally shaped inputs.
    Mean,
    /// Sum of all entries, as a scalar.
    Sum,
    Dot,
    /// Softmax cross-entropy of a logit vector against a target index.
    CrossEntropy(usize),
    /// Column `j` of a matrix; an embedding lookup `W·e_j`.
    SelectColumn(usize),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatVec => "matvec",
            Primitive::MatVecT => "matvec_t",
            Primitive::MatMul => "matmul",
            Primitive::Outer => "outer",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::Concat => "concat",
            Primitive::Reshape(_) => "reshape",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Softmax => "softmax",
            Primitive::Diag => "diag",
            Primitive::Mean => "mean",
            Primitive::Sum => "sum",
            Primitive::Dot => "dot",
            Primitive::CrossEntropy(_) => "cross_entropy",
            Primitive::SelectColumn(_) => "select_column",
        }
    }

    /// Evaluates the primitive, checking input shapes against its signature.
    pub fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
        let bad = || Error::dim(self.name(), &shapes);
        let unary = || -> Result<&Tensor> {
            match inputs {
                [x] => Ok(*x),
                _ => Err(bad()),
            }
        };
        let binary = || -> Result<(&Tensor, &Tensor)> {
            match inputs {
                [a, b] => Ok((*a, *b)),
                _ => Err(bad()),
            }
        };
        match self {
            Primitive::MatVec => {
                let (w, x) = binary()?;
                w.matvec(x).map_err(|_| bad())
            }
            Primitive::MatVecT => {
                let (w, x) = binary()?;
                w.matvec_t(x).map_err(|_| bad())
            }
            Primitive::MatMul => {
                let (a, b) = binary()?;
                a.matmul(b).map_err(|_| bad())
            }
            Primitive::Outer => {
                let (a, b) = binary()?;
                Tensor::outer(a, b).map_err(|_| bad())
            }
            Primitive::Add => {
                let (a, b) = binary()?;
                a.add(b).map_err(|_| bad())
            }
            Primitive::Sub => {
                let (a, b) = binary()?;
                a.sub(b).map_err(|_| bad())
            }
            Primitive::Mul => {
                let (a, b) = binary()?;
                if a.shape() != b.shape() {
                    return Err(bad());
                }
                let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
                Tensor::new(a.shape().to_vec(), data)
            }
            Primitive::Scale(s) => Ok(unary()?.scale(*s)),
            Primitive::Concat => {
                if inputs.is_empty() || inputs.iter().any(|t| !t.is_vector()) {
                    return Err(bad());
                }
                let data: Vec<f64> = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
                Ok(Tensor::from_vec(data))
            }
            Primitive::Reshape(shape) => {
                let x = unary()?;
                x.reshaped(shape).map_err(|_| bad())
            }
            Primitive::Sigmoid => Ok(unary()?.map(tensor::sigmoid)),
            Primitive::Tanh => Ok(unary()?.map(f64::tanh)),
            Primitive::Softmax => {
                let x = unary()?;
                if !x.is_vector() {
                    return Err(bad());
                }
                Ok(Tensor::from_vec(tensor::softmax(x.data())))
            }
            Primitive::Diag => {
                let x = unary()?;
                if !x.is_vector() {
                    return Err(bad());
                }
                let n = x.len();
                let mut out = Tensor::zeros(&[n, n]);
                for (i, &v) in x.data().iter().enumerate() {
                    out.set(i, i, v);
                }
                Ok(out)
            }
            Primitive::Mean => {
                let first = inputs.first().ok_or_else(bad)?;
                if inputs.iter().any(|t| t.shape() != first.shape()) {
                    return Err(bad());
                }
                let mut acc = Tensor::zeros(first.shape());
                for t in inputs {
                    acc.add_assign(t);
                }
                Ok(acc.scale(1.0 / inputs.len() as f64))
            }
            Primitive::Sum => Ok(Tensor::scalar(unary()?.data().iter().sum())),
            Primitive::Dot => {
                let (a, b) = binary()?;
                if !a.is_vector() {
                    return Err(bad());
                }
                a.dot(b).map(Tensor::scalar).map_err(|_| bad())
            }
            Primitive::CrossEntropy(target) => {
                let x = unary()?;
                if !x.is_vector() || *target >= x.len() {
                    return Err(bad());
                }
                Ok(Tensor::scalar(tensor::log_sum_exp(x.data()) - x.data()[*target]))
            }
            Primitive::SelectColumn(j) => {
                let w = unary()?;
                if !w.is_matrix() || *j >= w.cols() {
                    return Err(bad());
                }
                Ok(Tensor::from_vec(w.column(*j)))
            }
        }
    }

    /// Accumulates input gradients given the output value and its gradient.
    fn backward(&self, inputs: &[&Tensor], out: &Tensor, g: &Tensor, grads: &mut [Tensor]) {
        match self {
            Primitive::MatVec => {
                let (w, x) = (inputs[0], inputs[1]);
                let n = w.cols();
                let (gw, gx) = split2(grads);
                for (i, &gi) in g.data().iter().enumerate() {
                    tensor::axpy(gi, x.data(), &mut gw.data_mut()[i * n..(i + 1) * n]);
                    tensor::axpy(gi, &w.data()[i * n..(i + 1) * n], gx.data_mut());
                }
            }
            Primitive::MatVecT => {
                let (w, x) = (inputs[0], inputs[1]);
                let n = w.cols();
                let (gw, gx) = split2(grads);
                for (i, &xi) in x.data().iter().enumerate() {
                    let row = &w.data()[i * n..(i + 1) * n];
                    tensor::axpy(xi, g.data(), &mut gw.data_mut()[i * n..(i + 1) * n]);
                    gx.data_mut()[i] += tensor::dot(row, g.data());
                }
            }
            Primitive::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let ga = g.matmul(&b.transpose()).expect("matmul backward");
                let gb = a.transpose().matmul(g).expect("matmul backward");
                grads[0].add_assign(&ga);
                grads[1].add_assign(&gb);
            }
            Primitive::Outer => {
                let (a, b) = (inputs[0], inputs[1]);
                let n = b.len();
                let (ga, gb) = split2(grads);
                for (i, &ai) in a.data().iter().enumerate() {
                    let grow = &g.data()[i * n..(i + 1) * n];
                    ga.data_mut()[i] += tensor::dot(grow, b.data());
                    tensor::axpy(ai, grow, gb.data_mut());
                }
            }
            Primitive::Add => {
                grads[0].add_assign(g);
                grads[1].add_assign(g);
            }
            Primitive::Sub => {
                grads[0].add_assign(g);
                grads[1].add_assign(&g.scale(-1.0));
            }
            Primitive::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (ga, gb) = split2(grads);
                for i in 0..g.len() {
                    ga.data_mut()[i] += g.data()[i] * b.data()[i];
                    gb.data_mut()[i] += g.data()[i] * a.data()[i];
                }
            }
            Primitive::Scale(s) => {
                tensor::axpy(*s, g.data(), grads[0].data_mut());
            }
            Primitive::Concat => {
                let mut offset = 0;
                for gi in grads.iter_mut() {
                    let n = gi.len();
                    tensor::axpy(1.0, &g.data()[offset..offset + n], gi.data_mut());
                    offset += n;
                }
            }
            Primitive::Reshape(_) => {
                tensor::axpy(1.0, g.data(), grads[0].data_mut());
            }
            Primitive::Sigmoid => {
                for ((gi, &y), &go) in grads[0].data_mut().iter_mut().zip(out.data()).zip(g.data()) {
                    *gi += go * y * (1.0 - y);
                }
            }
            Primitive::Tanh => {
                for ((gi, &y), &go) in grads[0].data_mut().iter_mut().zip(out.data()).zip(g.data()) {
                    *gi += go * (1.0 - y * y);
                }
            }
            Primitive::Softmax => {
                let gy = tensor::dot(g.data(), out.data());
                for ((gi, &y), &go) in grads[0].data_mut().iter_mut().zip(out.data()).zip(g.data()) {
                    *gi += y * (go - gy);
                }
            }
            Primitive::Diag => {
                let n = grads[0].len();
                for i in 0..n {
                    grads[0].data_mut()[i] += g.at(i, i);
                }
            }
            Primitive::Mean => {
                let k = 1.0 / inputs.len() as f64;
                for gi in grads.iter_mut() {
                    tensor::axpy(k, g.data(), gi.data_mut());
                }
            }
            Primitive::Sum => {
                let go = g.item();
                grads[0].data_mut().iter_mut().for_each(|x| *x += go);
            }
            Primitive::Dot => {
                let go = g.item();
                let (a, b) = (inputs[0], inputs[1]);
                let (ga, gb) = split2(grads);
                tensor::axpy(go, b.data(), ga.data_mut());
                tensor::axpy(go, a.data(), gb.data_mut());
            }
            Primitive::CrossEntropy(target) => {
                let go = g.item();
                let p = tensor::softmax(inputs[0].data());
                for (i, (gi, pi)) in grads[0].data_mut().iter_mut().zip(p).enumerate() {
                    let indicator = if i == *target { 1.0 } else { 0.0 };
                    *gi += go * (pi - indicator);
                }
            }
            Primitive::SelectColumn(j) => {
                let n = inputs[0].cols();
                for (r, &go) in g.data().iter().enumerate() {
                    grads[0].data_mut()[r * n + j] += go;
                }
            }
        }
    }
}

/// Mutable access to two distinct gradient buffers.
fn split2(grads: &mut [Tensor]) -> (&mut Tensor, &mut Tensor) {
    let (a, b) = grads.split_at_mut(1);
    (&mut a[0], &mut b[0])
}

#[derive(Debug, Clone)]
enum Origin {
    Leaf,
    Param(ParamId),
    Op(Primitive, Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    origin: Origin,
}

/// Gradients of a scalar with respect to every leaf of the graph that
/// influences it.
#[derive(Debug, Clone)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to a leaf, or `None` if the leaf is disconnected
    /// from the loss (or `var` is not a leaf).
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.leaves.get(var.0).and_then(Option::as_ref)
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, origin: Origin) -> Var {
        self.nodes.push(Node { value, origin });
        Var(self.nodes.len() - 1)
    }

    /// A non-trainable leaf.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Origin::Leaf)
    }

    /// Loads a parameter into the graph; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.param_nodes.len() <= id.0 {
            self.param_nodes.resize(id.0 + 1, None);
        }
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let v = self.push(store.value(id).clone(), Origin::Param(id));
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn apply(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = prim.forward(&values)?;
        Ok(self.push(out, Origin::Op(prim, inputs.to_vec())))
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        self.apply(Primitive::MatVec, &[w, x])
    }

    pub fn matvec_t(&mut self, w: Var, x: Var) -> Result<Var> {
        self.apply(Primitive::MatVecT, &[w, x])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Outer, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(Primitive::Scale(s), &[a])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(Primitive::Concat, parts)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.apply(Primitive::Reshape(shape.to_vec()), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Softmax, &[a])
    }

    pub fn diag(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Diag, &[a])
    }

    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(Primitive::Mean, parts)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sum, &[a])
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Dot, &[a, b])
    }

    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        self.apply(Primitive::CrossEntropy(target), &[logits])
    }

    pub fn select_column(&mut self, w: Var, j: usize) -> Result<Var> {
        self.apply(Primitive::SelectColumn(j), &[w])
    }

    /// Sum of scalars (or equally shaped tensors) as a left fold of adds.
    pub fn add_all(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::contract("add_all of an empty list"))?;
        rest.iter().try_fold(first, |acc, &v| self.add(acc, v))
    }

    /// Reverse sweep from a scalar `loss`. Parameter gradients are
    /// accumulated (added) into `store`; leaf gradients are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut leaves: Vec<Option<Tensor>> = vec![None; self.nodes.len()];

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.origin {
                Origin::Leaf => leaves[i] = Some(g),
                Origin::Param(id) => {
                    store.grad_mut(*id).add_assign(&g);
                    leaves[i] = Some(g);
                }
                Origin::Op(prim, inputs) => {
                    let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                    let mut local: Vec<Tensor> = values.iter().map(|t| Tensor::zeros(t.shape())).collect();
                    prim.backward(&values, &node.value, &g, &mut local);
                    for (v, gi) in inputs.iter().zip(local) {
                        match &mut grads[v.0] {
                            Some(acc) => acc.add_assign(&gi),
                            slot @ None => *slot = Some(gi),
                        }
                    }
                }
            }
        }
        Ok(Gradients { leaves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, t: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add(name, t).unwrap();
        (s, id)
    }

    #[test]
    fn outer_of_basis_vectors() {
        let mut g = Graph::new();
        let a = g.input(Tensor::vector(&[1.0, 0.0]));
        let b = g.input(Tensor::vector(&[0.0, 1.0]));
        let o = g.outer(a, b).unwrap();
        assert_eq!(g.value(o).shape(), &[2, 2]);
        assert_eq!(g.value(o).data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_and_sigmoid_at_zero() {
        let mut g = Graph::new();
        let z = g.input(Tensor::vector(&[0.0, 0.0]));
        let p = g.softmax(z).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5]);
        let z = g.input(Tensor::scalar(0.0));
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
    }

    #[test]
    fn shape_mismatch_names_primitive() {
        let mut g = Graph::new();
        let w = g.input(Tensor::zeros(&[2, 3]));
        let x = g.input(Tensor::zeros(&[2]));
        match g.matvec(w, x) {
            Err(Error::Dimension { op, shapes }) => {
                assert_eq!(op, "matvec");
                assert_eq!(shapes, vec![vec![2, 3], vec![2]]);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn square_gradient() {
        let (mut store, id) = store_with("x", Tensor::scalar(3.0));
        let mut g = Graph::new();
        let x = g.param(&store, id);
        let y = g.mul(x, x).unwrap();
        g.backward(y, &mut store).unwrap();
        assert_eq!(store.grad(id).item(), 6.0);
    }

    #[test]
    fn disconnected_param_gets_exact_zero() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(&[1.0, 2.0])).unwrap();
        let b = store.add("b", Tensor::vector(&[5.0, 6.0])).unwrap();
        let mut g = Graph::new();
        let va = g.param(&store, a);
        let _vb = g.param(&store, b);
        let s = g.sum(va).unwrap();
        g.backward(s, &mut store).unwrap();
        assert_eq!(store.grad(b).data(), &[0.0, 0.0]);
        assert_eq!(store.grad(a).data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut store = ParamStore::new();
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(&[1.0, 2.0]));
        assert!(matches!(g.backward(x, &mut store), Err(Error::Contract(_))));
    }

    #[test]
    fn param_node_is_cached() {
        let (store, id) = store_with("w", Tensor::zeros(&[2]));
        let mut g = Graph::new();
        assert_eq!(g.param(&store, id), g.param(&store, id));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let mut g = Graph::new();
        let z = g.input(Tensor::zeros(&[4]));
        let l = g.cross_entropy(z, 2).unwrap();
        assert!((g.value(l).item() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn leaf_gradient_reported() {
        let mut store = ParamStore::new();
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(&[1.0, -2.0]));
        let y = g.dot(x, x).unwrap();
        let grads = g.backward(y, &mut store).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0]);
    }
}
